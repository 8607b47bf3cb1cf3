/* Copyright 2026 The AFDM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "afdm/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include "afdm/error.hpp"

namespace afdm {
namespace {

constexpr char kMagic[8] = {'A', 'F', 'D', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string file) : in_(in), file_(std::move(file)) {}
  template <typename T>
  T get() {
    T v;
    read(&v, sizeof v);
    return to_little(v);
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 24)) fail("string too long");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw DataError("checkpoint " + file_ + ": " + why);
  }

 private:
  std::ifstream& in_;
  std::string file_;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.tensor;
  }
  return nullptr;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
  return std::any_of(tensors.begin(), tensors.end(),
                     [&](const NamedTensor& t) { return t.name.starts_with(prefix); });
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create checkpoint " + file.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [key, value] : ckpt.meta) {
    w.put_string(key);
    w.put_string(value);
  }
  w.put(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    w.put_string(name);
    w.put(static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) w.put(static_cast<std::uint64_t>(d));
    for (double v : tensor.data()) w.put(v);
  }
  out.flush();
  if (!out) throw DataError("write failed for checkpoint " + file.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + file.string());
  Reader r(in, file.string());
  char magic[sizeof kMagic];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.get_string();
    ckpt.meta[key] = r.get_string();
  }
  const auto n_tensors = r.get<std::uint32_t>();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.get_string();
    if (!seen.insert(name).second) r.fail("duplicate tensor " + name);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("rank too large for " + name);
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      const auto dim = r.get<std::uint64_t>();
      if (dim == 0 || dim > kMaxElements || count * dim > kMaxElements) {
        r.fail("bad shape for " + name);
      }
      count *= dim;
      d = static_cast<std::size_t>(dim);
    }
    std::vector<double> values(static_cast<std::size_t>(count));
    for (double& v : values) v = r.get<double>();
    ckpt.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  return ckpt;
}

void add_tensors(Checkpoint& ckpt, const ParamList& params, const std::string& prefix) {
  for (const auto& p : params) ckpt.tensors.push_back({prefix + p.name, p.tensor.detach()});
}

void load_tensors(const Checkpoint& ckpt, ParamList& params, const std::string& prefix) {
  std::set<std::string> expected;
  for (const auto& p : params) expected.insert(prefix + p.name);
  for (const auto& t : ckpt.tensors) {
    if (!t.name.starts_with(prefix)) continue;
    if (!prefix.empty() && !expected.count(t.name)) {
      throw DataError("checkpoint has unexpected tensor " + t.name);
    }
  }
  for (auto& p : params) {
    const Tensor* src = ckpt.find(prefix + p.name);
    if (src == nullptr) throw DataError("checkpoint lacks tensor " + prefix + p.name);
    if (src->shape() != p.tensor.shape()) {
      throw DataError("checkpoint tensor " + prefix + p.name + " has shape " +
                      shape_str(src->shape()) + ", expected " + shape_str(p.tensor.shape()));
    }
    std::copy(src->data().begin(), src->data().end(), p.tensor.mutable_data().begin());
  }
}

void add_adam_state(Checkpoint& ckpt, const std::string& prefix, const ParamList& params,
                    const AdamState& state) {
  ckpt.meta[prefix + "step"] = std::to_string(state.step);
  if (state.m.empty()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& shape = params[i].tensor.shape();
    ckpt.tensors.push_back({prefix + "m." + params[i].name, Tensor(shape, state.m[i])});
    ckpt.tensors.push_back({prefix + "v." + params[i].name, Tensor(shape, state.v[i])});
  }
}

void load_adam_state(const Checkpoint& ckpt, const std::string& prefix, const ParamList& params,
                     AdamState& state) {
  const auto it = ckpt.meta.find(prefix + "step");
  if (it == ckpt.meta.end()) throw DataError("checkpoint lacks optimizer state " + prefix);
  state.step = std::stoull(it->second);
  state.m.clear();
  state.v.clear();
  if (!ckpt.has_prefix(prefix + "m.")) return;
  for (const auto& p : params) {
    for (const char* moment : {"m.", "v."}) {
      const std::string name = prefix + moment + p.name;
      const Tensor* src = ckpt.find(name);
      if (src == nullptr) throw DataError("checkpoint lacks tensor " + name);
      if (src->shape() != p.tensor.shape()) throw DataError("shape mismatch for " + name);
      auto& dst = moment[0] == 'm' ? state.m : state.v;
      dst.emplace_back(src->data().begin(), src->data().end());
    }
  }
}

}  // namespace afdm
