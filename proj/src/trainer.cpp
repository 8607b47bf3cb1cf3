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

#include "afdm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "afdm/error.hpp"
#include "afdm/losses.hpp"
#include "afdm/metrics.hpp"
#include "afdm/ops.hpp"

namespace afdm {
namespace {

constexpr std::uint64_t kNetSalt = 0x7a51;
constexpr std::uint64_t kAdversarySalt = 0xadf0;
constexpr std::uint64_t kBatchSalt = 0xba7c;
constexpr std::uint64_t kSubsetSalt = 0x5b5e;
constexpr std::uint64_t kAugmentSalt = 0xa116;

const std::map<std::string, TrainerMode>& mode_table() {
  static const std::map<std::string, TrainerMode> table{
      {"none", TrainerMode::kNone},
      {"b1_image_aug", TrainerMode::kImageAug},
      {"afdm_tps", TrainerMode::kAfdmTps},
      {"b3_image_space_tps", TrainerMode::kImageSpaceTps},
      {"b4_affine", TrainerMode::kAffine},
  };
  return table;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

// Routes rows `subset` (sorted) of x through `fn`, keeping batch order.
Tensor route(const Tensor& x, std::span<const std::size_t> subset,
             const std::function<Tensor(const Tensor&)>& fn) {
  if (subset.empty()) return x;
  const std::size_t n = x.dim(0);
  if (subset.size() == n) return fn(x);
  std::vector<bool> chosen(n, false);
  for (std::size_t i : subset) chosen[i] = true;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!chosen[i]) rest.push_back(i);
  }
  const Tensor kept = index_select(x, rest);
  const Tensor moved = fn(index_select(x, subset));
  const Tensor joined = concat({kept, moved}, 0);
  std::vector<std::size_t> position(n);
  for (std::size_t k = 0; k < rest.size(); ++k) position[rest[k]] = k;
  for (std::size_t k = 0; k < subset.size(); ++k) position[subset[k]] = rest.size() + k;
  return index_select(joined, position);
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("config: bad integer list for '" + key + "': " + value);
    }
    out.push_back(std::stoul(item));
  }
  if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return std::stoull(value);
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v)) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace

std::string mode_name(TrainerMode mode) {
  for (const auto& [name, m] : mode_table()) {
    if (m == mode) return name;
  }
  return "unknown";
}

TrainerMode parse_mode(std::string_view name) {
  const auto it = mode_table().find(std::string(name));
  if (it == mode_table().end()) throw ConfigError("unknown trainer mode '" + std::string(name) + "'");
  return it->second;
}

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::kPretrain:
      return "pretrain";
    case Phase::kWarmup:
      return "warmup";
    case Phase::kJoint:
      return "joint";
  }
  return "unknown";
}

bool has_adversary(TrainerMode mode) {
  return mode == TrainerMode::kAfdmTps || mode == TrainerMode::kImageSpaceTps ||
         mode == TrainerMode::kAffine;
}

void TrainSchedule::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(task_lr > 0.0) || !(loc_lr >= 0.0)) {
    throw ConfigError("task_lr must be positive and loc_lr non-negative");
  }
  if (!(deform_fraction >= 0.0 && deform_fraction <= 1.0)) {
    throw ConfigError("deform_fraction must lie in [0,1]");
  }
}

void TrainConfig::validate() const {
  schedule.validate();
  if (!(width_factor > 0.0 && width_factor <= 1.0)) throw ConfigError("width_factor must lie in (0,1]");
  if (afdm_k == 0) throw ConfigError("afdm_k must be positive");
  if (log_every == 0) throw ConfigError("log_every must be positive");
  if (loc_channels.empty()) throw ConfigError("loc_channels must not be empty");
  if (alphabet.empty()) throw ConfigError("alphabet must not be empty");
}

TrainConfig parse_train_config(std::string_view text, const std::filesystem::path& base_dir) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::stringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("config: duplicate key '" + key + "'");
    TrainSchedule& s = cfg.schedule;
    if (key == "task") {
      if (value == "hwr") {
        cfg.task = Task::kRecognition;
      } else if (value == "hws") {
        cfg.task = Task::kSpotting;
      } else {
        throw ConfigError("config: task must be hwr or hws");
      }
    } else if (key == "mode") {
      cfg.mode = parse_mode(value);
    } else if (key == "seed") {
      cfg.seed = parse_size(key, value);
    } else if (key == "pretrain_iters") {
      s.pretrain_iters = parse_size(key, value);
    } else if (key == "warmup_iters") {
      s.warmup_iters = parse_size(key, value);
    } else if (key == "joint_iters") {
      s.joint_iters = parse_size(key, value);
    } else if (key == "batch_size") {
      s.batch_size = parse_size(key, value);
    } else if (key == "task_lr") {
      s.task_lr = parse_real(key, value);
    } else if (key == "loc_lr") {
      s.loc_lr = parse_real(key, value);
    } else if (key == "deform_fraction") {
      s.deform_fraction = parse_real(key, value);
    } else if (key == "alternation") {
      if (value == "iteration") {
        s.alternation = Alternation::kIteration;
      } else if (value == "epoch") {
        s.alternation = Alternation::kEpoch;
      } else {
        throw ConfigError("config: alternation must be iteration or epoch");
      }
    } else if (key == "eval_every") {
      s.eval_every = parse_size(key, value);
    } else if (key == "width_factor") {
      cfg.width_factor = parse_real(key, value);
    } else if (key == "insertion_layer") {
      cfg.insertion_layer = value;
    } else if (key == "lstm_hidden") {
      cfg.lstm_hidden = parse_size(key, value);
    } else if (key == "fc_width") {
      cfg.fc_width = parse_size(key, value);
    } else if (key == "spp_levels") {
      cfg.spp_levels = parse_sizes(key, value);
    } else if (key == "phoc_levels") {
      cfg.phoc_levels = parse_sizes(key, value);
    } else if (key == "alphabet") {
      cfg.alphabet = value;
    } else if (key == "afdm_k") {
      cfg.afdm_k = parse_size(key, value);
    } else if (key == "loc_channels") {
      cfg.loc_channels = parse_sizes(key, value);
    } else if (key == "loc_hidden") {
      cfg.loc_hidden = parse_size(key, value);
    } else if (key == "conv_precision") {
      if (value == "float32") {
        cfg.float32_conv = true;
      } else if (value == "float64") {
        cfg.float32_conv = false;
      } else {
        throw ConfigError("config: conv_precision must be float32 or float64");
      }
    } else if (key == "augment") {
      // A single switch: the default probabilities or none at all.
      if (!parse_bool(key, value)) {
        AugmentConfig& a = cfg.augment;
        a.p_rotate = a.p_translate = a.p_scale = a.p_shear = a.p_noise = 0.0;
      }
    } else if (key == "log_every") {
      cfg.log_every = parse_size(key, value);
    } else if (key == "checkpoint_every") {
      cfg.checkpoint_every = parse_size(key, value);
    } else if (key == "val_limit") {
      cfg.val_limit = parse_size(key, value);
    } else if (key == "train_manifest") {
      cfg.train_manifest = path_of(value);
    } else if (key == "val_manifest") {
      cfg.val_manifest = path_of(value);
    } else if (key == "out_dir") {
      cfg.out_dir = path_of(value);
    } else if (key == "resume") {
      cfg.resume = value.empty() ? std::filesystem::path{} : path_of(value);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), file.parent_path());
}

std::string format_train_config(const TrainConfig& cfg) {
  const TrainSchedule& s = cfg.schedule;
  const bool augment_on = cfg.augment.p_rotate > 0 || cfg.augment.p_noise > 0;
  std::ostringstream out;
  out << "task = " << (cfg.task == Task::kRecognition ? "hwr" : "hws") << '\n'
      << "mode = " << mode_name(cfg.mode) << '\n'
      << "seed = " << cfg.seed << '\n'
      << "pretrain_iters = " << s.pretrain_iters << '\n'
      << "warmup_iters = " << s.warmup_iters << '\n'
      << "joint_iters = " << s.joint_iters << '\n'
      << "batch_size = " << s.batch_size << '\n'
      << "task_lr = " << format_double(s.task_lr) << '\n'
      << "loc_lr = " << format_double(s.loc_lr) << '\n'
      << "deform_fraction = " << format_double(s.deform_fraction) << '\n'
      << "alternation = " << (s.alternation == Alternation::kIteration ? "iteration" : "epoch")
      << '\n'
      << "eval_every = " << s.eval_every << '\n'
      << "width_factor = " << format_double(cfg.width_factor) << '\n'
      << "insertion_layer = " << cfg.insertion_layer << '\n'
      << "lstm_hidden = " << cfg.lstm_hidden << '\n'
      << "fc_width = " << cfg.fc_width << '\n'
      << "spp_levels = " << join_sizes(cfg.spp_levels) << '\n'
      << "phoc_levels = " << join_sizes(cfg.phoc_levels) << '\n'
      << "alphabet = " << cfg.alphabet << '\n'
      << "afdm_k = " << cfg.afdm_k << '\n'
      << "loc_channels = " << join_sizes(cfg.loc_channels) << '\n'
      << "loc_hidden = " << cfg.loc_hidden << '\n'
      << "augment = " << (augment_on ? "true" : "false") << '\n'
      << "conv_precision = " << (cfg.float32_conv ? "float32" : "float64") << '\n'
      << "log_every = " << cfg.log_every << '\n'
      << "checkpoint_every = " << cfg.checkpoint_every << '\n'
      << "val_limit = " << cfg.val_limit << '\n';
  if (!cfg.train_manifest.empty()) out << "train_manifest = " << cfg.train_manifest.string() << '\n';
  if (!cfg.val_manifest.empty()) out << "val_manifest = " << cfg.val_manifest.string() << '\n';
  if (!cfg.out_dir.empty()) out << "out_dir = " << cfg.out_dir.string() << '\n';
  return out.str();
}

double EvalResult::value(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw ContractError("no metric named " + name);
}

namespace {

std::unique_ptr<TaskNet> build_network(const TrainConfig& cfg, const Alphabet& alphabet,
                                       const PhocLayout& layout) {
  Rng rng = make_rng(cfg.seed, 0, kNetSalt);
  if (cfg.task == Task::kRecognition) {
    CrnnConfig c;
    c.width_factor = cfg.width_factor;
    c.alphabet_size = alphabet.size();
    c.lstm_hidden = cfg.lstm_hidden;
    c.insertion_layer = cfg.insertion_layer;
    return std::make_unique<Crnn>(c, rng);
  }
  PhocNetConfig c;
  c.width_factor = cfg.width_factor;
  c.phoc_dim = phoc_length(alphabet, layout);
  c.spp_levels = cfg.spp_levels;
  c.fc_width = cfg.fc_width;
  c.insertion_layer = cfg.insertion_layer;
  return std::make_unique<PhocNet>(c, rng);
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, std::vector<WordSample> train, std::vector<WordSample> val)
    : cfg_(cfg),
      alphabet_(utf8_decode(cfg.alphabet)),
      train_(std::move(train)),
      val_(std::move(val)) {
  cfg_.validate();
  if (train_.empty()) throw DataError("training set is empty");
  layout_.levels = cfg_.phoc_levels;
  if (cfg_.val_limit > 0 && val_.size() > cfg_.val_limit) val_.resize(cfg_.val_limit);
  for (const auto& s : train_) {
    train_inputs_.push_back(preprocess(s.image));
    if (cfg_.task == Task::kRecognition) {
      train_targets_.push_back(alphabet_.ctc_encode(s.transcription));
    } else {
      train_phoc_.push_back(phoc_encode(s.transcription, alphabet_, layout_));
    }
  }
  for (const auto& s : val_) {
    for (char32_t c : s.transcription) {
      if (!alphabet_.contains(c)) throw LabelError("validation label outside the alphabet");
    }
    val_inputs_.push_back(preprocess(s.image));
  }
  net_ = build_network(cfg_, alphabet_, layout_);
  if (has_adversary(cfg_.mode)) {
    AfdmConfig a;
    a.loc_channels = cfg_.loc_channels;
    a.loc_hidden = cfg_.loc_hidden;
    if (cfg_.mode == TrainerMode::kImageSpaceTps) {
      a.channels = 1;
      a.k = 1;
    } else {
      a.channels = net_->conv_channels(cfg_.insertion_layer);
      a.k = cfg_.afdm_k;
      a.kind = cfg_.mode == TrainerMode::kAffine ? WarpKind::kAffine : WarpKind::kTps;
    }
    Rng rng = make_rng(cfg_.seed, 0, kAdversarySalt);
    adversary_ = std::make_unique<Afdm>(a, rng);
    adversary_->init_identity();
  }
  task_adam_.lr = cfg_.schedule.task_lr;
  adv_adam_.lr = cfg_.schedule.loc_lr;
  skip_idle_phases();
}

ParamList Trainer::adversary_parameters() const {
  return adversary_ ? adversary_->parameters() : ParamList{};
}

std::size_t Trainer::min_width(std::span<const std::size_t> indices) const {
  std::size_t width = 8;
  if (cfg_.task == Task::kRecognition) {
    for (std::size_t i : indices) {
      width = std::max(width, 4 * (ctc_min_frames(train_targets_[i]) + 1));
    }
  } else {
    width = std::max(width, 4 * *std::max_element(cfg_.spp_levels.begin(), cfg_.spp_levels.end()));
  }
  return width;
}

Batch Trainer::make_batch(std::span<const std::size_t> indices) const {
  std::vector<Tensor> parts;
  for (std::size_t i : indices) {
    if (i >= train_.size()) throw ContractError("make_batch: index out of range");
    parts.push_back(train_inputs_[i]);
  }
  Batch batch;
  batch.images = afdm::make_batch(std::span<const Tensor>(parts), min_width(indices));
  batch.indices.assign(indices.begin(), indices.end());
  return batch;
}

Batch Trainer::sample_batch(std::uint64_t iter) const {
  Rng rng = make_rng(cfg_.seed, iter, kBatchSalt);
  const std::size_t n = train_.size();
  const std::size_t b = std::min(cfg_.schedule.batch_size, n);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(b);
  Batch batch = make_batch(pool);
  batch.iter = iter;
  return batch;
}

std::size_t Trainer::deformed_count(std::size_t batch) const {
  const double x = cfg_.schedule.deform_fraction * static_cast<double>(batch);
  const auto m = static_cast<std::size_t>(std::max(0.0, std::ceil(x - 1e-9)));
  return std::min(m, batch);
}

std::vector<std::size_t> Trainer::deform_subset(std::uint64_t iter, std::size_t batch) const {
  Rng rng = make_rng(cfg_.seed, iter, kSubsetSalt);
  const std::size_t m = deformed_count(batch);
  std::vector<std::size_t> pool(batch);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, batch - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Tensor Trainer::augmented_images(const Batch& batch, std::span<const std::size_t> subset) const {
  const std::size_t h = batch.images.dim(2);
  const std::size_t w = batch.images.dim(3);
  std::vector<double> values(batch.images.data().begin(), batch.images.data().end());
  Rng rng = make_rng(cfg_.seed, batch.iter, kAugmentSalt);
  for (std::size_t row : subset) {
    Image im(h, w);
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(row * h * w), h * w, im.pixels.begin());
    const Image out = image_augment(im, rng, cfg_.augment);
    std::copy(out.pixels.begin(), out.pixels.end(),
              values.begin() + static_cast<std::ptrdiff_t>(row * h * w));
  }
  return Tensor(batch.images.shape(), std::move(values));
}

Tensor Trainer::forward(const Batch& batch, std::span<const std::size_t> subset) const {
  switch (cfg_.mode) {
    case TrainerMode::kNone:
      return net_->forward(batch.images);
    case TrainerMode::kImageAug:
      return net_->forward(subset.empty() ? batch.images : augmented_images(batch, subset));
    case TrainerMode::kImageSpaceTps: {
      const Afdm& adv = *adversary_;
      return net_->forward(
          route(batch.images, subset, [&](const Tensor& x) { return image_space_deform(x, adv); }));
    }
    case TrainerMode::kAfdmTps:
    case TrainerMode::kAffine: {
      const Afdm& adv = *adversary_;
      return net_->forward(batch.images, [&](const Tensor& f) {
        return route(f, subset, [&](const Tensor& x) { return adv.deform(x); });
      });
    }
  }
  throw ConfigError("unknown trainer mode");
}

Tensor Trainer::task_loss(const Tensor& output, const Batch& batch) const {
  if (cfg_.task == Task::kRecognition) {
    std::vector<std::vector<std::size_t>> targets;
    for (std::size_t i : batch.indices) targets.push_back(train_targets_[i]);
    return ctc_loss_batch(output, targets);
  }
  const std::size_t d = train_phoc_.front().size();
  std::vector<double> targets;
  targets.reserve(batch.indices.size() * d);
  for (std::size_t i : batch.indices) {
    targets.insert(targets.end(), train_phoc_[i].begin(), train_phoc_[i].end());
  }
  return sigmoid_bce(output, Tensor({batch.indices.size(), d}, std::move(targets)));
}

double Trainer::loss(const Batch& batch, std::span<const std::size_t> subset) const {
  ConvPrecisionScope precision(cfg_.float32_conv ? ConvPrecision::kFloat32 : ConvPrecision::kFloat64);
  NoGradScope no_grad;
  return task_loss(forward(batch, subset), batch).item();
}

double Trainer::task_step(const Batch& batch, std::span<const std::size_t> subset) {
  ConvPrecisionScope precision(cfg_.float32_conv ? ConvPrecision::kFloat32 : ConvPrecision::kFloat64);
  ParamList task = task_parameters();
  ParamList adv = adversary_parameters();
  set_requires_grad(task, true);
  set_requires_grad(adv, false);
  Tape tape;
  double value = 0.0;
  {
    TapeScope scope(tape);
    const Tensor l = task_loss(forward(batch, subset), batch);
    value = l.item();
    if (!std::isfinite(value)) {
      set_requires_grad(adv, true);
      throw NumericError("task loss is not finite at iteration " + std::to_string(batch.iter));
    }
    tape.backward(l);
  }
  adam_step(task, task_adam_, Direction::kDescent);
  set_requires_grad(adv, true);
  return value;
}

double Trainer::adversary_step(const Batch& batch, std::span<const std::size_t> subset) {
  if (!adversary_) throw ContractError("adversary_step: this mode has no adversary");
  ConvPrecisionScope precision(cfg_.float32_conv ? ConvPrecision::kFloat32 : ConvPrecision::kFloat64);
  ParamList task = task_parameters();
  ParamList adv = adversary_parameters();
  set_requires_grad(task, false);
  set_requires_grad(adv, true);
  Tape tape;
  double value = 0.0;
  {
    TapeScope scope(tape);
    const Tensor l = task_loss(forward(batch, subset), batch);
    value = l.item();
    if (!std::isfinite(value)) {
      set_requires_grad(task, true);
      throw NumericError("task loss is not finite at iteration " + std::to_string(batch.iter));
    }
    tape.backward(l);
  }
  if (subset.empty()) zero_grads(adv);
  adam_step(adv, adv_adam_, Direction::kAscent);
  set_requires_grad(task, true);
  return value;
}

std::uint64_t Trainer::phase_start(Phase phase) const {
  const TrainSchedule& s = cfg_.schedule;
  switch (phase) {
    case Phase::kPretrain:
      return 0;
    case Phase::kWarmup:
      return s.pretrain_iters;
    case Phase::kJoint:
      return s.pretrain_iters + s.warmup_iters;
  }
  return 0;
}

std::uint64_t Trainer::end_iteration() const {
  return phase_start(Phase::kJoint) + cfg_.schedule.joint_iters;
}

Phase Trainer::phase_of(std::uint64_t iter) const {
  if (iter < phase_start(Phase::kWarmup)) return Phase::kPretrain;
  if (iter < phase_start(Phase::kJoint)) return Phase::kWarmup;
  return Phase::kJoint;
}

void Trainer::skip_idle_phases() {
  if (!adversary_ && phase_of(iteration_) == Phase::kWarmup) iteration_ = phase_start(Phase::kJoint);
}

std::size_t Trainer::alternation_period() const {
  if (cfg_.schedule.alternation == Alternation::kIteration) return 1;
  const std::size_t b = std::min(cfg_.schedule.batch_size, train_.size());
  return (train_.size() + b - 1) / b;
}

double Trainer::step() {
  if (done()) throw ContractError("step: schedule already complete");
  const std::uint64_t iter = iteration_;
  const Batch batch = sample_batch(iter);
  double value = 0.0;
  switch (phase_of(iter)) {
    case Phase::kPretrain:
      value = task_step(batch);
      break;
    case Phase::kWarmup:
      value = adversary_step(batch, deform_subset(iter, batch.indices.size()));
      break;
    case Phase::kJoint: {
      if (cfg_.mode == TrainerMode::kNone) {
        value = task_step(batch);
        break;
      }
      const auto subset = deform_subset(iter, batch.indices.size());
      const std::uint64_t j = iter - phase_start(Phase::kJoint);
      if (adversary_ && (j / alternation_period()) % 2 == 1) {
        value = adversary_step(batch, subset);
      } else {
        value = task_step(batch, subset);
      }
      break;
    }
  }
  ++iteration_;
  skip_idle_phases();
  return value;
}

EvalResult evaluate_network(const TaskNet& net, const TrainConfig& cfg, const std::vector<Tensor>& inputs,
                            const std::vector<Transcription>& labels, const EvalOptions& options) {
  if (inputs.empty()) throw DataError("evaluate: empty dataset");
  if (inputs.size() != labels.size()) throw ContractError("evaluate: inputs and labels differ in length");
  const Alphabet alphabet(utf8_decode(cfg.alphabet));
  PhocLayout layout;
  layout.levels = cfg.phoc_levels;
  ConvPrecisionScope precision(cfg.float32_conv ? ConvPrecision::kFloat32 : ConvPrecision::kFloat64);
  NoGradScope no_grad;
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return inputs[a].dim(2) < inputs[b].dim(2); });
  const std::size_t bs = cfg.schedule.batch_size;
  const std::size_t floor_width =
      cfg.task == Task::kRecognition ? 8 : 4 * *std::max_element(cfg.spp_levels.begin(), cfg.spp_levels.end());
  std::vector<Transcription> predictions(inputs.size());
  std::vector<std::vector<double>> embeddings(inputs.size());
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t stop = std::min(order.size(), start + bs);
    std::vector<Tensor> parts;
    for (std::size_t k = start; k < stop; ++k) parts.push_back(inputs[order[k]]);
    const Tensor images = afdm::make_batch(std::span<const Tensor>(parts), floor_width);
    if (cfg.task == Task::kRecognition) {
      const Tensor out = net.forward(images);
      if (options.lexicon != nullptr && !options.lexicon->empty()) {
        for (std::size_t k = start; k < stop; ++k) {
          const std::size_t row = k - start;
          predictions[order[k]] =
              ctc_lexicon_decode(index_select(out, std::vector<std::size_t>{row}).reshaped(
                                     {out.dim(1), out.dim(2)}),
                                 alphabet, *options.lexicon);
        }
      } else {
        const auto decoded = ctc_greedy_decode_batch(out);
        for (std::size_t k = start; k < stop; ++k) {
          predictions[order[k]] = alphabet.ctc_decode(decoded[k - start]);
        }
      }
    } else {
      const auto vectors = qbe_query(images, dynamic_cast<const PhocNet&>(net));
      for (std::size_t k = start; k < stop; ++k) embeddings[order[k]] = vectors[k - start];
    }
  }
  EvalResult result;
  const std::string& p = options.prefix;
  if (cfg.task == Task::kRecognition) {
    const ErrorRates rates = wer_cer(predictions, labels);
    result.primary = p + "wer";
    result.metrics = {{p + "wer", rates.wer}, {p + "cer", rates.cer}};
    if (options.predictions != nullptr) *options.predictions = std::move(predictions);
    return result;
  }
  const double qbe = map_retrieval(embeddings, labels, embeddings, labels, RetrievalMode::kQbE);
  std::vector<Transcription> words;
  std::set<Transcription> unique;
  for (const auto& l : labels) {
    if (unique.insert(fold_case(l)).second) words.push_back(fold_case(l));
  }
  std::vector<std::vector<double>> queries;
  for (const auto& w : words) queries.push_back(qbs_query(w, alphabet, layout));
  const double qbs = map_retrieval(queries, words, embeddings, labels, RetrievalMode::kQbS);
  result.primary = p + "map_qbe";
  result.metrics = {{p + "map_qbe", qbe}, {p + "map_qbs", qbs}};
  return result;
}

std::vector<double> recognition_confidences(const TaskNet& net, const TrainConfig& cfg,
                                            const std::vector<Tensor>& inputs) {
  if (cfg.task != Task::kRecognition) throw ConfigError("confidence scores need a recognition network");
  ConvPrecisionScope precision(cfg.float32_conv ? ConvPrecision::kFloat32 : ConvPrecision::kFloat64);
  NoGradScope no_grad;
  std::vector<double> scores;
  scores.reserve(inputs.size());
  for (const Tensor& x : inputs) {
    const Tensor images = afdm::make_batch(std::span<const Tensor>(&x, 1), 8);
    const Tensor out = net.forward(images);
    scores.push_back(frame_confidence(out.reshaped({out.dim(1), out.dim(2)})));
  }
  return scores;
}

EvalResult Trainer::evaluate_inputs(const std::vector<Tensor>& inputs,
                                    const std::vector<Transcription>& labels) const {
  return evaluate_network(*net_, cfg_, inputs, labels);
}

EvalResult Trainer::evaluate(const std::vector<WordSample>& data) const {
  std::vector<Tensor> inputs;
  std::vector<Transcription> labels;
  for (const auto& s : data) {
    inputs.push_back(preprocess(s.image));
    labels.push_back(s.transcription);
  }
  return evaluate_inputs(inputs, labels);
}

EvalResult Trainer::evaluate_validation() const {
  std::vector<Transcription> labels;
  for (const auto& s : val_) labels.push_back(s.transcription);
  return evaluate_inputs(val_inputs_, labels);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["config"] = format_train_config(cfg_);
  ckpt.meta["iteration"] = std::to_string(iteration_);
  ckpt.meta["mode"] = mode_name(cfg_.mode);
  const ParamList task = task_parameters();
  add_tensors(ckpt, task, "task.");
  add_adam_state(ckpt, "optim.task.", task, task_adam_);
  if (adversary_) {
    const ParamList adv = adversary_parameters();
    add_tensors(ckpt, adv, "adv.");
    add_adam_state(ckpt, "optim.adv.", adv, adv_adam_);
  }
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  const auto it = ckpt.meta.find("iteration");
  if (it == ckpt.meta.end()) throw DataError("checkpoint lacks the iteration counter");
  const std::uint64_t iteration = std::stoull(it->second);
  if (iteration > end_iteration()) throw DataError("checkpoint is past the end of this schedule");
  ParamList task = task_parameters();
  load_tensors(ckpt, task, "task.");
  load_adam_state(ckpt, "optim.task.", task, task_adam_);
  if (adversary_) {
    ParamList adv = adversary_parameters();
    if (ckpt.has_prefix("adv.")) {
      load_tensors(ckpt, adv, "adv.");
      load_adam_state(ckpt, "optim.adv.", adv, adv_adam_);
    } else if (iteration > phase_start(Phase::kWarmup)) {
      throw DataError("checkpoint lacks adversary parameters past pretraining");
    }
  }
  iteration_ = iteration;
  skip_idle_phases();
}

void Trainer::run(const std::filesystem::path& out_dir, std::ostream* progress) {
  std::filesystem::create_directories(out_dir);
  const auto metrics_path = out_dir / "metrics.csv";
  const auto eval_path = out_dir / "eval.csv";
  const bool fresh = iteration_ == 0;
  std::ofstream metrics(metrics_path, fresh ? std::ios::trunc : std::ios::app);
  std::ofstream evals(eval_path, fresh ? std::ios::trunc : std::ios::app);
  if (!metrics || !evals) throw DataError("cannot write logs in " + out_dir.string());
  if (fresh) {
    metrics << "iter,phase,loss,metric_name,metric_value\n";
    evals << "iter,phase,metric_name,metric_value\n";
  }
  const std::size_t eval_every = cfg_.schedule.eval_every;
  while (!done()) {
    const std::uint64_t iter = iteration_;
    const Phase phase = phase_of(iter);
    const std::uint64_t start = phase_start(phase);
    const std::uint64_t stop = phase == Phase::kPretrain ? phase_start(Phase::kWarmup)
                               : phase == Phase::kWarmup ? phase_start(Phase::kJoint)
                                                         : end_iteration();
    const double value = step();
    const std::uint64_t index = iter - start + 1;
    const bool eval_now =
        !val_.empty() && eval_every > 0 && (index % eval_every == 0 || iter + 1 == stop);
    if (eval_now) {
      const EvalResult r = evaluate_validation();
      metrics << iter << ',' << phase_name(phase) << ',' << format_double(value) << ','
              << r.primary << ',' << format_double(r.value(r.primary)) << '\n';
      for (const auto& [name, v] : r.metrics) {
        evals << iter << ',' << phase_name(phase) << ',' << name << ',' << format_double(v) << '\n';
      }
      if (progress) {
        *progress << "iter " << iter << " [" << phase_name(phase) << "] loss "
                  << format_double(value) << ' ' << r.primary << ' '
                  << format_double(r.value(r.primary)) << std::endl;
      }
    } else if ((iter + 1) % cfg_.log_every == 0) {
      metrics << iter << ',' << phase_name(phase) << ',' << format_double(value) << ",,\n";
    }
    if (cfg_.checkpoint_every > 0 && (iter + 1) % cfg_.checkpoint_every == 0) {
      metrics.flush();
      evals.flush();
      save_checkpoint(out_dir / ("ckpt_" + std::to_string(iter + 1) + ".ckpt"), checkpoint());
    }
  }
  metrics.flush();
  evals.flush();
  save_checkpoint(out_dir / "final.ckpt", checkpoint());
}

void train(const TrainConfig& cfg, std::ostream* progress) {
  if (cfg.train_manifest.empty()) throw ConfigError("config: train_manifest is required");
  if (cfg.out_dir.empty()) throw ConfigError("config: out_dir is required");
  const Alphabet alphabet(utf8_decode(cfg.alphabet));
  auto train_set = load_dataset(read_manifest(cfg.train_manifest), &alphabet);
  std::vector<WordSample> val_set;
  if (!cfg.val_manifest.empty()) val_set = load_dataset(read_manifest(cfg.val_manifest), &alphabet);
  Trainer trainer(cfg, std::move(train_set), std::move(val_set));
  if (!cfg.resume.empty()) trainer.restore(read_checkpoint(cfg.resume));
  trainer.run(cfg.out_dir, progress);
}

std::vector<SweepResult> insertion_sweep(const TrainConfig& base,
                                         const std::vector<std::string>& layers,
                                         const std::vector<WordSample>& train,
                                         const std::vector<WordSample>& val) {
  std::vector<SweepResult> results;
  for (const auto& layer : layers) {
    TrainConfig cfg = base;
    cfg.insertion_layer = layer;
    Trainer trainer(cfg, train, val);
    SweepResult r;
    r.layer = layer;
    try {
      while (!trainer.done()) {
        const double v = trainer.step();
        r.losses.push_back(v);
      }
    } catch (const NumericError&) {
      r.finite = false;
    }
    r.finite = r.finite && std::all_of(r.losses.begin(), r.losses.end(),
                                       [](double v) { return std::isfinite(v); });
    if (r.finite && !val.empty()) r.final_eval = trainer.evaluate_validation();
    results.push_back(std::move(r));
  }
  return results;
}

std::unique_ptr<TaskNet> load_task_network(const Checkpoint& ckpt, TrainConfig* cfg_out) {
  const auto it = ckpt.meta.find("config");
  if (it == ckpt.meta.end()) throw DataError("checkpoint lacks its config echo");
  const TrainConfig cfg = parse_train_config(it->second);
  const Alphabet alphabet(utf8_decode(cfg.alphabet));
  PhocLayout layout;
  layout.levels = cfg.phoc_levels;
  auto net = build_network(cfg, alphabet, layout);
  ParamList params = net->parameters();
  load_tensors(ckpt, params, "task.");
  if (cfg_out != nullptr) *cfg_out = cfg;
  return net;
}

}  // namespace afdm
