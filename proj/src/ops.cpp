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

#include "afdm/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "afdm/error.hpp"

namespace afdm {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat as_mat(std::span<const double> v, std::size_t rows,
                   std::size_t cols) {
  return ConstMapMat(v.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

MapMat as_mat(std::span<double> v, std::size_t rows, std::size_t cols) {
  return MapMat(v.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t p = 1;
  for (std::size_t i = from; i < to; ++i) p *= s[i];
  return p;
}

// Per-element offsets of both operands into a broadcast output.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_off;
  std::vector<std::size_t> b_off;
  bool same = false;

  std::size_t a(std::size_t k) const { return same ? k : a_off[k]; }
  std::size_t b(std::size_t k) const { return same ? k : b_off[k]; }
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.end() - static_cast<long>(a.size()));
  std::copy(b.begin(), b.end(), pb.end() - static_cast<long>(b.size()));
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " +
                           shape_str(a) + " with " + shape_str(b));
    }
    plan.out[i] = std::max(pa[i], pb[i]);
  }
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : acc_a;
    sb[i] = pb[i] == 1 ? 0 : acc_b;
    acc_a *= pa[i];
    acc_b *= pb[i];
  }
  const std::size_t n = shape_numel(plan.out);
  plan.a_off.resize(n);
  plan.b_off.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    plan.a_off[k] = oa;
    plan.b_off[k] = ob;
    for (std::size_t i = rank; i-- > 0;) {
      ++idx[i];
      oa += sa[i];
      ob += sb[i];
      if (idx[i] < plan.out[i]) break;
      oa -= sa[i] * idx[i];
      ob -= sb[i] * idx[i];
      idx[i] = 0;
    }
  }
  return plan;
}

// `da`/`db` return the partial derivative of f wrt each operand.
template <class Fwd, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd f, DA da,
              DB db) {
  auto plan =
      std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), name));
  const std::size_t n = shape_numel(plan->out);
  std::vector<double> out(n);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = f(av[plan->a(k)], bv[plan->b(k)]);
  }
  return make_result(
      plan->out, std::move(out), {a, b},
      [a, b, plan, da, db](const Tensor& o) mutable {
        auto g = o.grad_view();
        auto av = a.data();
        auto bv = b.data();
        if (a.requires_grad()) {
          auto ga = a.mutable_grad();
          for (std::size_t k = 0; k < g.size(); ++k) {
            ga[plan->a(k)] += g[k] * da(av[plan->a(k)], bv[plan->b(k)]);
          }
        }
        if (b.requires_grad()) {
          auto gb = b.mutable_grad();
          for (std::size_t k = 0; k < g.size(); ++k) {
            gb[plan->b(k)] += g[k] * db(av[plan->a(k)], bv[plan->b(k)]);
          }
        }
      });
}

// `dydx(x, y)` receives the input and output value of each element.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd f, Deriv dydx) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t k = 0; k < xv.size(); ++k) out[k] = f(xv[k]);
  return make_result(x.shape(), std::move(out), {x},
                     [x, dydx](const Tensor& o) mutable {
                       auto g = o.grad_view();
                       auto xv = x.data();
                       auto yv = o.data();
                       auto gx = x.mutable_grad();
                       for (std::size_t k = 0; k < g.size(); ++k) {
                         gx[k] += g[k] * dydx(xv[k], yv[k]);
                       }
                     });
}

// Moves rows of a gathered layout back and forth. `map[k]` is the source
// offset of output element k.
Tensor gather(const Tensor& x, Shape shape,
              std::shared_ptr<std::vector<std::size_t>> map) {
  auto xv = x.data();
  std::vector<double> out(map->size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = xv[(*map)[k]];
  return make_result(std::move(shape), std::move(out), {x},
                     [x, map](const Tensor& o) mutable {
                       auto g = o.grad_view();
                       auto gx = x.mutable_grad();
                       for (std::size_t k = 0; k < g.size(); ++k) {
                         gx[(*map)[k]] += g[k];
                       }
                     });
}

// In-place LU with partial pivoting of an n x n row-major matrix.
std::vector<std::size_t> lu_factor(std::vector<double>& m, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(m[k * n + k]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double v = std::abs(m[r * n + k]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best < 1e-12) {
      throw SingularMatrixError("solve_linear: pivot below 1e-12 at column " +
                                std::to_string(k));
    }
    if (piv != k) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(m[k * n + c], m[piv * n + c]);
      }
      std::swap(perm[k], perm[piv]);
    }
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = m[r * n + k] / m[k * n + k];
      m[r * n + k] = f;
      for (std::size_t c = k + 1; c < n; ++c) m[r * n + c] -= f * m[k * n + c];
    }
  }
  return perm;
}

std::vector<double> lu_solve(const std::vector<double>& lu,
                             const std::vector<std::size_t>& perm,
                             std::size_t n, std::span<const double> rhs,
                             std::size_t m) {
  std::vector<double> x(n * m);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) x[r * m + c] = rhs[perm[r] * m + c];
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < r; ++k) {
      const double f = lu[r * n + k];
      for (std::size_t c = 0; c < m; ++c) x[r * m + c] -= f * x[k * m + c];
    }
  }
  for (std::size_t r = n; r-- > 0;) {
    for (std::size_t k = r + 1; k < n; ++k) {
      const double f = lu[r * n + k];
      for (std::size_t c = 0; c < m; ++c) x[r * m + c] -= f * x[k * m + c];
    }
    const double d = lu[r * n + r];
    for (std::size_t c = 0; c < m; ++c) x[r * m + c] /= d;
  }
  return x;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " +
                         shape_str(a.shape()) + " . " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  as_mat(std::span<double>(out), m, n).noalias() =
      as_mat(a.data(), m, k) * as_mat(b.data(), k, n);
  return make_result(
      {m, n}, std::move(out), {a, b}, [a, b, m, k, n](const Tensor& o) mutable {
        auto g = as_mat(o.grad_view(), m, n);
        if (a.requires_grad()) {
          as_mat(a.mutable_grad(), m, k).noalias() +=
              g * as_mat(b.data(), k, n).transpose();
        }
        if (b.requires_grad()) {
          as_mat(b.mutable_grad(), k, n).noalias() +=
              as_mat(a.data(), m, k).transpose() * g;
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor neg(const Tensor& x) {
  return unary(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive argument");
  }
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      x, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({}, {s}, {x}, [x](const Tensor& o) mutable {
    const double g = o.grad_view()[0];
    for (double& v : x.mutable_grad()) v += g;
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " +
                         shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x},
                     [x](const Tensor& o) mutable {
                       accumulate_grad(x, o.grad_view());
                     });
}

Tensor permute(const Tensor& x, std::span<const std::size_t> axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) {
    throw DimensionError("permute: axes do not match rank of " +
                         shape_str(x.shape()));
  }
  std::vector<bool> seen(rank, false);
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) throw DimensionError("permute: invalid axes");
    seen[a] = true;
  }
  const Shape& in = x.shape();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out(rank);
  std::vector<std::size_t> stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out[i] = in[axes[i]];
    stride[i] = in_stride[axes[i]];
  }
  auto map = std::make_shared<std::vector<std::size_t>>(x.numel());
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < map->size(); ++k) {
    (*map)[k] = off;
    for (std::size_t i = rank; i-- > 0;) {
      ++idx[i];
      off += stride[i];
      if (idx[i] < out[i]) break;
      off -= stride[i] * idx[i];
      idx[i] = 0;
    }
  }
  return gather(x, std::move(out), std::move(map));
}

Tensor permute(const Tensor& x, std::initializer_list<std::size_t> axes) {
  return permute(x, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t from,
             std::size_t to) {
  if (axis >= x.rank()) throw DimensionError("slice: axis out of range");
  if (!(from < to && to <= x.dim(axis))) {
    throw DimensionError("slice: range [" + std::to_string(from) + ", " +
                         std::to_string(to) + ") invalid for " +
                         shape_str(x.shape()));
  }
  const Shape& in = x.shape();
  const std::size_t outer = prod(in, 0, axis);
  const std::size_t inner = prod(in, axis + 1, in.size());
  const std::size_t len = to - from;
  Shape out = in;
  out[axis] = len;
  std::vector<double> values(outer * len * inner);
  auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + static_cast<long>((o * in[axis] + from) * inner),
                len * inner, values.begin() + static_cast<long>(o * len * inner));
  }
  const std::size_t full = in[axis];
  return make_result(std::move(out), std::move(values), {x},
                     [x, outer, inner, len, from, full](const Tensor& o) mutable {
                       auto g = o.grad_view();
                       auto gx = x.mutable_grad();
                       for (std::size_t b = 0; b < outer; ++b) {
                         const std::size_t src = b * len * inner;
                         const std::size_t dst = (b * full + from) * inner;
                         for (std::size_t i = 0; i < len * inner; ++i) {
                           gx[dst + i] += g[src + i];
                         }
                       }
                     });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range");
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: " + shape_str(s) + " incompatible with " +
                           shape_str(first) + " along axis " +
                           std::to_string(axis));
    }
    total += s[axis];
  }
  const std::size_t outer = prod(first, 0, axis);
  const std::size_t inner = prod(first, axis + 1, first.size());
  Shape out = first;
  out[axis] = total;
  std::vector<double> values(outer * total * inner);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + static_cast<long>(o * len * inner), len * inner,
                  values.begin() +
                      static_cast<long>((o * total + offset) * inner));
    }
    offset += len;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(
      std::move(out), std::move(values), inputs,
      [inputs, axis, outer, inner, total](const Tensor& o) mutable {
        auto g = o.grad_view();
        std::size_t offset = 0;
        for (auto& p : inputs) {
          const std::size_t len = p.dim(axis);
          if (p.requires_grad()) {
            auto gp = p.mutable_grad();
            for (std::size_t b = 0; b < outer; ++b) {
              const std::size_t src = (b * total + offset) * inner;
              const std::size_t dst = b * len * inner;
              for (std::size_t i = 0; i < len * inner; ++i) {
                gp[dst + i] += g[src + i];
              }
            }
          }
          offset += len;
        }
      });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor index_select(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() == 0) throw DimensionError("index_select: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t row = x.numel() / std::max<std::size_t>(rows, 1);
  auto map = std::make_shared<std::vector<std::size_t>>(indices.size() * row);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw DimensionError("index_select: index " + std::to_string(indices[i]) +
                           " out of range for " + shape_str(x.shape()));
    }
    for (std::size_t j = 0; j < row; ++j) {
      (*map)[i * row + j] = indices[i] * row + j;
    }
  }
  Shape out = x.shape();
  out[0] = indices.size();
  return gather(x, std::move(out), std::move(map));
}

Tensor slice_channels(const Tensor& x, std::size_t from, std::size_t to) {
  require_rank(x, 4, "slice_channels");
  return slice(x, 1, from, to);
}

Tensor concat_channels(std::span<const Tensor> parts) {
  for (const auto& p : parts) require_rank(p, 4, "concat_channels");
  return concat(parts, 1);
}

namespace {

thread_local ConvPrecision g_conv_precision = ConvPrecision::kFloat64;

template <typename S>
using SMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
Eigen::Map<const SMat<S>> smat(const S* p, std::size_t rows, std::size_t cols) {
  return Eigen::Map<const SMat<S>>(p, static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(cols));
}

template <typename S>
Eigen::Map<SMat<S>> smat(S* p, std::size_t rows, std::size_t cols) {
  return Eigen::Map<SMat<S>>(p, static_cast<Eigen::Index>(rows),
                             static_cast<Eigen::Index>(cols));
}

struct ConvGeometry {
  std::size_t B, C, H, W, O, kh, kw, Ho, Wo, K, N, stride, pad;
};

// Output columns [lo, hi) of a kernel tap read inside the input row.
struct TapRange {
  std::size_t lo, hi;
};

TapRange tap_range(const ConvGeometry& g, std::size_t j) {
  const long pad = static_cast<long>(g.pad), s = static_cast<long>(g.stride);
  const long first = static_cast<long>(j) - pad;  // iw at ow = 0
  long lo = first >= 0 ? 0 : (-first + s - 1) / s;
  long hi = (static_cast<long>(g.W) - 1 - first) >= 0
                ? (static_cast<long>(g.W) - 1 - first) / s + 1
                : 0;
  hi = std::min(hi, static_cast<long>(g.Wo));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

template <typename S>
void im2col(const ConvGeometry& g, const double* x, S* col) {
  for (std::size_t c = 0; c < g.C; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const TapRange r = tap_range(g, j);
        S* row = col + ((c * g.kh + i) * g.kw + j) * g.N;
        for (std::size_t bb = 0; bb < g.B; ++bb) {
          const double* plane = x + (bb * g.C + c) * g.H * g.W;
          for (std::size_t oh = 0; oh < g.Ho; ++oh) {
            S* dst = row + (bb * g.Ho + oh) * g.Wo;
            const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad);
            if (ih < 0 || ih >= static_cast<long>(g.H)) {
              std::fill(dst, dst + g.Wo, S(0));
              continue;
            }
            const double* src = plane + static_cast<std::size_t>(ih) * g.W + j - g.pad;
            std::fill(dst, dst + r.lo, S(0));
            if (g.stride == 1) {
              for (std::size_t ow = r.lo; ow < r.hi; ++ow) dst[ow] = static_cast<S>(src[ow]);
            } else {
              for (std::size_t ow = r.lo; ow < r.hi; ++ow) {
                dst[ow] = static_cast<S>(src[ow * g.stride]);
              }
            }
            std::fill(dst + r.hi, dst + g.Wo, S(0));
          }
        }
      }
    }
  }
}

template <typename S>
void col2im(const ConvGeometry& g, const S* col, double* x) {
  for (std::size_t c = 0; c < g.C; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const TapRange r = tap_range(g, j);
        const S* row = col + ((c * g.kh + i) * g.kw + j) * g.N;
        for (std::size_t bb = 0; bb < g.B; ++bb) {
          double* plane = x + (bb * g.C + c) * g.H * g.W;
          for (std::size_t oh = 0; oh < g.Ho; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad);
            if (ih < 0 || ih >= static_cast<long>(g.H)) continue;
            const S* src = row + (bb * g.Ho + oh) * g.Wo;
            double* dst = plane + static_cast<std::size_t>(ih) * g.W + j - g.pad;
            for (std::size_t ow = r.lo; ow < r.hi; ++ow) {
              dst[ow * g.stride] += static_cast<double>(src[ow]);
            }
          }
        }
      }
    }
  }
}

template <typename S>
Tensor conv2d_impl(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeometry& geo) {
  const auto [B, C, H, W, O, kh, kw, Ho, Wo, K, N, stride, pad] = geo;
  std::shared_ptr<S[]> col(new S[K * N]);
  im2col(geo, x.data().data(), col.get());
  auto wv = w.data();
  std::vector<S> ws(wv.begin(), wv.end());
  std::vector<S> prod(O * N);
  smat(prod.data(), O, N).noalias() = smat(ws.data(), O, K) * smat(col.get(), K, N);
  std::vector<double> out(B * O * Ho * Wo);
  auto bv = b.data();
  const std::size_t plane = Ho * Wo;
  for (std::size_t bb = 0; bb < B; ++bb) {
    for (std::size_t o = 0; o < O; ++o) {
      const S* src = prod.data() + o * N + bb * plane;
      double* dst = out.data() + (bb * O + o) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<double>(src[p]) + bv[o];
    }
  }
  return make_result({B, O, Ho, Wo}, std::move(out), {x, w, b}, [x, w, b, col, geo](const Tensor& o) {
    const auto [B, C, H, W, O, kh, kw, Ho, Wo, K, N, stride, pad] = geo;
    auto g = o.grad_view();
    const std::size_t plane = Ho * Wo;
    std::vector<S> gm(O * N);
    for (std::size_t bb = 0; bb < B; ++bb) {
      for (std::size_t oc = 0; oc < O; ++oc) {
        const double* src = g.data() + (bb * O + oc) * plane;
        S* dst = gm.data() + oc * N + bb * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<S>(src[p]);
      }
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t bb = 0; bb < B; ++bb) {
        for (std::size_t oc = 0; oc < O; ++oc) {
          const double* src = g.data() + (bb * O + oc) * plane;
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += src[p];
          gb[oc] += s;
        }
      }
    }
    if (w.requires_grad()) {
      SMat<S> dw = smat(gm.data(), O, N) * smat(col.get(), K, N).transpose();
      auto gw = w.mutable_grad();
      for (std::size_t i = 0; i < O * K; ++i) gw[i] += static_cast<double>(dw.data()[i]);
    }
    if (x.requires_grad()) {
      auto wv = w.data();
      std::vector<S> ws(wv.begin(), wv.end());
      std::vector<S> dcol(K * N);
      smat(dcol.data(), K, N).noalias() = smat(ws.data(), O, K).transpose() * smat(gm.data(), O, N);
      col2im(geo, dcol.data(), x.mutable_grad().data());
    }
  });
}

}  // namespace

void set_conv_precision(ConvPrecision precision) { g_conv_precision = precision; }

ConvPrecision conv_precision() { return g_conv_precision; }

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride, std::size_t pad) {
  require_rank(x, 4, "conv2d");
  require_rank(w, 4, "conv2d");
  require_rank(b, 1, "conv2d");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C || b.dim(0) != O) {
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) +
                         " / bias " + shape_str(b.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  if (stride == 0) throw DimensionError("conv2d: zero stride");
  if (kh > H + 2 * pad || kw > W + 2 * pad) {
    throw DimensionError("conv2d: kernel " + shape_str(w.shape()) +
                         " larger than padded input " + shape_str(x.shape()));
  }
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
  const ConvGeometry geo{B, C, H, W, O, kh, kw, Ho, Wo, C * kh * kw, B * Ho * Wo, stride, pad};
  if (g_conv_precision == ConvPrecision::kFloat32) return conv2d_impl<float>(x, w, b, geo);
  return conv2d_impl<double>(x, w, b, geo);
}

Tensor maxpool2d(const Tensor& x, Window window, Window stride) {
  require_rank(x, 4, "maxpool2d");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (window.h == 0 || window.w == 0 || stride.h == 0 || stride.w == 0) {
    throw DimensionError("maxpool2d: zero window or stride");
  }
  if (window.h > H || window.w > W) {
    throw DimensionError("maxpool2d: window " + std::to_string(window.h) + "x" +
                         std::to_string(window.w) + " exceeds input " +
                         shape_str(x.shape()));
  }
  const std::size_t Ho = (H - window.h) / stride.h + 1;
  const std::size_t Wo = (W - window.w) / stride.w + 1;
  auto arg = std::make_shared<std::vector<std::size_t>>(B * C * Ho * Wo);
  std::vector<double> out(arg->size());
  auto xv = x.data();
  std::size_t k = 0;
  for (std::size_t p = 0; p < B * C; ++p) {
    const std::size_t base = p * H * W;
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow, ++k) {
        std::size_t best = base + oh * stride.h * W + ow * stride.w;
        for (std::size_t i = 0; i < window.h; ++i) {
          for (std::size_t j = 0; j < window.w; ++j) {
            const std::size_t at = base + (oh * stride.h + i) * W + ow * stride.w + j;
            if (xv[at] > xv[best]) best = at;
          }
        }
        (*arg)[k] = best;
        out[k] = xv[best];
      }
    }
  }
  return gather(x, {B, C, Ho, Wo}, std::move(arg));
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t B = x.dim(0), C = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  std::vector<double> out(B * C, 0.0);
  auto xv = x.data();
  for (std::size_t p = 0; p < B * C; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += xv[p * plane + i];
    out[p] = s / static_cast<double>(plane);
  }
  return make_result({B, C}, std::move(out), {x},
                     [x, plane](const Tensor& o) mutable {
                       auto g = o.grad_view();
                       auto gx = x.mutable_grad();
                       const double inv = 1.0 / static_cast<double>(plane);
                       for (std::size_t p = 0; p < g.size(); ++p) {
                         for (std::size_t i = 0; i < plane; ++i) {
                           gx[p * plane + i] += g[p] * inv;
                         }
                       }
                     });
}

Tensor log_softmax(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("log_softmax: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(in[i] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = in[i] - lse;
  }
  return make_result(x.shape(), std::move(out), {x},
                     [x, n, rows](const Tensor& o) mutable {
                       auto g = o.grad_view();
                       auto y = o.data();
                       auto gx = x.mutable_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         double gs = 0.0;
                         for (std::size_t i = 0; i < n; ++i) gs += g[r * n + i];
                         for (std::size_t i = 0; i < n; ++i) {
                           gx[r * n + i] += g[r * n + i] - std::exp(y[r * n + i]) * gs;
                         }
                       }
                     });
}

Tensor solve_linear(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "solve_linear");
  require_rank(b, 2, "solve_linear");
  const std::size_t n = a.dim(0);
  if (a.dim(1) != n) {
    throw DimensionError("solve_linear: matrix " + shape_str(a.shape()) +
                         " is not square");
  }
  if (b.dim(0) != n) {
    throw DimensionError("solve_linear: right-hand side " +
                         shape_str(b.shape()) + " does not match " +
                         shape_str(a.shape()));
  }
  const std::size_t m = b.dim(1);
  std::vector<double> lu(a.data().begin(), a.data().end());
  auto perm = lu_factor(lu, n);
  auto x = lu_solve(lu, perm, n, b.data(), m);
  return make_result(
      {n, m}, std::move(x), {a, b}, [a, b, n, m](const Tensor& o) mutable {
        // A^T G = dX; dB = G, dA = -G X^T.
        std::vector<double> at(n * n);
        auto av = a.data();
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < n; ++c) at[c * n + r] = av[r * n + c];
        }
        auto perm = lu_factor(at, n);
        auto g = lu_solve(at, perm, n, o.grad_view(), m);
        if (b.requires_grad()) accumulate_grad(b, g);
        if (a.requires_grad()) {
          as_mat(a.mutable_grad(), n, n).noalias() -=
              as_mat(std::span<const double>(g), n, m) *
              as_mat(o.data(), n, m).transpose();
        }
      });
}

}  // namespace afdm
