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

// Acceptance harness. Each criterion prints exactly one PASS/FAIL line;
// `--criterion N` selects criteria (repeatable), the default runs them all.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "afdm/afdm.hpp"
#include "afdm/augment.hpp"
#include "afdm/checkpoint.hpp"
#include "afdm/labels.hpp"
#include "afdm/losses.hpp"
#include "afdm/metrics.hpp"
#include "afdm/networks.hpp"
#include "afdm/ops.hpp"
#include "afdm/synth.hpp"
#include "afdm/tps.hpp"
#include "afdm/trainer.hpp"
#include "support/ctc_oracle.hpp"
#include "support/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace afdm;
using testing::grad_check;
using testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path work = fs::temp_directory_path() / "afdm_acceptance";
  std::size_t trend_seeds = 3;
  std::size_t trend_train = 2000;
  std::size_t trend_test = 500;
  std::size_t trend_val = 200;
  std::size_t trend_divisor = 1;  // shortens the schedule for smoke runs
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

void perturb_output_layer(Afdm& module, double scale, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (auto& p : module.parameters()) {
    if (p.name.find("fc2") == std::string::npos) continue;
    for (double& v : p.tensor.mutable_data()) v += d(g);
  }
}

// Zero-initialised biases put ReLU inputs of dead neighbourhoods exactly on
// the kink; finite differences need a generic point.
void jitter_biases(const ParamList& params, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (const auto& p : params) {
    if (p.name.size() < 4 || p.name.compare(p.name.size() - 4, 4, "bias") != 0) continue;
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) v += d(g);
  }
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------- criterion 1

Outcome tps_interpolation() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    ControlPoints base;
    ControlPoints pred;
    for (int k = 0; k < 9; ++k) {
      base.points.push_back({d(rng), d(rng)});
      pred.points.push_back({d(rng), d(rng)});
    }
    const TpsTransform t = solve_tps(pred, base);
    for (std::size_t k = 0; k < 9; ++k) {
      const auto lifted = lift_point(base.points[k], base);
      double sx = 0.0;
      double sy = 0.0;
      for (std::size_t j = 0; j < lifted.size(); ++j) {
        sx += t.matrix.at({0, j}) * lifted[j];
        sy += t.matrix.at({1, j}) * lifted[j];
      }
      worst = std::max({worst, std::abs(sx - pred.points[k].x), std::abs(sy - pred.points[k].y)});
    }
  }

  const ControlPoints base = base_control_points(9);
  const std::size_t h = 12;
  const std::size_t w = 20;
  const auto lattice = target_lattice(h, w);
  double identity_err = 0.0;
  {
    const auto grid = transform_grid(solve_tps(base, base), h, w).points.data();
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      identity_err = std::max({identity_err, std::abs(grid[2 * i] - lattice[i].x),
                               std::abs(grid[2 * i + 1] - lattice[i].y)});
    }
  }
  double shift_err = 0.0;
  for (const auto [tx, ty] : {std::pair{0.1, 0.0}, std::pair{-0.3, 0.25}, std::pair{0.05, -0.4}}) {
    ControlPoints moved = base;
    for (auto& p : moved.points) p = {p.x + tx, p.y + ty};
    const auto grid = transform_grid(solve_tps(moved, base), h, w).points.data();
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      shift_err = std::max({shift_err, std::abs(grid[2 * i] - lattice[i].x - tx),
                            std::abs(grid[2 * i + 1] - lattice[i].y - ty)});
    }
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = worst <= 1e-9 && identity_err <= 1e-8 && shift_err <= 1e-8 && secs < 1.0;
  o.detail = "max interpolation err " + fmt("%.2e", worst) + ", identity " + fmt("%.2e", identity_err) +
             ", translation " + fmt("%.2e", shift_err) + ", " + fmt("%.3f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------- criterion 2

void all_targets(std::size_t symbols, std::size_t max_len, std::vector<std::vector<std::size_t>>& out) {
  std::vector<std::vector<std::size_t>> frontier{{}};
  out.push_back({});
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : frontier) {
      for (std::size_t s = 1; s <= symbols; ++s) {
        auto t = prefix;
        t.push_back(s);
        next.push_back(t);
        out.push_back(t);
      }
    }
    frontier = std::move(next);
  }
}

Outcome ctc_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::normal_distribution<double> logit(0.0, 2.0);
  double loss_err = 0.0;
  double grad_err = 0.0;
  std::size_t cases = 0;
  std::string worst;
  for (int draw = 0; draw < 200; ++draw) {
    const std::size_t symbols = 1 + draw % 3;
    const std::size_t C = symbols + 1;
    std::vector<std::vector<std::size_t>> targets;
    all_targets(symbols, 3, targets);
    for (std::size_t T = 1; T <= 6; ++T) {
      std::vector<double> values(T * C);
      for (double& v : values) v = logit(rng);
      Tensor logits({T, C}, values, true);
      std::vector<double> lp;
      {
        NoGradScope off;
        const Tensor l = log_softmax(logits);
        lp.assign(l.data().begin(), l.data().end());
      }
      for (const auto& target : targets) {
        if (ctc_min_frames(target) > T) continue;
        ++cases;
        double value = 0.0;
        {
          NoGradScope off;
          value = ctc_loss(log_softmax(logits), target).item();
        }
        const double oracle = testing::brute_force_ctc(lp, T, C, target);
        loss_err = std::max(loss_err, std::abs(value - oracle));
        const auto r = grad_check([&] { return ctc_loss(log_softmax(logits), target); }, {logits}, 1000,
                                  1e-3, 7, 1e-6, true);
        if (r.max_rel_err > grad_err) {
          grad_err = r.max_rel_err;
          worst = r.worst;
        }
      }
    }
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = loss_err <= 1e-10 && grad_err <= 1e-5 && secs < 30.0;
  o.detail = std::to_string(cases) + " (target, T, draw) cases; max loss err " + fmt("%.2e", loss_err) +
             ", max grad rel err " + fmt("%.2e", grad_err) + ", " + fmt("%.1f", secs) + " s";
  if (grad_err > 1e-5) o.detail += " [" + worst + "]";
  return o;
}

// ---------------------------------------------------------------- criterion 3

struct GradCase {
  std::string name;
  std::function<Tensor()> loss;
  std::vector<Tensor> params;
  std::size_t per_tensor = 40;
  double h = 1e-6;
  double floor = 1e-6;
};

Outcome gradient_suite() {
  const auto start = Clock::now();
  ConvPrecisionScope precision(ConvPrecision::kFloat64);
  std::vector<GradCase> cases;
  std::mt19937_64 g(5150);

  auto a = random_tensor({2, 3}, g);
  auto b = random_tensor({3, 2}, g);
  auto c = random_tensor({2, 3}, g);
  auto row = random_tensor({3}, g);
  auto pos = random_tensor({2, 3}, g, 0.5, 2.0);
  auto img = random_tensor({2, 4, 4, 5}, g);
  auto w = random_tensor({3, 4, 3, 3}, g);
  auto bias = random_tensor({3}, g);
  auto sq = random_tensor({3, 3}, g);
  for (std::size_t i = 0; i < 3; ++i) sq.mutable_data()[i * 4] += 3.0;
  auto weights = random_tensor({2, 3, 4, 5}, g, -1, 1, false);
  const std::vector<Tensor> all{a, b, c, row, pos, img, w, bias, sq};
  const std::vector<std::pair<std::string, std::function<Tensor()>>> primitives = {
      {"matmul", [=] { return sum(mul(matmul(a, b), matmul(a, b))); }},
      {"add", [=] { return sum(mul(add(a, row), c)); }},
      {"sub", [=] { return sum(mul(sub(a, row), c)); }},
      {"mul", [=] { return sum(mul(mul(a, row), c)); }},
      {"neg", [=] { return sum(mul(neg(a), c)); }},
      {"exp", [=] { return sum(mul(exp(a), c)); }},
      {"log", [=] { return sum(mul(log(pos), c)); }},
      {"relu", [=] { return sum(mul(relu(a), c)); }},
      {"tanh", [=] { return sum(mul(tanh(a), c)); }},
      {"sigmoid", [=] { return sum(mul(sigmoid(a), c)); }},
      {"scale", [=] { return sum(mul(scale(a, -1.7), c)); }},
      {"add_scalar", [=] { return sum(mul(add_scalar(a, 0.3), a)); }},
      {"mean", [=] { return mean(mul(a, c)); }},
      {"reshape", [=] { return sum(mul(reshape(a, {3, 2}), b)); }},
      {"permute", [=] { return sum(mul(permute(a, {1, 0}), b)); }},
      {"slice_concat", [=] {
         const auto s = slice(img, 1, 1, 3);
         return sum(mul(concat({s, img}, 1), concat({s, img}, 1)));
       }},
      {"index_select", [=] {
         const std::vector<std::size_t> idx{1, 0, 1};
         return sum(mul(index_select(a, idx), index_select(c, idx)));
       }},
      {"channels", [=] {
         const std::vector<Tensor> parts{slice_channels(img, 2, 4), slice_channels(img, 0, 2)};
         const Tensor joined = concat_channels(parts);
         return sum(mul(joined, mul(joined, img)));
       }},
      {"conv2d", [=] { return sum(mul(conv2d(img, w, bias, 1, 1), slice_channels(weights, 0, 3))); }},
      {"maxpool2d", [=] { return sum(mul(maxpool2d(img, {2, 2}, {2, 2}), maxpool2d(img, {2, 2}, {2, 2}))); }},
      {"global_avg_pool", [=] { return sum(mul(global_avg_pool(img), global_avg_pool(img))); }},
      {"log_softmax", [=] { return sum(mul(log_softmax(a), c)); }},
      {"solve_linear", [=] { return sum(mul(solve_linear(sq, b), b)); }},
      {"sigmoid_bce", [=] {
         return sigmoid_bce(a, Tensor({2, 3}, {1, 0, 1, 0, 0, 1}));
       }},
      {"ctc_loss", [=] { return ctc_loss(log_softmax(reshape(img, {8, 20})), {3, 7, 7}); }},
      {"spp_pool", [=] { return sum(mul(spp_pool(img, {1, 2}), spp_pool(img, {1, 2}))); }},
  };
  for (const auto& [name, fn] : primitives) cases.push_back({name, fn, all});

  {
    const ControlPoints base = base_control_points(9);
    Tensor pred = to_tensor(base);
    std::uniform_real_distribution<double> jitter(-0.15, 0.15);
    for (double& v : pred.mutable_data()) v = v * 0.9 + jitter(g);
    pred.set_requires_grad(true);
    auto f = random_tensor({1, 2, 5, 7}, g);
    auto wt = random_tensor({1, 2, 4, 6}, g, -1, 1, false);
    cases.push_back({"tps_grid_sample",
                     [=] { return sum(mul(bilinear_sample(f, transform_grid(solve_tps(pred, base), 4, 6)), wt)); },
                     {pred, f}});
    auto aff = Tensor({2, 6}, {0.9, 0.1, 0.05, -0.1, 1.1, 0.02, 1.05, -0.07, -0.1, 0.03, 0.8, 0.11}, true);
    auto f2 = random_tensor({2, 2, 5, 6}, g);
    auto w2 = random_tensor({2, 2, 3, 4}, g, -1, 1, false);
    cases.push_back({"affine_grid_sample",
                     [=] { return sum(mul(bilinear_sample(f2, affine_grid(aff, 3, 4)), w2)); }, {aff, f2}});
  }
  {
    Rng rng = make_rng(31);
    auto lstm = std::make_shared<Blstm>(3, 4, rng);
    auto seq = random_tensor({2, 5, 3}, g);
    auto wt = random_tensor({2, 5, 8}, g, -1, 1, false);
    ParamList lp;
    lstm->collect(lp, "lstm");
    jitter_biases(lp, 35);
    auto ts = tensors_of(lp);
    ts.push_back(seq);
    cases.push_back({"blstm", [=] { return sum(mul(lstm->forward(seq), wt)); }, ts});
  }
  {
    Rng rng = make_rng(32);
    AfdmConfig ac;
    ac.channels = 8;
    ac.k = 4;
    ac.loc_channels = {4, 4, 8, 8};
    ac.loc_hidden = 8;
    auto module = std::make_shared<Afdm>(ac, rng);
    module->init_identity();
    perturb_output_layer(*module, 0.2, 33);
    jitter_biases(module->parameters(), 34);
    auto f = random_tensor({2, 8, 5, 7}, g);
    auto wt = random_tensor({2, 8, 5, 7}, g, -1, 1, false);
    auto ts = tensors_of(module->parameters());
    ts.push_back(f);
    cases.push_back({"afdm_deform", [=] { return sum(mul(module->deform(f), wt)); }, ts, 40, 1e-5, 1e-5});
  }
  {
    // image -> AFDM(conv4_1) -> CRNN -> CTC. The CRNN input height is fixed at 64.
    Rng rng = make_rng(41);
    CrnnConfig cc;
    cc.width_factor = 0.05;
    cc.alphabet_size = 3;
    auto net = std::make_shared<Crnn>(cc, rng);
    AfdmConfig ac;
    ac.channels = net->conv_channels("conv4_1");
    ac.k = 4;
    ac.loc_channels = {4, 4, 8, 8};
    ac.loc_hidden = 8;
    auto module = std::make_shared<Afdm>(ac, rng);
    module->init_identity();
    perturb_output_layer(*module, 0.2, 42);
    jitter_biases(net->parameters(), 43);
    jitter_biases(module->parameters(), 44);
    auto image = random_tensor({2, 1, 64, 32}, g, 0.0, 1.0);
    auto ts = tensors_of(net->parameters());
    for (const auto& t : tensors_of(module->parameters())) ts.push_back(t);
    ts.push_back(image);
    const std::vector<std::vector<std::size_t>> targets{{1, 2}, {3, 3, 1}};
    cases.push_back({"chain_afdm_crnn_ctc",
                     [=] {
                       return ctc_loss_batch(
                           net->forward(image, [&](const Tensor& x) { return module->deform(x); }), targets);
                     },
                     ts, 12, 1e-5, 1e-5});
  }
  {
    // image -> AFDM(conv4_1) -> PHOCNet -> BCE on 16 x 32 inputs.
    Rng rng = make_rng(51);
    const Alphabet alphabet(U"abc");
    const std::vector<std::size_t> levels{1, 2};
    PhocNetConfig pc;
    pc.width_factor = 0.05;
    pc.phoc_dim = phoc_length(alphabet, PhocLayout{levels});
    pc.spp_levels = {1, 2};
    pc.fc_width = 16;
    auto net = std::make_shared<PhocNet>(pc, rng);
    AfdmConfig ac;
    ac.channels = net->conv_channels("conv4_1");
    ac.k = 4;
    ac.loc_channels = {4, 4, 8, 8};
    ac.loc_hidden = 8;
    auto module = std::make_shared<Afdm>(ac, rng);
    module->init_identity();
    perturb_output_layer(*module, 0.2, 52);
    jitter_biases(net->parameters(), 53);
    jitter_biases(module->parameters(), 54);
    auto image = random_tensor({2, 1, 16, 32}, g, 0.0, 1.0);
    std::vector<double> target_values = phoc_encode(U"ab", alphabet, levels);
    const auto second = phoc_encode(U"cab", alphabet, levels);
    target_values.insert(target_values.end(), second.begin(), second.end());
    const Tensor targets({2, pc.phoc_dim}, target_values);
    auto ts = tensors_of(net->parameters());
    for (const auto& t : tensors_of(module->parameters())) ts.push_back(t);
    ts.push_back(image);
    cases.push_back({"chain_afdm_phocnet_bce",
                     [=] {
                       return sigmoid_bce(
                           net->forward(image, [&](const Tensor& x) { return module->deform(x); }), targets);
                     },
                     ts, 12, 1e-5, 1e-5});
  }

  double worst = 0.0;
  std::string worst_case;
  std::size_t checked = 0;
  std::vector<std::string> failures;
  for (const auto& gc : cases) {
    const auto r = grad_check(gc.loss, gc.params, gc.per_tensor, gc.h, 7, gc.floor);
    checked += r.checked;
    if (r.max_rel_err > 1e-3) failures.push_back(gc.name + " (" + r.worst + ")");
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      worst_case = gc.name;
    }
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = failures.empty() && secs < 120.0;
  o.detail = std::to_string(cases.size()) + " ops and chains, " + std::to_string(checked) +
             " coordinates; worst rel err " + fmt("%.2e", worst) + " (" + worst_case + "), " +
             fmt("%.1f", secs) + " s";
  for (const auto& f : failures) o.detail += "; FAILED " + f;
  return o;
}

// ---------------------------------------------------------------- criterion 4

Outcome identity_afdm() {
  std::mt19937_64 g(404);
  std::uniform_int_distribution<std::size_t> width(32, 160);
  Rng rng = make_rng(404);
  CrnnConfig cc;
  Crnn crnn(cc, rng);
  PhocNetConfig pc;
  pc.phoc_dim = phoc_length(Alphabet(U"abcdefghijklmnopqrstuvwxyz"), PhocLayout{{1, 2, 4}});
  PhocNet phoc(pc, rng);
  auto make = [&](const TaskNet& net, WarpKind kind) {
    AfdmConfig ac;
    ac.channels = net.conv_channels("conv4_1");
    ac.kind = kind;
    auto m = std::make_unique<Afdm>(ac, rng);
    m->init_identity();
    return m;
  };
  const auto crnn_tps = make(crnn, WarpKind::kTps);
  const auto crnn_affine = make(crnn, WarpKind::kAffine);
  const auto phoc_tps = make(phoc, WarpKind::kTps);
  AfdmConfig image_cfg;
  image_cfg.channels = 1;
  image_cfg.k = 1;
  Afdm image_space(image_cfg, rng);
  image_space.init_identity();

  double worst = 0.0;
  NoGradScope off;
  for (int i = 0; i < 20; ++i) {
    const Tensor x = random_tensor({1, 1, 64, width(g)}, g, 0.0, 1.0, false);
    const auto hook = [](const Afdm& m) { return [&m](const Tensor& f) { return m.deform(f); }; };
    const Tensor plain_c = crnn.forward(x);
    const Tensor plain_p = phoc.forward(x);
    worst = std::max(worst, max_abs_diff(plain_c.data(), crnn.forward(x, hook(*crnn_tps)).data()));
    worst = std::max(worst, max_abs_diff(plain_c.data(), crnn.forward(x, hook(*crnn_affine)).data()));
    worst = std::max(worst, max_abs_diff(plain_p.data(), phoc.forward(x, hook(*phoc_tps)).data()));
    worst = std::max(worst, max_abs_diff(plain_c.data(), crnn.forward(image_space_deform(x, image_space)).data()));
  }
  Outcome o;
  o.pass = worst <= 1e-6;
  o.detail = "20 inputs x {CRNN+TPS, CRNN+affine, PHOCNet+TPS, image-space TPS}; max |diff| " + fmt("%.2e", worst);
  return o;
}

// ---------------------------------------------------------------- criterion 5

std::vector<WordSample> mild_corpus(std::uint64_t seed, std::size_t n, std::size_t max_len = 8) {
  SynthConfig sc;
  sc.seed = seed;
  sc.max_length = max_len;
  return synthesize(sc, n);
}

Outcome sign_dynamics() {
  const auto start = Clock::now();
  std::vector<std::string> notes;
  bool ok = true;
  for (Task task : {Task::kRecognition, Task::kSpotting}) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.mode = TrainerMode::kAfdmTps;
    cfg.seed = 5;
    cfg.schedule.batch_size = 8;
    cfg.schedule.pretrain_iters = 0;
    cfg.schedule.warmup_iters = 5;
    cfg.schedule.joint_iters = 0;
    Trainer t(cfg, mild_corpus(55, 16));
    // At the identity every sample lands on the pixel lattice, where bilinear
    // sampling has only one-sided derivatives; a short warm-up moves off it.
    while (!t.done()) t.step();
    t.adversary_optimizer() = AdamState{};
    t.adversary_optimizer().lr = 1e-5;
    const Batch batch = t.sample_batch(0);
    const auto subset = t.deform_subset(0, batch.indices.size());

    std::vector<double> up;
    for (int i = 0; i < 20; ++i) up.push_back(t.adversary_step(batch, subset));
    up.push_back(t.loss(batch, subset));
    std::vector<double> down;
    for (int i = 0; i < 20; ++i) down.push_back(t.task_step(batch, subset));
    down.push_back(t.loss(batch, subset));

    std::size_t up_bad = 0;
    std::size_t down_bad = 0;
    for (std::size_t i = 1; i < up.size(); ++i) up_bad += up[i] < up[i - 1];
    for (std::size_t i = 1; i < down.size(); ++i) down_bad += down[i] >= down[i - 1];
    ok = ok && up_bad == 0 && down_bad == 0;
    notes.push_back(std::string(task == Task::kRecognition ? "hwr" : "hws") + ": ascent " +
                    fmt("%.6g", up.front()) + " -> " + fmt("%.6g", up.back()) + " (" + std::to_string(up_bad) +
                    " drops), descent " + fmt("%.6g", down.front()) + " -> " + fmt("%.6g", down.back()) + " (" +
                    std::to_string(down_bad) + " rises)");
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = ok && secs < 60.0;
  o.detail = notes[0] + "; " + notes[1] + "; " + fmt("%.1f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------- criterion 6

double oracle_ap(const std::vector<bool>& ranked) {
  double hits = 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (!ranked[r]) continue;
    hits += 1.0;
    total += hits / static_cast<double>(r + 1);
  }
  return hits == 0.0 ? 0.0 : 100.0 * total / hits;
}

Outcome phoc_metric_oracles() {
  bool ok = true;
  std::vector<std::string> notes;
  const Alphabet ab(U"ab");
  ok &= phoc_encode(U"ab", ab, std::vector<std::size_t>{1, 2}) == std::vector<double>{1, 1, 1, 0, 0, 1};
  ok &= phoc_encode(U"a", ab, std::vector<std::size_t>{1}) == std::vector<double>{1, 0};
  ok &= phoc_encode(U"aa", ab, std::vector<std::size_t>{1}) == phoc_encode(U"a", ab, std::vector<std::size_t>{1});
  notes.push_back(ok ? "PHOC vectors match" : "PHOC vectors differ");

  std::size_t instances = 0;
  double worst = 0.0;
  bool extremes = true;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      double best = -1.0;
      double lowest = 101.0;
      std::vector<Transcription> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u ? U"a" : U"b";
      do {
        // Candidate perm[r] sits at rank r: its angle to the query grows with r.
        std::vector<std::vector<double>> cands(n);
        std::vector<bool> ranked(n);
        for (std::size_t r = 0; r < n; ++r) {
          const double angle = 0.2 * static_cast<double>(r + 1);
          cands[perm[r]] = {std::cos(angle), std::sin(angle)};
          ranked[r] = (mask >> perm[r]) & 1u;
        }
        const double got = map_retrieval({{1.0, 0.0}}, {U"a"}, cands, labels, RetrievalMode::kQbS);
        const double want = oracle_ap(ranked);
        worst = std::max(worst, std::abs(got - want));
        best = std::max(best, got);
        lowest = std::min(lowest, got);
        ++instances;
      } while (std::next_permutation(perm.begin(), perm.end()));
      const std::size_t m = static_cast<std::size_t>(std::popcount(mask));
      std::vector<bool> last(n, false);
      for (std::size_t r = n - m; r < n; ++r) last[r] = true;
      extremes = extremes && std::abs(best - 100.0) <= 1e-9 && std::abs(lowest - oracle_ap(last)) <= 1e-9;
    }
  }
  ok = ok && worst <= 1e-9 && extremes;
  notes.push_back(std::to_string(instances) + " ranked instances, max AP err " + fmt("%.1e", worst) +
                  (extremes ? ", best/worst orderings match" : ", extreme orderings WRONG"));

  const ErrorRates r1 = wer_cer({U"helo"}, {U"hello"});
  const ErrorRates r2 = wer_cer({U"ab", U"cd"}, {U"ab", U"cd"});
  const ErrorRates r3 = wer_cer({U"", U"x"}, {U"ab", U"x"});
  const ErrorRates r4 = wer_cer({U"kitten", U"flaw"}, {U"sitting", U"lawn"});
  const bool rates = std::abs(r1.wer - 100.0) < 1e-12 && std::abs(r1.cer - 20.0) < 1e-12 && r2.wer == 0.0 &&
                     r2.cer == 0.0 && std::abs(r3.wer - 50.0) < 1e-12 &&
                     std::abs(r3.cer - 200.0 / 3.0) < 1e-12 && std::abs(r4.wer - 100.0) < 1e-12 &&
                     std::abs(r4.cer - 500.0 / 11.0) < 1e-12;
  ok = ok && rates;
  notes.push_back(rates ? "WER/CER hand counts match" : "WER/CER hand counts differ");
  Outcome o;
  o.pass = ok;
  o.detail = notes[0] + "; " + notes[1] + "; " + notes[2];
  return o;
}

// ---------------------------------------------------------------- criterion 7

double final_test_wer(const Trainer& t, const std::vector<WordSample>& test) {
  return t.evaluate(test).value("val_wer");
}

void copy_logs(const fs::path& from, const fs::path& to) {
  fs::create_directories(to);
  for (const char* f : {"metrics.csv", "eval.csv"}) {
    fs::copy_file(from / f, to / f, fs::copy_options::overwrite_existing);
  }
}

Outcome desk_trend(const Options& opt) {
  const auto start = Clock::now();
  const fs::path root = opt.work / "trend";
  fs::create_directories(root);
  std::ofstream log(root / "progress.log", std::ios::app);

  SynthConfig train_cfg;
  train_cfg.seed = 7001;
  train_cfg.jitter = mild_jitter();
  SynthConfig val_cfg = train_cfg;
  val_cfg.seed = 7002;
  SynthConfig test_cfg;
  test_cfg.seed = 7003;
  test_cfg.jitter = hard_jitter();
  const auto train = synthesize(train_cfg, opt.trend_train);
  const auto val = synthesize(val_cfg, opt.trend_val);
  const auto test = synthesize(test_cfg, opt.trend_test);

  const std::vector<TrainerMode> modes{TrainerMode::kNone, TrainerMode::kAfdmTps, TrainerMode::kAffine};
  std::map<TrainerMode, std::vector<double>> wer;
  std::ofstream table(root / "results.csv");
  table << "seed,mode,test_wer,test_cer\n";
  for (std::size_t s = 0; s < opt.trend_seeds; ++s) {
    TrainConfig base;
    base.task = Task::kRecognition;
    base.seed = 1 + s;
    base.width_factor = 0.25;
    base.schedule.pretrain_iters /= opt.trend_divisor;
    base.schedule.warmup_iters /= opt.trend_divisor;
    base.schedule.joint_iters /= opt.trend_divisor;
    base.schedule.eval_every = std::max<std::size_t>(1, base.schedule.eval_every / opt.trend_divisor);
    TrainConfig pre = base;
    pre.mode = TrainerMode::kNone;
    pre.schedule.warmup_iters = 0;
    pre.schedule.joint_iters = 0;
    const fs::path seed_dir = root / ("seed" + std::to_string(base.seed));
    Trainer pretrainer(pre, train, val);
    log << "seed " << base.seed << " pretraining" << std::endl;
    pretrainer.run(seed_dir / "pretrain", &log);
    const Checkpoint pretrained = pretrainer.checkpoint();
    for (TrainerMode mode : modes) {
      TrainConfig cfg = base;
      cfg.mode = mode;
      Trainer t(cfg, train, val);
      t.restore(pretrained);
      const fs::path dir = seed_dir / mode_name(mode);
      copy_logs(seed_dir / "pretrain", dir);
      log << "seed " << base.seed << " mode " << mode_name(mode) << std::endl;
      t.run(dir, &log);
      const EvalResult r = t.evaluate(test);
      wer[mode].push_back(r.value("val_wer"));
      table << base.seed << ',' << mode_name(mode) << ',' << fmt("%.17g", r.value("val_wer")) << ','
            << fmt("%.17g", r.value("val_cer")) << std::endl;
      log << "seed " << base.seed << ' ' << mode_name(mode) << " test WER " << r.value("val_wer") << " CER "
          << r.value("val_cer") << std::endl;
    }
  }
  const auto mean_of = [&](TrainerMode m) {
    const auto& v = wer[m];
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double none = mean_of(TrainerMode::kNone);
  const double tps = mean_of(TrainerMode::kAfdmTps);
  const double affine = mean_of(TrainerMode::kAffine);
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = tps <= none - 3.0 && tps <= affine;
  o.detail = (opt.trend_divisor > 1 ? "SHORTENED schedule /" + std::to_string(opt.trend_divisor) + "; " : std::string()) +
             "mean hard-test WER over " + std::to_string(opt.trend_seeds) + " seeds: none " + fmt("%.2f", none) +
             ", afdm_tps " + fmt("%.2f", tps) + ", b4_affine " + fmt("%.2f", affine) +
             " (need afdm_tps <= none - 3 and <= b4_affine); " + fmt("%.0f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------- criterion 8

Outcome insertion_sweep_shape() {
  const auto start = Clock::now();
  const auto train = mild_corpus(808, 200, 6);
  const auto val = mild_corpus(809, 40, 6);
  bool ok = true;
  std::vector<std::string> notes;
  const std::vector<std::pair<Task, std::vector<std::string>>> sweeps = {
      {Task::kRecognition, {"conv3_1", "conv3_2", "conv4_1", "conv4_2", "conv5_1", "conv5_2"}},
      {Task::kSpotting,
       {"conv3_1", "conv3_2", "conv3_3", "conv3_4", "conv3_5", "conv3_6", "conv4_1", "conv4_2", "conv4_3"}},
  };
  for (const auto& [task, layers] : sweeps) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.mode = TrainerMode::kAfdmTps;
    cfg.seed = 8;
    cfg.width_factor = 0.125;
    cfg.schedule.pretrain_iters = 20;
    cfg.schedule.warmup_iters = 10;
    cfg.schedule.joint_iters = 40;
    cfg.schedule.batch_size = 8;
    cfg.schedule.eval_every = 35;
    const auto results = insertion_sweep(cfg, layers, train, val);
    std::size_t finite = 0;
    for (const auto& r : results) {
      const bool all_finite = r.finite && r.losses.size() == 70 &&
                              std::all_of(r.losses.begin(), r.losses.end(), [](double v) { return std::isfinite(v); });
      finite += all_finite;
      if (!all_finite) notes.push_back("diverged at " + r.layer);
    }
    ok = ok && finite == layers.size() && results.size() == layers.size();
    notes.push_back(std::string(task == Task::kRecognition ? "CRNN " : "PHOCNet ") + std::to_string(finite) + "/" +
                    std::to_string(layers.size()) + " layers finite over 70 iterations");
  }
  Outcome o;
  o.pass = ok;
  for (const auto& n : notes) o.detail += (o.detail.empty() ? "" : "; ") + n;
  o.detail += "; " + fmt("%.1f", seconds_since(start)) + " s";
  return o;
}

// ---------------------------------------------------------------- criterion 9

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const Options& opt) {
  const auto train = mild_corpus(909, 120, 6);
  const auto val = mild_corpus(910, 30, 6);
  std::vector<std::string> runs;
  for (const char* name : {"run_a", "run_b"}) {
    TrainConfig cfg;
    cfg.mode = TrainerMode::kAfdmTps;
    cfg.seed = 9;
    cfg.width_factor = 0.125;
    cfg.schedule.pretrain_iters = 10;
    cfg.schedule.warmup_iters = 5;
    cfg.schedule.joint_iters = 20;
    cfg.schedule.batch_size = 8;
    cfg.schedule.eval_every = 5;
    const fs::path dir = opt.work / "determinism" / name;
    fs::remove_all(dir);
    Trainer(cfg, train, val).run(dir);
    runs.push_back(slurp(dir / "metrics.csv"));
  }
  std::size_t rows = static_cast<std::size_t>(std::count(runs[0].begin(), runs[0].end(), '\n'));
  Outcome o;
  o.pass = !runs[0].empty() && runs[0] == runs[1];
  o.detail = std::to_string(rows) + " metrics lines, " + (o.pass ? "byte-identical" : "DIFFERENT");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  Options opt;
  app.add_option("--criterion", selected, "Criterion number (repeatable)")->check(CLI::Range(1, 9));
  app.add_option("--work", opt.work, "Scratch directory");
  app.add_option("--trend-seeds", opt.trend_seeds)->check(CLI::PositiveNumber);
  app.add_option("--trend-train", opt.trend_train)->check(CLI::PositiveNumber);
  app.add_option("--trend-test", opt.trend_test)->check(CLI::PositiveNumber);
  app.add_option("--trend-divisor", opt.trend_divisor, "Divide the trend schedule (smoke runs only)")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"TPS interpolation", tps_interpolation}},
      {2, {"CTC oracle equivalence", ctc_oracle}},
      {3, {"gradient suite", gradient_suite}},
      {4, {"identity AFDM", identity_afdm}},
      {5, {"adversarial sign dynamics", sign_dynamics}},
      {6, {"PHOC and metric oracles", phoc_metric_oracles}},
      {7, {"desk-scale trend", [&] { return desk_trend(opt); }}},
      {8, {"insertion-layer sweep", insertion_sweep_shape}},
      {9, {"determinism", [&] { return determinism(opt); }}},
  };
  bool all = true;
  for (int id : selected) {
    const auto& [name, fn] = criteria.at(id);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::cout << "criterion " << id << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
