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

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "afdm/afdm.hpp"
#include "afdm/augment.hpp"
#include "afdm/checkpoint.hpp"
#include "afdm/data.hpp"
#include "afdm/error.hpp"
#include "afdm/metrics.hpp"
#include "afdm/synth.hpp"
#include "afdm/trainer.hpp"

namespace fs = std::filesystem;
using namespace afdm;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

fs::path manifest_path(const fs::path& data) {
  return fs::is_directory(data) ? data / "manifest.tsv" : data;
}

Polarity parse_polarity(const std::string& name) {
  if (name == "dark") return Polarity::kDarkOnLight;
  if (name == "light") return Polarity::kLightOnDark;
  return Polarity::kAuto;
}

std::vector<Tensor> preprocess_all(const std::vector<WordSample>& samples) {
  std::vector<Tensor> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(preprocess(s.image));
  return inputs;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct SynthArgs {
  fs::path out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool hard = false;
  std::size_t min_length = 2;
  std::size_t max_length = 8;
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.min_length = a.min_length;
  cfg.max_length = a.max_length;
  cfg.jitter = a.hard ? hard_jitter() : mild_jitter();
  fs::create_directories(a.out);
  write_dataset(a.out / "manifest.tsv", synthesize(cfg, a.n));
  std::cout << "wrote " << a.n << " samples to " << (a.out / "manifest.tsv").string() << "\n";
  return kOk;
}

int run_train(const fs::path& config) {
  train(load_train_config(config), &std::cerr);
  return kOk;
}

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  std::string task;
  fs::path lexicon;
  fs::path results;
  std::string polarity = "dark";
};

int run_eval(const EvalArgs& a) {
  TrainConfig cfg;
  const auto net = load_task_network(read_checkpoint(a.checkpoint), &cfg);
  const Task task = a.task == "hwr" ? Task::kRecognition : Task::kSpotting;
  if (task != cfg.task) throw ConfigError("--task " + a.task + " does not match the checkpoint's network");
  const Alphabet alphabet(utf8_decode(cfg.alphabet));
  const auto samples = load_dataset(read_manifest(manifest_path(a.data)), &alphabet, parse_polarity(a.polarity));
  std::vector<Transcription> labels;
  for (const auto& s : samples) labels.push_back(s.transcription);

  std::vector<Transcription> lexicon;
  EvalOptions options;
  options.prefix = "";
  if (!a.lexicon.empty()) {
    if (task != Task::kRecognition) throw ConfigError("--lexicon applies to hwr only");
    std::ifstream in(a.lexicon);
    if (!in) throw DataError("cannot read lexicon " + a.lexicon.string());
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lexicon.push_back(utf8_decode(line));
    }
    options.lexicon = &lexicon;
  }
  const EvalResult r = evaluate_network(*net, cfg, preprocess_all(samples), labels, options);

  fs::path results = a.results;
  if (results.empty()) {
    results = a.checkpoint.parent_path() / (a.checkpoint.stem().string() + "_eval_" + a.task + ".csv");
  }
  std::ofstream out(results);
  if (!out) throw DataError("cannot write " + results.string());
  out << "metric_name,metric_value\n";
  for (const auto& [name, value] : r.metrics) {
    out << name << ',' << format_double(value) << '\n';
    std::cout << name << ' ' << value << '\n';
  }
  return kOk;
}

struct SplitArgs {
  fs::path checkpoint;
  fs::path data;
  double ratio = 0.7;
  fs::path out;
  std::string polarity = "dark";
};

int run_split(const SplitArgs& a) {
  TrainConfig cfg;
  const auto net = load_task_network(read_checkpoint(a.checkpoint), &cfg);
  const Alphabet alphabet(utf8_decode(cfg.alphabet));
  const Manifest manifest = read_manifest(manifest_path(a.data));
  const auto samples = load_dataset(manifest, &alphabet, parse_polarity(a.polarity));
  const ConfidenceSplit split =
      confidence_split(recognition_confidences(*net, cfg, preprocess_all(samples)), a.ratio);
  const fs::path out_dir = a.out.empty() ? manifest.root : a.out;
  fs::create_directories(out_dir);
  const auto write = [&](const std::vector<std::size_t>& rows, const char* name) {
    std::vector<ManifestRow> subset;
    for (std::size_t i : rows) {
      ManifestRow row = manifest.rows[i];
      row.path = fs::relative(fs::absolute(manifest.root / row.path), fs::absolute(out_dir)).generic_string();
      subset.push_back(std::move(row));
    }
    write_manifest(out_dir / name, subset);
    std::cout << name << ' ' << subset.size() << '\n';
  };
  write(split.easy, "easy.tsv");
  write(split.hard, "hard.tsv");
  return kOk;
}

struct WarpArgs {
  fs::path checkpoint;
  fs::path data;
  fs::path out;
  std::size_t count = 8;
  double strength = 0.3;
  std::uint64_t seed = 0;
  std::string polarity = "dark";
};

int run_warp_demo(const WarpArgs& a) {
  const Checkpoint ckpt = read_checkpoint(a.checkpoint);
  TrainConfig cfg;
  (void)load_task_network(ckpt, &cfg);
  AfdmConfig ac;
  ac.channels = 1;
  ac.k = 1;
  ac.loc_channels = cfg.loc_channels;
  ac.loc_hidden = cfg.loc_hidden;
  Rng rng = make_rng(a.seed, 0, 0xde70);
  Afdm module(ac, rng);
  module.init_identity();
  ParamList params = module.parameters();
  if (cfg.mode == TrainerMode::kImageSpaceTps && ckpt.has_prefix("adv.")) {
    load_tensors(ckpt, params, "adv.");
    std::cout << "using the checkpoint's image-space adversary\n";
  } else {
    std::normal_distribution<double> noise(0.0, a.strength);
    for (auto& p : params) {
      if (p.name.find(".fc2.") == std::string::npos) continue;
      for (double& v : p.tensor.mutable_data()) v += noise(rng);
    }
    std::cout << "using a randomly perturbed image-space module (strength " << a.strength << ")\n";
  }

  const auto samples = load_dataset(read_manifest(manifest_path(a.data)), nullptr, parse_polarity(a.polarity));
  fs::create_directories(a.out);
  std::vector<Image> rows;
  NoGradScope no_grad;
  for (std::size_t i = 0; i < samples.size() && i < a.count; ++i) {
    const Image original = preprocess_image(samples[i].image);
    const Tensor x = preprocess(samples[i].image).reshaped({1, 1, original.height, original.width});
    const Tensor y = image_space_deform(x, module);
    Image warped(original.height, original.width);
    std::copy(y.data().begin(), y.data().end(), warped.pixels.begin());
    const Image pair = hconcat({original, warped}, 4);
    char name[32];
    std::snprintf(name, sizeof name, "warp_%04zu.png", i);
    write_png(a.out / name, pair);
    rows.push_back(pair);
  }
  if (rows.empty()) throw DataError("warp-demo: no samples");
  std::size_t widest = 0;
  for (const auto& r : rows) widest = std::max(widest, r.width);
  for (auto& r : rows) {
    if (r.width < widest) r = hconcat({r, Image(r.height, widest - r.width)});
  }
  write_png(a.out / "grid.png", vconcat(rows, 4));
  std::cout << "wrote " << rows.size() << " pairs to " << a.out.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial feature deformation for handwriting recognition and word spotting"};
  app.require_subcommand(1);
  const std::vector<std::string> polarities{"dark", "light", "auto"};

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic word corpus");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Number of words")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_flag("--hard", synth.hard, "Use the held-out hard deformation range");
  synth_cmd->add_option("--min-length", synth.min_length, "Shortest word")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-length", synth.max_length, "Longest word")->check(CLI::PositiveNumber);

  fs::path train_config;
  auto* train_cmd = app.add_subcommand("train", "Train from a config file");
  train_cmd->add_option("--config", train_config, "Config file")->required()->check(CLI::ExistingFile);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval.data, "Dataset directory or manifest")->required()->check(CLI::ExistingPath);
  eval_cmd->add_option("--task", eval.task)->required()->check(CLI::IsMember({"hwr", "hws"}));
  eval_cmd->add_option("--lexicon", eval.lexicon, "One word per line")->check(CLI::ExistingFile);
  eval_cmd->add_option("--results", eval.results, "Results CSV");
  eval_cmd->add_option("--polarity", eval.polarity)->check(CLI::IsMember(polarities));

  WarpArgs warp;
  auto* warp_cmd = app.add_subcommand("warp-demo", "Export original and image-space-warped samples side by side");
  warp_cmd->add_option("--checkpoint", warp.checkpoint)->required()->check(CLI::ExistingFile);
  warp_cmd->add_option("--data", warp.data)->required()->check(CLI::ExistingPath);
  warp_cmd->add_option("--out", warp.out)->required();
  warp_cmd->add_option("--count", warp.count)->check(CLI::PositiveNumber);
  warp_cmd->add_option("--strength", warp.strength)->check(CLI::NonNegativeNumber);
  warp_cmd->add_option("--seed", warp.seed);
  warp_cmd->add_option("--polarity", warp.polarity)->check(CLI::IsMember(polarities));

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Split a dataset into easy and hard manifests by confidence");
  split_cmd->add_option("--checkpoint", split.checkpoint)->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--data", split.data)->required()->check(CLI::ExistingPath);
  split_cmd->add_option("--ratio", split.ratio)->check(CLI::Range(0.0, 1.0));
  split_cmd->add_option("--out", split.out, "Directory for easy.tsv and hard.tsv");
  split_cmd->add_option("--polarity", split.polarity)->check(CLI::IsMember(polarities));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) {
      if (synth.min_length > synth.max_length) throw ConfigError("--min-length exceeds --max-length");
      return run_synth(synth);
    }
    if (*train_cmd) return run_train(train_config);
    if (*eval_cmd) return run_eval(eval);
    if (*warp_cmd) return run_warp_demo(warp);
    if (*split_cmd) return run_split(split);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
