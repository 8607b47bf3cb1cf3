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

#ifndef AFDM_TRAINER_HPP_
#define AFDM_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afdm/afdm.hpp"
#include "afdm/augment.hpp"
#include "afdm/checkpoint.hpp"
#include "afdm/data.hpp"
#include "afdm/labels.hpp"
#include "afdm/networks.hpp"

namespace afdm {

enum class TrainerMode { kNone, kImageAug, kAfdmTps, kImageSpaceTps, kAffine };
enum class Task { kRecognition, kSpotting };
enum class Alternation { kIteration, kEpoch };
enum class Phase { kPretrain, kWarmup, kJoint };

/// Config spellings: none, b1_image_aug, afdm_tps, b3_image_space_tps, b4_affine.
std::string mode_name(TrainerMode mode);
TrainerMode parse_mode(std::string_view name);
std::string phase_name(Phase phase);
bool has_adversary(TrainerMode mode);

struct TrainSchedule {
  std::size_t pretrain_iters = 1000;
  std::size_t warmup_iters = 100;
  std::size_t joint_iters = 5000;
  std::size_t batch_size = 32;
  double task_lr = 1e-4;
  double loc_lr = 1e-3;
  double deform_fraction = 0.5;
  Alternation alternation = Alternation::kIteration;
  std::size_t eval_every = 250;

  void validate() const;  // ConfigError on violation
};

struct TrainConfig {
  Task task = Task::kRecognition;
  TrainerMode mode = TrainerMode::kNone;
  TrainSchedule schedule;
  std::uint64_t seed = 0;

  double width_factor = 0.25;
  std::string insertion_layer = "conv4_1";
  std::size_t lstm_hidden = 0;
  std::size_t fc_width = 0;
  std::vector<std::size_t> spp_levels{1, 2, 4};
  std::vector<std::size_t> phoc_levels{1, 2, 4};
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";

  std::size_t afdm_k = 4;
  std::vector<std::size_t> loc_channels{32, 64, 128, 128};
  std::size_t loc_hidden = 64;
  AugmentConfig augment;

  bool float32_conv = true;
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::size_t val_limit = 0;         // 0: whole validation set

  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path out_dir;
  std::filesystem::path resume;

  void validate() const;
};

/// Flat `key = value` lines; '#' starts a comment. Relative paths resolve
/// against `base_dir`. Unknown keys and malformed values raise ConfigError.
TrainConfig parse_train_config(std::string_view text, const std::filesystem::path& base_dir = {});
TrainConfig load_train_config(const std::filesystem::path& file);
std::string format_train_config(const TrainConfig& cfg);

struct Batch {
  Tensor images;                     // [B x 1 x 64 x W]
  std::vector<std::size_t> indices;  // dataset rows
  std::uint64_t iter = 0;            // seeds image-level augmentation
};

struct EvalResult {
  std::string primary;  // metric reported in the metrics log
  std::vector<std::pair<std::string, double>> metrics;
  double value(const std::string& name) const;
};

/// Owns the task network, the optional adversary, both optimizers and the
/// iteration counter. Iteration i draws all of its randomness from
/// (seed, i), so runs are reproducible and resumable bit-exactly.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, std::vector<WordSample> train, std::vector<WordSample> val = {});

  const TrainConfig& config() const { return cfg_; }
  TaskNet& net() { return *net_; }
  const TaskNet& net() const { return *net_; }
  Afdm* adversary() { return adversary_.get(); }
  ParamList task_parameters() const { return net_->parameters(); }
  ParamList adversary_parameters() const;
  const Alphabet& alphabet() const { return alphabet_; }
  const PhocLayout& phoc_layout() const { return layout_; }
  AdamState& task_optimizer() { return task_adam_; }
  AdamState& adversary_optimizer() { return adv_adam_; }

  std::size_t train_size() const { return train_.size(); }
  Batch make_batch(std::span<const std::size_t> indices) const;
  /// The batch and deformed subset drawn for global iteration `iter`.
  Batch sample_batch(std::uint64_t iter) const;
  std::vector<std::size_t> deform_subset(std::uint64_t iter, std::size_t batch) const;
  std::size_t deformed_count(std::size_t batch) const;

  /// Task loss with the listed batch rows routed through the adversary
  /// (or augmented, for the image-augmentation mode).
  double loss(const Batch& batch, std::span<const std::size_t> subset = {}) const;
  /// One Adam descent step on the task parameters; returns the loss before it.
  double task_step(const Batch& batch, std::span<const std::size_t> subset = {});
  /// One Adam ascent step on the adversary parameters; returns the loss before it.
  double adversary_step(const Batch& batch, std::span<const std::size_t> subset);

  Phase phase_of(std::uint64_t iter) const;
  std::uint64_t phase_start(Phase phase) const;
  std::uint64_t end_iteration() const;
  std::uint64_t iteration() const { return iteration_; }
  bool done() const { return iteration_ >= end_iteration(); }
  /// Runs the next scheduled iteration and returns its loss.
  double step();

  EvalResult evaluate(const std::vector<WordSample>& data) const;
  EvalResult evaluate_validation() const;

  Checkpoint checkpoint() const;
  /// Restores parameters, optimizer moments and the iteration counter. An
  /// adversary missing from the checkpoint is accepted only up to the end of
  /// pretraining, where it starts from its identity initialisation.
  void restore(const Checkpoint& ckpt);

  /// Runs to the end of the schedule, appending to `<out>/metrics.csv` and
  /// `<out>/eval.csv` and writing `<out>/final.ckpt`.
  void run(const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

 private:
  Tensor forward(const Batch& batch, std::span<const std::size_t> subset) const;
  Tensor task_loss(const Tensor& output, const Batch& batch) const;
  std::size_t min_width(std::span<const std::size_t> indices) const;
  std::size_t alternation_period() const;
  Tensor augmented_images(const Batch& batch, std::span<const std::size_t> subset) const;
  EvalResult evaluate_inputs(const std::vector<Tensor>& inputs,
                             const std::vector<Transcription>& labels) const;
  void skip_idle_phases();

  TrainConfig cfg_;
  Alphabet alphabet_;
  PhocLayout layout_;
  std::vector<WordSample> train_;
  std::vector<WordSample> val_;
  std::vector<Tensor> val_inputs_;
  std::vector<Tensor> train_inputs_;
  std::vector<std::vector<std::size_t>> train_targets_;
  std::vector<std::vector<double>> train_phoc_;
  std::unique_ptr<TaskNet> net_;
  std::unique_ptr<Afdm> adversary_;
  AdamState task_adam_;
  AdamState adv_adam_;
  std::uint64_t iteration_ = 0;
};

/// Loads the manifests named in the config and runs the trainer.
void train(const TrainConfig& cfg, std::ostream* progress = nullptr);

struct SweepResult {
  std::string layer;
  std::vector<double> losses;
  bool finite = true;
  EvalResult final_eval;
};

/// Trains one adversarial run per insertion layer from the same seed.
std::vector<SweepResult> insertion_sweep(const TrainConfig& base,
                                         const std::vector<std::string>& layers,
                                         const std::vector<WordSample>& train,
                                         const std::vector<WordSample>& val);

struct EvalOptions {
  std::string prefix = "val_";
  /// Recognition only: decode to the nearest lexicon word when non-empty.
  const std::vector<Transcription>* lexicon = nullptr;
  std::vector<Transcription>* predictions = nullptr;
};

/// WER/CER (recognition) or QbE/QbS mAP (spotting) of a task network on
/// preprocessed inputs, batched by width.
EvalResult evaluate_network(const TaskNet& net, const TrainConfig& cfg, const std::vector<Tensor>& inputs,
                            const std::vector<Transcription>& labels, const EvalOptions& options = {});

/// Mean-max frame probability of each input, evaluated one sample at a time.
std::vector<double> recognition_confidences(const TaskNet& net, const TrainConfig& cfg,
                                            const std::vector<Tensor>& inputs);

/// Rebuilds the task network described by a checkpoint's config echo and
/// loads its weights.
std::unique_ptr<TaskNet> load_task_network(const Checkpoint& ckpt, TrainConfig* cfg_out = nullptr);

}  // namespace afdm

#endif  // AFDM_TRAINER_HPP_
