#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rhyme/embedding.hpp"
#include "rhyme/network.hpp"
#include "rhyme/params.hpp"

namespace rhyme {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  double val_fraction = 0.1;
  std::size_t folds = 5;
  std::uint64_t seed = 7;
  /// Seed of the epoch shuffling stream; defaults to seed.
  std::optional<std::uint64_t> shuffle_seed;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Worker threads for per-utterance gradients and scoring. Results do not
  /// depend on this value.
  std::size_t threads = 1;
  /// Record wall-clock time per epoch in the log.
  bool record_time = true;

  void validate() const;

  friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParameterStore first_moment;
  ParameterStore second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParameterStore &params);
};

/// Bias-corrected Adam update, applied elementwise. Increments state.step
/// before updating.
void adam_step(ParameterStore &params, const ParameterStore &grads, AdamState &state, const AdamOptions &options);

/// -log y_hat[label]. Throws InvalidArgument for labels outside {0, 1}.
double cross_entropy(const Eigen::Vector2d &y_hat, int label);
/// Same loss from logits through log-sum-exp.
double cross_entropy_from_logits(const Eigen::Vector2d &logits, int label);

struct Example {
  EmbeddingSequence sequence;
  int label = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0; // NaN without a validation set
  double val_eer = 0.0;  // percent; NaN unless both classes are in validation
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  bool early_stopped = false;
  std::size_t best_epoch = 0; // 0 = initial parameters
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

struct TrainResult {
  ParameterStore params;
  TrainLog log;
};

/// Mini-batch Adam on the mean per-utterance cross-entropy with early stopping
/// on validation loss. When val_set is empty a stratified val_fraction of the
/// training set is held out. Returns the parameters of the best-validation
/// epoch. Throws ConfigError for a single-class training set.
TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const TrainConfig &config,
                  const ModelConfig &model);

/// Continues from given parameters instead of a fresh initialization.
TrainResult train_from(ParameterStore initial, std::span<const Example> train_set, std::span<const Example> val_set,
                       const TrainConfig &config, const ModelConfig &model);

struct EvalOutput {
  std::vector<double> scores;
  std::vector<double> alphas;
  double mean_loss = 0.0;
};

/// Eval-mode scores in input order.
EvalOutput evaluate(std::span<const Example> set, const ParameterStore &params, const ModelConfig &model,
                    std::size_t threads = 1);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Label-stratified folds: each class is shuffled and dealt round-robin, the
/// deal continuing across classes. Throws ConfigError when folds < 2 or
/// folds > labels.size().
std::vector<FoldSplit> kfold_split(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

/// Stratified hold-out: returns (kept, held_out) indices.
FoldSplit stratified_holdout(std::span<const int> labels, double fraction, std::uint64_t seed);

struct GradCheckGroup {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  Ablation ablation = Ablation::full;
  std::vector<GradCheckGroup> groups;

  double max_rel_error() const noexcept;
  bool passed(double tolerance = 1e-4) const noexcept;
};

struct GradCheckOptions {
  std::size_t frames = 4;
  double step = 1e-5;
  /// Lower bound of the relative-error denominator.
  double floor = 1e-5;
  /// Applied to the analytic gradient before comparison (test fixtures).
  std::function<void(ParameterStore &)> corrupt;
};

/// Small model used by the gradient checker: D = input_dim, C = 12, d = 16.
ModelConfig gradcheck_model(std::size_t input_dim, Ablation ablation);

/// Central finite differences of the train-mode loss (fixed dropout mask)
/// against backward, per parameter tensor.
GradCheckReport grad_check(const ModelConfig &model, std::uint64_t seed, const GradCheckOptions &options = {});

/// Reads RHYME_THREADS (default 1).
std::size_t threads_from_env();

} // namespace rhyme
