#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tcn/data.hpp"
#include "tcn/model.hpp"

namespace tcn {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 10;
  std::size_t max_epochs = 200;
  double l2_lambda = 1e-4;
  std::size_t early_stop_patience = 20;
  double val_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle_each_epoch = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Minimum validation-loss decrease that counts as an improvement.
inline constexpr double kEarlyStopMinDelta = 1e-6;

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every block in `params`. Moments are
/// allocated on the first call.
void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               const TrainConfig& cfg);

struct L2Result {
  double penalty = 0.0;
  std::vector<Matrix> grads;  ///< aligned with the parameter list
};

/// (lambda / 2) * sum of squared penalized weights, and lambda * w for them.
L2Result l2_penalty(std::span<const ParamRef> params, double lambda);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  /// True when validation loss was measured on the training data because
  /// val_fraction is 0.
  bool monitored_train_set = false;
};

struct Metrics {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  ///< [true][predicted]
};

/// Infer-mode accuracy, mean cross-entropy and confusion matrix.
Metrics evaluate(const ModelGraph& model, const Dataset& dataset);

/// Splits `val_fraction` off `train_set` (stratified, seeded) and trains on
/// the rest. `model` ends holding the parameters of the best epoch.
TrainHistory train_loop(ModelGraph& model, const Dataset& train_set, const TrainConfig& cfg);
/// Trains on `train` and early-stops on `val`. An empty `val` monitors the
/// Infer-mode loss on `train` instead.
TrainHistory train_loop(ModelGraph& model, const Dataset& train, const Dataset& val,
                        const TrainConfig& cfg);

struct GradCheckOptions {
  double h = 1e-5;
  std::size_t max_parameters = 5000;
  /// Test hook: adds this to the first analytic gradient entry so the
  /// detector can be exercised.
  double corrupt_first_gradient = 0.0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  /// Worst error per layer type. Parameterless layers report the worst error
  /// among parameters whose gradient flows through them; "softmax_ce" covers
  /// every parameter.
  std::map<std::string, double> per_layer_type;
};

/// Central-difference check of every parameter of the mean cross-entropy
/// with dropout disabled and batch norm in Train mode on the fixed batch.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check_report(ModelGraph& model, const Matrix& batch,
                                  std::span<const int> labels, const GradCheckOptions& options);
double grad_check(ModelGraph& model, const Matrix& batch, std::span<const int> labels,
                  double h = 1e-5);

}  // namespace tcn
