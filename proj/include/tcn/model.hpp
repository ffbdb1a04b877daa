#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tcn/featcomb.hpp"
#include "tcn/layers.hpp"
#include "tcn/matrix.hpp"
#include "tcn/rng.hpp"

namespace tcn {

enum class ModelKind { TCN, MLP, Logistic, CNN1D };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(std::string_view name);

struct ModelConfig {
  CombinationSpec combination;
  std::size_t hidden1 = 20;
  std::size_t hidden2 = 10;
  std::size_t n_residual_blocks = 1;
  double dropout_rate = 0.5;
  bool use_batchnorm = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ReluLayer {};

using Layer =
    std::variant<DenseLayer, ResidualBlock, BatchNormLayer, ReluLayer, DropoutLayer, Conv1DLayer>;

/// Short type name used in checkpoints and reports ("dense", "residual", ...).
std::string_view layer_type_name(const Layer& layer) noexcept;

/// A trainable parameter block. `penalized` marks weight matrices that
/// receive L2 regularization (biases and batch-norm affine terms do not).
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  bool penalized = false;
  std::size_t layer_index = 0;
};

struct ModelGraph {
  ModelKind kind = ModelKind::TCN;
  std::size_t input_dim = 0;
  std::size_t n_classes = 0;
  std::vector<Layer> layers;
  /// Bumped by `mark_updated` whenever parameters change; caches record it.
  std::uint64_t generation = 0;

  /// Trainable blocks in layer order. Pointers stay valid until `layers` is
  /// resized or the graph is moved.
  std::vector<ParamRef> parameters();
  std::size_t parameter_count() const;
  void mark_updated() noexcept { ++generation; }
  /// Checks chain compatibility of adjacent layers and the head width.
  void validate() const;
};

/// Feature transform dense(hidden1, ReLU), residual blocks at hidden1, batch
/// norm, ReLU, dropout, dense(hidden2, ReLU), dense(n_classes) and a softmax
/// head. All weights are He-initialized from `rng`.
ModelGraph build_tcn(std::size_t input_dim, std::size_t n_classes, const ModelConfig& cfg,
                     Rng& rng);
/// Same, seeding the initializer from cfg.seed.
ModelGraph build_tcn(std::size_t input_dim, std::size_t n_classes, const ModelConfig& cfg);

/// Logistic: one dense layer. MLP: the TCN stack without residual blocks.
/// CNN1D: conv1d(8 kernels, width 3), ReLU, dense(hidden2, ReLU), dense(n_classes).
ModelGraph build_baseline(ModelKind kind, std::size_t input_dim, std::size_t n_classes,
                          const ModelConfig& cfg, Rng& rng);
ModelGraph build_baseline(ModelKind kind, std::size_t input_dim, std::size_t n_classes,
                          const ModelConfig& cfg);
/// Dispatches on `kind`.
ModelGraph build_model(ModelKind kind, std::size_t input_dim, std::size_t n_classes,
                       const ModelConfig& cfg);

struct ForwardOptions {
  Mode mode = Mode::Infer;
  Rng* rng = nullptr;  ///< required for Train-mode dropout
  bool dropout_enabled = true;
  bool update_running_stats = true;
};

using LayerCache = std::variant<std::monostate, DenseCache, ResidualCache, BatchNormCache,
                                Matrix /* relu input */, DropoutCache, Conv1DCache>;

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix probs;
  std::uint64_t generation = 0;
  bool train = false;
};

struct ForwardResult {
  Matrix logits;
  Matrix probs;
  ForwardCache cache;
};

/// Runs the stack. In Train mode with a single-row batch the batch-norm
/// layers fall back to running statistics and leave them untouched.
ForwardResult forward(ModelGraph& model, const Matrix& batch, const ForwardOptions& options);
/// Infer-mode probabilities without touching the model.
Matrix forward_infer(const ModelGraph& model, const Matrix& batch);

/// Gradient of the mean cross-entropy for every block of `parameters()`, in
/// the same order. Throws StateError for caches that are not from a Train
/// forward or predate the last parameter update.
std::vector<Matrix> backward(const ModelGraph& model, const ForwardCache& cache,
                             std::span<const int> labels);

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> argmax_rows(const Matrix& probs);
std::vector<int> predict(const ModelGraph& model, const Matrix& batch);

}  // namespace tcn
