#pragma once

// Differentiable building blocks. Every forward function optionally fills a
// cache; the matching backward function consumes it. Layers hold parameters
// only, so a layer can be shared by several caches.

#include <cstddef>
#include <span>
#include <vector>

#include "tcn/activation.hpp"
#include "tcn/matrix.hpp"
#include "tcn/rng.hpp"

namespace tcn {

enum class Mode { Train, Infer };

/// Gaussian weights with standard deviation sqrt(2 / fan_in), shape fan_out x fan_in.
Matrix he_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---------------------------------------------------------------- dense

struct DenseLayer {
  Matrix weights;  ///< out x in
  Matrix bias;     ///< 1 x out
  Activation activation = Activation::ReLU;

  std::size_t input_dim() const noexcept { return weights.cols(); }
  std::size_t output_dim() const noexcept { return weights.rows(); }
};

DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng);

struct DenseCache {
  Matrix input;
  Matrix pre_activation;
};

struct DenseGrads {
  Matrix input;
  Matrix weights;
  Matrix bias;
};

/// activation(x * W^T + b), row-wise.
Matrix dense_forward(const Matrix& x, const DenseLayer& layer, DenseCache* cache = nullptr);
DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& upstream);

// ---------------------------------------------------------------- relu

Matrix relu(const Matrix& x);
/// Passes `upstream` where x > 0; zero elsewhere (including x == 0).
Matrix relu_backward(const Matrix& x, const Matrix& upstream);

// ---------------------------------------------------------------- batch norm

struct BatchNormLayer {
  Matrix gamma;         ///< 1 x d
  Matrix beta;          ///< 1 x d
  Matrix running_mean;  ///< 1 x d
  Matrix running_var;   ///< 1 x d, entries >= 0
  double momentum = 0.9;
  double epsilon = 1e-5;

  std::size_t dim() const noexcept { return gamma.cols(); }
};

/// gamma = 1, beta = 0, running mean 0, running variance 1.
BatchNormLayer make_batchnorm(std::size_t dim);

struct BatchNormCache {
  Matrix normalized;
  std::vector<double> inv_std;
  bool batch_statistics = true;  ///< false when running statistics were used
};

struct BatchNormGrads {
  Matrix input;
  Matrix gamma;
  Matrix beta;
};

/// Train mode normalizes with the batch mean and biased variance and, when
/// `update_running` is set, folds them into the running statistics:
/// running = momentum * running + (1 - momentum) * batch. Infer mode uses the
/// running statistics. Train mode needs at least two rows.
Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& layer, Mode mode,
                         BatchNormCache* cache = nullptr, bool update_running = true);
/// Infer-mode forward without side effects.
Matrix batchnorm_infer(const Matrix& x, const BatchNormLayer& layer,
                       BatchNormCache* cache = nullptr);
BatchNormGrads batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                  const Matrix& upstream);

// ---------------------------------------------------------------- dropout

struct DropoutLayer {
  double rate = 0.5;  ///< in [0, 1)
};

struct DropoutCache {
  Matrix mask;  ///< 0 or 1 / (1 - rate) per entry
};

/// Inverted dropout. Train mode drops entries with probability `rate` and
/// scales survivors by 1 / (1 - rate); Infer mode is the identity. A null
/// `rng` in Train mode is an ArgumentError unless rate is 0.
Matrix dropout_forward(const Matrix& x, const DropoutLayer& layer, Mode mode, Rng* rng,
                       DropoutCache* cache = nullptr);
Matrix dropout_backward(const DropoutCache& cache, const Matrix& upstream);

// ---------------------------------------------------------------- residual

/// y = relu(W2 relu(W1 x + b1) + b2) + x with square, equally sized weights.
struct ResidualBlock {
  Matrix w1;  ///< d x d
  Matrix b1;  ///< 1 x d
  Matrix w2;  ///< d x d
  Matrix b2;  ///< 1 x d

  std::size_t dim() const noexcept { return w1.rows(); }
};

ResidualBlock make_residual(std::size_t dim, Rng& rng);
ResidualBlock zero_residual(std::size_t dim);

struct ResidualCache {
  Matrix input;
  Matrix pre_hidden;
  Matrix hidden;
  Matrix pre_output;
};

struct ResidualGrads {
  Matrix input;
  Matrix w1;
  Matrix b1;
  Matrix w2;
  Matrix b2;
};

Matrix residual_forward(const Matrix& x, const ResidualBlock& block,
                        ResidualCache* cache = nullptr);
ResidualGrads residual_backward(const ResidualBlock& block, const ResidualCache& cache,
                                const Matrix& upstream);

// ---------------------------------------------------------------- conv1d

/// Valid (unpadded) cross-correlation of every kernel over each row.
struct Conv1DLayer {
  Matrix kernels;  ///< n_kernels x width
  Matrix bias;     ///< 1 x n_kernels
  std::size_t stride = 1;

  std::size_t n_kernels() const noexcept { return kernels.rows(); }
  std::size_t width() const noexcept { return kernels.cols(); }
  /// floor((n - width) / stride) + 1; throws ShapeError when n < width.
  std::size_t output_length(std::size_t n) const;
};

Conv1DLayer make_conv1d(std::size_t n_kernels, std::size_t width, std::size_t stride, Rng& rng);

struct Conv1DCache {
  Matrix input;
};

struct Conv1DGrads {
  Matrix input;
  Matrix kernels;
  Matrix bias;
};

/// Output row layout is kernel-major: kernel k occupies columns
/// [k * L_out, (k + 1) * L_out).
Matrix conv1d_forward(const Matrix& x, const Conv1DLayer& layer, Conv1DCache* cache = nullptr);
Conv1DGrads conv1d_backward(const Conv1DLayer& layer, const Conv1DCache& cache,
                            const Matrix& upstream);

// ---------------------------------------------------------------- softmax

/// Row-wise max-shifted softmax.
Matrix softmax(const Matrix& logits);

struct SoftmaxCrossEntropy {
  double loss = 0.0;  ///< mean negative log-probability of the true class
  Matrix probs;
  Matrix grad_logits;  ///< (softmax - onehot) / batch
};

SoftmaxCrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

}  // namespace tcn
