#include "tcn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "tcn/errors.hpp"

namespace tcn {

namespace {

void require_cols(const Matrix& x, std::size_t cols, const char* what) {
  if (x.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) +
                     " columns, got " + x.shape_string());
  }
}

void require_same(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

// x * W^T + b
Matrix affine(const Matrix& x, const Matrix& weights, const Matrix& bias) {
  Matrix out(x.rows(), weights.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    for (std::size_t o = 0; o < weights.rows(); ++o) {
      auto w = weights.row(o);
      double acc = bias(0, o);
      for (std::size_t k = 0; k < w.size(); ++k) acc += xi[k] * w[k];
      out(i, o) = acc;
    }
  }
  return out;
}

struct AffineGrads {
  Matrix input;
  Matrix weights;
  Matrix bias;
};

AffineGrads affine_backward(const Matrix& x, const Matrix& weights, const Matrix& grad_out) {
  return {matmul(grad_out, weights), matmul(transpose(grad_out), x), column_sums(grad_out)};
}

Matrix apply_activation(const Matrix& pre, Activation a) {
  if (a == Activation::Identity) return pre;
  return relu(pre);
}

Matrix activation_backward(const Matrix& pre, const Matrix& upstream, Activation a) {
  if (a == Activation::Identity) return upstream;
  return relu_backward(pre, upstream);
}

}  // namespace

Matrix he_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ArgumentError("he_init: fan_in and fan_out must be >= 1");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  return Matrix(fan_out, fan_in, rng_normal(rng, fan_in * fan_out, 0.0, stddev));
}

DenseLayer make_dense(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  return {he_init(in, out, rng), Matrix(1, out), activation};
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer, DenseCache* cache) {
  require_cols(x, layer.input_dim(), "dense_forward");
  Matrix pre = affine(x, layer.weights, layer.bias);
  Matrix out = apply_activation(pre, layer.activation);
  if (cache) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
  }
  return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache,
                          const Matrix& upstream) {
  require_same(cache.pre_activation, upstream, "dense_backward");
  const Matrix grad_pre = activation_backward(cache.pre_activation, upstream, layer.activation);
  auto g = affine_backward(cache.input, layer.weights, grad_pre);
  return {std::move(g.input), std::move(g.weights), std::move(g.bias)};
}

Matrix relu(const Matrix& x) {
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Matrix relu_backward(const Matrix& x, const Matrix& upstream) {
  require_same(x, upstream, "relu_backward");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.values()[i] = x.values()[i] > 0.0 ? upstream.values()[i] : 0.0;
  return out;
}

BatchNormLayer make_batchnorm(std::size_t dim) {
  BatchNormLayer bn;
  bn.gamma = Matrix(1, dim, 1.0);
  bn.beta = Matrix(1, dim, 0.0);
  bn.running_mean = Matrix(1, dim, 0.0);
  bn.running_var = Matrix(1, dim, 1.0);
  return bn;
}

Matrix batchnorm_infer(const Matrix& x, const BatchNormLayer& layer, BatchNormCache* cache) {
  require_cols(x, layer.dim(), "batchnorm_forward");
  const std::size_t d = layer.dim();
  std::vector<double> inv_std(d);
  for (std::size_t j = 0; j < d; ++j)
    inv_std[j] = 1.0 / std::sqrt(layer.running_var(0, j) + layer.epsilon);
  Matrix normalized(x.rows(), d);
  Matrix out(x.rows(), d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      normalized(i, j) = (x(i, j) - layer.running_mean(0, j)) * inv_std[j];
      out(i, j) = layer.gamma(0, j) * normalized(i, j) + layer.beta(0, j);
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->batch_statistics = false;
  }
  return out;
}

Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& layer, Mode mode, BatchNormCache* cache,
                         bool update_running) {
  if (mode == Mode::Infer) return batchnorm_infer(x, layer, cache);
  require_cols(x, layer.dim(), "batchnorm_forward");
  if (x.rows() < 2) throw ArgumentError("batchnorm_forward: Train mode needs at least 2 rows");

  const std::size_t b = x.rows();
  const std::size_t d = layer.dim();
  const double inv_b = 1.0 / static_cast<double>(b);
  std::vector<double> mean(d, 0.0);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
  for (double& m : mean) m *= inv_b;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < d; ++j) var[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  for (double& v : var) v *= inv_b;

  std::vector<double> inv_std(d);
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + layer.epsilon);

  Matrix normalized(b, d);
  Matrix out(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      normalized(i, j) = (x(i, j) - mean[j]) * inv_std[j];
      out(i, j) = layer.gamma(0, j) * normalized(i, j) + layer.beta(0, j);
    }
  }
  if (update_running) {
    for (std::size_t j = 0; j < d; ++j) {
      layer.running_mean(0, j) =
          layer.momentum * layer.running_mean(0, j) + (1.0 - layer.momentum) * mean[j];
      layer.running_var(0, j) =
          layer.momentum * layer.running_var(0, j) + (1.0 - layer.momentum) * var[j];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->batch_statistics = true;
  }
  return out;
}

BatchNormGrads batchnorm_backward(const BatchNormLayer& layer, const BatchNormCache& cache,
                                  const Matrix& upstream) {
  require_same(cache.normalized, upstream, "batchnorm_backward");
  const std::size_t b = upstream.rows();
  const std::size_t d = upstream.cols();
  BatchNormGrads g{Matrix(b, d), Matrix(1, d), Matrix(1, d)};
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      g.gamma(0, j) += upstream(i, j) * cache.normalized(i, j);
      g.beta(0, j) += upstream(i, j);
    }
  }
  if (!cache.batch_statistics) {
    // Statistics are constants: the layer is affine in x.
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < d; ++j)
        g.input(i, j) = upstream(i, j) * layer.gamma(0, j) * cache.inv_std[j];
    return g;
  }
  // dx = inv_std / b * (b * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
  const double bd = static_cast<double>(b);
  for (std::size_t j = 0; j < d; ++j) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double dxhat = upstream(i, j) * layer.gamma(0, j);
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * cache.normalized(i, j);
    }
    for (std::size_t i = 0; i < b; ++i) {
      const double dxhat = upstream(i, j) * layer.gamma(0, j);
      g.input(i, j) = cache.inv_std[j] / bd *
                      (bd * dxhat - sum_dxhat - cache.normalized(i, j) * sum_dxhat_xhat);
    }
  }
  return g;
}

Matrix dropout_forward(const Matrix& x, const DropoutLayer& layer, Mode mode, Rng* rng,
                       DropoutCache* cache) {
  if (layer.rate < 0.0 || layer.rate >= 1.0) {
    throw ArgumentError("dropout rate must lie in [0, 1)");
  }
  if (mode == Mode::Infer || layer.rate == 0.0) {
    if (cache) cache->mask = Matrix(x.rows(), x.cols(), 1.0);
    return x;
  }
  if (rng == nullptr) throw ArgumentError("dropout_forward: Train mode requires an Rng");
  const double keep_scale = 1.0 / (1.0 - layer.rate);
  Matrix mask(x.rows(), x.cols());
  for (double& m : mask.values()) m = rng->uniform() < layer.rate ? 0.0 : keep_scale;
  Matrix out = hadamard(x, mask);
  if (cache) cache->mask = std::move(mask);
  return out;
}

Matrix dropout_backward(const DropoutCache& cache, const Matrix& upstream) {
  return hadamard(upstream, cache.mask);
}

ResidualBlock make_residual(std::size_t dim, Rng& rng) {
  ResidualBlock block;
  block.w1 = he_init(dim, dim, rng);
  block.b1 = Matrix(1, dim);
  block.w2 = he_init(dim, dim, rng);
  block.b2 = Matrix(1, dim);
  return block;
}

ResidualBlock zero_residual(std::size_t dim) {
  return {Matrix(dim, dim), Matrix(1, dim), Matrix(dim, dim), Matrix(1, dim)};
}

Matrix residual_forward(const Matrix& x, const ResidualBlock& block, ResidualCache* cache) {
  require_cols(x, block.dim(), "residual_forward");
  Matrix pre_hidden = affine(x, block.w1, block.b1);
  Matrix hidden = relu(pre_hidden);
  Matrix pre_output = affine(hidden, block.w2, block.b2);
  Matrix out = add(relu(pre_output), x);
  if (cache) {
    cache->input = x;
    cache->pre_hidden = std::move(pre_hidden);
    cache->hidden = std::move(hidden);
    cache->pre_output = std::move(pre_output);
  }
  return out;
}

ResidualGrads residual_backward(const ResidualBlock& block, const ResidualCache& cache,
                                const Matrix& upstream) {
  require_same(cache.input, upstream, "residual_backward");
  const Matrix grad_pre_output = relu_backward(cache.pre_output, upstream);
  auto outer = affine_backward(cache.hidden, block.w2, grad_pre_output);
  const Matrix grad_pre_hidden = relu_backward(cache.pre_hidden, outer.input);
  auto inner = affine_backward(cache.input, block.w1, grad_pre_hidden);
  return {add(upstream, inner.input), std::move(inner.weights), std::move(inner.bias),
          std::move(outer.weights), std::move(outer.bias)};
}

std::size_t Conv1DLayer::output_length(std::size_t n) const {
  if (n < width()) {
    throw ShapeError("conv1d: input length " + std::to_string(n) + " shorter than kernel width " +
                     std::to_string(width()));
  }
  return (n - width()) / stride + 1;
}

Conv1DLayer make_conv1d(std::size_t n_kernels, std::size_t width, std::size_t stride, Rng& rng) {
  if (width == 0 || stride == 0) throw ArgumentError("conv1d: width and stride must be >= 1");
  return {he_init(width, n_kernels, rng), Matrix(1, n_kernels), stride};
}

Matrix conv1d_forward(const Matrix& x, const Conv1DLayer& layer, Conv1DCache* cache) {
  if (layer.width() == 0 || layer.stride == 0)
    throw ArgumentError("conv1d: width and stride must be >= 1");
  const std::size_t len = layer.output_length(x.cols());
  const std::size_t nk = layer.n_kernels();
  Matrix out(x.rows(), nk * len);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < nk; ++k) {
      auto kernel = layer.kernels.row(k);
      for (std::size_t p = 0; p < len; ++p) {
        double acc = layer.bias(0, k);
        const std::size_t start = p * layer.stride;
        for (std::size_t w = 0; w < kernel.size(); ++w) acc += kernel[w] * x(i, start + w);
        out(i, k * len + p) = acc;
      }
    }
  }
  if (cache) cache->input = x;
  return out;
}

Conv1DGrads conv1d_backward(const Conv1DLayer& layer, const Conv1DCache& cache,
                            const Matrix& upstream) {
  const Matrix& x = cache.input;
  const std::size_t len = layer.output_length(x.cols());
  const std::size_t nk = layer.n_kernels();
  if (upstream.rows() != x.rows() || upstream.cols() != nk * len) {
    throw ShapeError("conv1d_backward: upstream " + upstream.shape_string() + " does not match " +
                     std::to_string(x.rows()) + "x" + std::to_string(nk * len));
  }
  Conv1DGrads g{Matrix(x.rows(), x.cols()), Matrix(nk, layer.width()), Matrix(1, nk)};
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < nk; ++k) {
      for (std::size_t p = 0; p < len; ++p) {
        const double up = upstream(i, k * len + p);
        const std::size_t start = p * layer.stride;
        g.bias(0, k) += up;
        for (std::size_t w = 0; w < layer.width(); ++w) {
          g.kernels(k, w) += up * x(i, start + w);
          g.input(i, start + w) += up * layer.kernels(k, w);
        }
      }
    }
  }
  return g;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    auto dst = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      dst[j] = std::exp(row[j] - peak);
      total += dst[j];
    }
    for (double& v : dst) v /= total;
  }
  return out;
}

SoftmaxCrossEntropy softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + logits.shape_string());
  }
  if (logits.rows() == 0) throw ArgumentError("softmax_cross_entropy: empty batch");
  const std::size_t c = logits.cols();
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw ArgumentError("label " + std::to_string(label) + " outside [0, " + std::to_string(c) +
                          ")");
    }
  }
  SoftmaxCrossEntropy result;
  result.probs = softmax(logits);
  result.grad_logits = result.probs;
  const double inv_b = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum_exp = 0.0;
    for (double v : row) sum_exp += std::exp(v - peak);
    const auto y = static_cast<std::size_t>(labels[i]);
    total += std::log(sum_exp) - (row[y] - peak);
    result.grad_logits(i, y) -= 1.0;
  }
  for (double& v : result.grad_logits.values()) v *= inv_b;
  result.loss = total * inv_b;
  return result;
}

}  // namespace tcn
