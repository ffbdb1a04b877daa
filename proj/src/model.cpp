#include "tcn/model.hpp"

#include <type_traits>

#include "tcn/errors.hpp"

namespace tcn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::size_t kCnnKernels = 8;
constexpr std::size_t kCnnWidth = 3;

void require_classes(std::size_t input_dim, std::size_t n_classes) {
  if (n_classes < 2) throw ArgumentError("a classifier needs at least 2 classes");
  if (input_dim == 0) throw ArgumentError("input dimension must be >= 1");
}

// Parameter blocks of one layer, in checkpoint/gradient order.
template <typename LayerT, typename Fn>
void for_each_block(LayerT& layer, Fn&& fn) {
  using L = std::remove_const_t<LayerT>;
  if constexpr (std::is_same_v<L, DenseLayer>) {
    fn("weights", layer.weights, true);
    fn("bias", layer.bias, false);
  } else if constexpr (std::is_same_v<L, ResidualBlock>) {
    fn("w1", layer.w1, true);
    fn("b1", layer.b1, false);
    fn("w2", layer.w2, true);
    fn("b2", layer.b2, false);
  } else if constexpr (std::is_same_v<L, BatchNormLayer>) {
    fn("gamma", layer.gamma, false);
    fn("beta", layer.beta, false);
  } else if constexpr (std::is_same_v<L, Conv1DLayer>) {
    fn("kernels", layer.kernels, true);
    fn("bias", layer.bias, false);
  }
}

// Stack shared by the TCN and MLP builders, after the residual section.
void append_head(ModelGraph& g, std::size_t n_classes, const ModelConfig& cfg, Rng& rng) {
  if (cfg.use_batchnorm) g.layers.emplace_back(make_batchnorm(cfg.hidden1));
  g.layers.emplace_back(ReluLayer{});
  g.layers.emplace_back(DropoutLayer{cfg.dropout_rate});
  g.layers.emplace_back(make_dense(cfg.hidden1, cfg.hidden2, Activation::ReLU, rng));
  g.layers.emplace_back(make_dense(cfg.hidden2, n_classes, Activation::Identity, rng));
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::TCN: return "tcn";
    case ModelKind::MLP: return "mlp";
    case ModelKind::Logistic: return "logistic";
    case ModelKind::CNN1D: return "cnn1d";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "tcn") return ModelKind::TCN;
  if (name == "mlp") return ModelKind::MLP;
  if (name == "logistic") return ModelKind::Logistic;
  if (name == "cnn1d") return ModelKind::CNN1D;
  throw ArgumentError("unknown model kind '" + std::string(name) +
                      "' (expected tcn, mlp, logistic or cnn1d)");
}

void ModelConfig::validate() const {
  if (hidden1 == 0 || hidden2 == 0) throw ArgumentError("hidden widths must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ArgumentError("dropout_rate must lie in [0, 1)");
  }
}

std::string_view layer_type_name(const Layer& layer) noexcept {
  return std::visit(overloaded{
                        [](const DenseLayer&) { return std::string_view("dense"); },
                        [](const ResidualBlock&) { return std::string_view("residual"); },
                        [](const BatchNormLayer&) { return std::string_view("batchnorm"); },
                        [](const ReluLayer&) { return std::string_view("relu"); },
                        [](const DropoutLayer&) { return std::string_view("dropout"); },
                        [](const Conv1DLayer&) { return std::string_view("conv1d"); },
                    },
                    layer);
}

std::vector<ParamRef> ModelGraph::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::visit(
        [&](auto& layer) {
          for_each_block(layer, [&](const char* name, Matrix& m, bool penalized) {
            out.push_back({std::to_string(i) + "." + std::string(layer_type_name(layers[i])) +
                               "." + name,
                           &m, penalized, i});
          });
        },
        layers[i]);
  }
  return out;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) {
    std::visit(
        [&](const auto& layer) {
          for_each_block(layer, [&](const char*, const Matrix& m, bool) { total += m.size(); });
        },
        l);
  }
  return total;
}

void ModelGraph::validate() const {
  std::size_t width = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto mismatch = [&](std::size_t expected) {
      return ShapeError("layer " + std::to_string(i) + " (" +
                        std::string(layer_type_name(layers[i])) + ") expects width " +
                        std::to_string(expected) + ", receives " + std::to_string(width));
    };
    std::visit(overloaded{
                   [&](const DenseLayer& d) {
                     if (d.input_dim() != width) throw mismatch(d.input_dim());
                     if (d.bias.cols() != d.output_dim()) throw ShapeError("dense bias width");
                     width = d.output_dim();
                   },
                   [&](const ResidualBlock& r) {
                     if (r.dim() != width) throw mismatch(r.dim());
                     if (r.w1.cols() != r.dim() || r.w2.rows() != r.dim() ||
                         r.w2.cols() != r.dim()) {
                       throw ShapeError("residual weights must be square and equal");
                     }
                   },
                   [&](const BatchNormLayer& b) {
                     if (b.dim() != width) throw mismatch(b.dim());
                   },
                   [](const ReluLayer&) {},
                   [](const DropoutLayer&) {},
                   [&](const Conv1DLayer& c) {
                     width = c.n_kernels() * c.output_length(width);
                   },
               },
               layers[i]);
  }
  if (width != n_classes) {
    throw ShapeError("final layer width " + std::to_string(width) + " != n_classes " +
                     std::to_string(n_classes));
  }
}

ModelGraph build_tcn(std::size_t input_dim, std::size_t n_classes, const ModelConfig& cfg,
                     Rng& rng) {
  require_classes(input_dim, n_classes);
  cfg.validate();
  ModelGraph g;
  g.kind = ModelKind::TCN;
  g.input_dim = input_dim;
  g.n_classes = n_classes;
  g.layers.emplace_back(make_dense(input_dim, cfg.hidden1, Activation::ReLU, rng));
  for (std::size_t i = 0; i < cfg.n_residual_blocks; ++i)
    g.layers.emplace_back(make_residual(cfg.hidden1, rng));
  append_head(g, n_classes, cfg, rng);
  return g;
}

ModelGraph build_tcn(std::size_t input_dim, std::size_t n_classes, const ModelConfig& cfg) {
  Rng rng(cfg.seed);
  return build_tcn(input_dim, n_classes, cfg, rng);
}

ModelGraph build_baseline(ModelKind kind, std::size_t input_dim, std::size_t n_classes,
                          const ModelConfig& cfg, Rng& rng) {
  require_classes(input_dim, n_classes);
  cfg.validate();
  ModelGraph g;
  g.kind = kind;
  g.input_dim = input_dim;
  g.n_classes = n_classes;
  switch (kind) {
    case ModelKind::Logistic:
      g.layers.emplace_back(make_dense(input_dim, n_classes, Activation::Identity, rng));
      break;
    case ModelKind::MLP:
      g.layers.emplace_back(make_dense(input_dim, cfg.hidden1, Activation::ReLU, rng));
      append_head(g, n_classes, cfg, rng);
      break;
    case ModelKind::CNN1D: {
      if (input_dim < kCnnWidth) {
        throw ArgumentError("cnn1d baseline needs at least " + std::to_string(kCnnWidth) +
                            " input features");
      }
      Conv1DLayer conv = make_conv1d(kCnnKernels, kCnnWidth, 1, rng);
      const std::size_t conv_width = kCnnKernels * conv.output_length(input_dim);
      g.layers.emplace_back(std::move(conv));
      g.layers.emplace_back(ReluLayer{});
      g.layers.emplace_back(make_dense(conv_width, cfg.hidden2, Activation::ReLU, rng));
      g.layers.emplace_back(make_dense(cfg.hidden2, n_classes, Activation::Identity, rng));
      break;
    }
    case ModelKind::TCN:
      throw ArgumentError("build_baseline: use build_tcn for the TCN");
  }
  return g;
}

ModelGraph build_baseline(ModelKind kind, std::size_t input_dim, std::size_t n_classes,
                          const ModelConfig& cfg) {
  Rng rng(cfg.seed);
  return build_baseline(kind, input_dim, n_classes, cfg, rng);
}

ModelGraph build_model(ModelKind kind, std::size_t input_dim, std::size_t n_classes,
                       const ModelConfig& cfg) {
  return kind == ModelKind::TCN ? build_tcn(input_dim, n_classes, cfg)
                                : build_baseline(kind, input_dim, n_classes, cfg);
}

ForwardResult forward(ModelGraph& model, const Matrix& batch, const ForwardOptions& options) {
  if (batch.cols() != model.input_dim) {
    throw ShapeError("forward: model expects " + std::to_string(model.input_dim) +
                     " features, batch is " + batch.shape_string());
  }
  const bool train = options.mode == Mode::Train;
  ForwardResult result;
  result.cache.train = train;
  result.cache.generation = model.generation;
  if (train) result.cache.layers.reserve(model.layers.size());

  Matrix act = batch;
  for (auto& layer : model.layers) {
    LayerCache cache;
    act = std::visit(
        overloaded{
            [&](const DenseLayer& d) {
              if (!train) return dense_forward(act, d);
              return dense_forward(act, d, &cache.emplace<DenseCache>());
            },
            [&](const ResidualBlock& r) {
              if (!train) return residual_forward(act, r);
              return residual_forward(act, r, &cache.emplace<ResidualCache>());
            },
            [&](BatchNormLayer& b) {
              if (!train) return batchnorm_infer(act, b);
              auto* c = &cache.emplace<BatchNormCache>();
              if (act.rows() < 2) return batchnorm_infer(act, b, c);
              return batchnorm_forward(act, b, Mode::Train, c, options.update_running_stats);
            },
            [&](const ReluLayer&) {
              if (train) cache.emplace<Matrix>(act);
              return relu(act);
            },
            [&](const DropoutLayer& d) {
              const Mode mode = train && options.dropout_enabled ? Mode::Train : Mode::Infer;
              if (!train) return dropout_forward(act, d, mode, options.rng);
              return dropout_forward(act, d, mode, options.rng, &cache.emplace<DropoutCache>());
            },
            [&](const Conv1DLayer& c) {
              if (!train) return conv1d_forward(act, c);
              return conv1d_forward(act, c, &cache.emplace<Conv1DCache>());
            },
        },
        layer);
    if (train) result.cache.layers.push_back(std::move(cache));
  }
  result.probs = softmax(act);
  result.logits = std::move(act);
  result.cache.probs = result.probs;
  return result;
}

Matrix forward_infer(const ModelGraph& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim) {
    throw ShapeError("forward: model expects " + std::to_string(model.input_dim) +
                     " features, batch is " + batch.shape_string());
  }
  Matrix act = batch;
  for (const auto& layer : model.layers) {
    act = std::visit(overloaded{
                         [&](const DenseLayer& d) { return dense_forward(act, d); },
                         [&](const ResidualBlock& r) { return residual_forward(act, r); },
                         [&](const BatchNormLayer& b) { return batchnorm_infer(act, b); },
                         [&](const ReluLayer&) { return relu(act); },
                         [&](const DropoutLayer&) { return act; },
                         [&](const Conv1DLayer& c) { return conv1d_forward(act, c); },
                     },
                     layer);
  }
  return softmax(act);
}

std::vector<Matrix> backward(const ModelGraph& model, const ForwardCache& cache,
                             std::span<const int> labels) {
  if (!cache.train) throw StateError("backward needs a cache from a Train-mode forward");
  if (cache.generation != model.generation) {
    throw StateError("stale forward cache: parameters changed since the forward pass");
  }
  if (cache.layers.size() != model.layers.size()) {
    throw StateError("forward cache does not match the model's layer count");
  }
  const Matrix& probs = cache.probs;
  if (labels.size() != probs.rows()) {
    throw ShapeError("backward: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(probs.rows()));
  }
  Matrix grad = probs;
  const double inv_b = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw ArgumentError("label " + std::to_string(y) + " out of range");
    }
    grad(i, static_cast<std::size_t>(y)) -= 1.0;
  }
  for (double& v : grad.values()) v *= inv_b;

  std::vector<std::vector<Matrix>> per_layer(model.layers.size());
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const LayerCache& lc = cache.layers[li];
    auto& out = per_layer[li];
    grad = std::visit(
        overloaded{
            [&](const DenseLayer& d) {
              auto g = dense_backward(d, std::get<DenseCache>(lc), grad);
              out.push_back(std::move(g.weights));
              out.push_back(std::move(g.bias));
              return std::move(g.input);
            },
            [&](const ResidualBlock& r) {
              auto g = residual_backward(r, std::get<ResidualCache>(lc), grad);
              out.push_back(std::move(g.w1));
              out.push_back(std::move(g.b1));
              out.push_back(std::move(g.w2));
              out.push_back(std::move(g.b2));
              return std::move(g.input);
            },
            [&](const BatchNormLayer& b) {
              auto g = batchnorm_backward(b, std::get<BatchNormCache>(lc), grad);
              out.push_back(std::move(g.gamma));
              out.push_back(std::move(g.beta));
              return std::move(g.input);
            },
            [&](const ReluLayer&) { return relu_backward(std::get<Matrix>(lc), grad); },
            [&](const DropoutLayer&) { return dropout_backward(std::get<DropoutCache>(lc), grad); },
            [&](const Conv1DLayer& c) {
              auto g = conv1d_backward(c, std::get<Conv1DCache>(lc), grad);
              out.push_back(std::move(g.kernels));
              out.push_back(std::move(g.bias));
              return std::move(g.input);
            },
        },
        model.layers[li]);
  }
  std::vector<Matrix> flat;
  for (auto& blocks : per_layer)
    for (auto& m : blocks) flat.push_back(std::move(m));
  return flat;
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j)
      if (probs(i, j) > probs(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ModelGraph& model, const Matrix& batch) {
  return argmax_rows(forward_infer(model, batch));
}

}  // namespace tcn
