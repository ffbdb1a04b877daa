#include "tcn/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "tcn/errors.hpp"

namespace tcn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("val_fraction must lie in [0, 1)");
  }
  if (l2_lambda < 0.0) throw ArgumentError("l2_lambda must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ArgumentError("adam_epsilon must be > 0");
}

void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameter blocks");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value->rows(), p.value->cols());
      state.second_moment.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].value->same_shape(grads[k]) || !state.first_moment[k].same_shape(grads[k])) {
      throw ShapeError("adam_step: block " + params[k].name + " has shape " +
                       params[k].value->shape_string() + ", gradient " + grads[k].shape_string());
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value->values();
    auto g = grads[k].values();
    auto m = state.first_moment[k].values();
    auto v = state.second_moment[k].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
    }
  }
}

L2Result l2_penalty(std::span<const ParamRef> params, double lambda) {
  if (lambda < 0.0) throw ArgumentError("l2_penalty: lambda must be >= 0");
  L2Result out;
  double sum_sq = 0.0;
  for (const auto& p : params) {
    Matrix grad(p.value->rows(), p.value->cols());
    if (p.penalized) {
      auto w = p.value->values();
      auto g = grad.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        sum_sq += w[i] * w[i];
        g[i] = lambda * w[i];
      }
    }
    out.grads.push_back(std::move(grad));
  }
  out.penalty = 0.5 * lambda * sum_sq;
  return out;
}

Metrics evaluate(const ModelGraph& model, const Dataset& dataset) {
  if (dataset.size() == 0) throw ArgumentError("evaluate: empty dataset");
  const Matrix probs = forward_infer(model, dataset.features);
  const std::size_t c = model.n_classes;
  Metrics m;
  m.confusion.assign(c, std::vector<std::size_t>(c, 0));
  const std::vector<int> predicted = argmax_rows(probs);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int y = dataset.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ArgumentError("evaluate: label " + std::to_string(y) + " outside the model's classes");
    }
    const auto yi = static_cast<std::size_t>(y);
    ++m.confusion[yi][static_cast<std::size_t>(predicted[i])];
    if (predicted[i] == y) ++correct;
    loss -= std::log(std::max(probs(i, yi), std::numeric_limits<double>::min()));
  }
  const double n = static_cast<double>(dataset.size());
  m.accuracy = static_cast<double>(correct) / n;
  m.mean_loss = loss / n;
  return m;
}

namespace {

void require_trainable(const Dataset& ds) {
  if (ds.size() == 0) throw ArgumentError("train_loop: empty training data");
  std::set<int> present(ds.labels.begin(), ds.labels.end());
  if (present.size() < 2) throw ArgumentError("train_loop: at least 2 classes must be present");
}

TrainHistory run_training(ModelGraph& model, const Dataset& train, const Dataset& val,
                          const TrainConfig& cfg, Rng& rng) {
  require_trainable(train);
  model.validate();
  const bool monitor_train = val.size() == 0;
  const Dataset& monitor = monitor_train ? train : val;

  TrainHistory history;
  history.monitored_train_set = monitor_train;
  history.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Layer> best_layers = model.layers;
  AdamState adam;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_improvement = 0;

  ForwardOptions opts;
  opts.mode = Mode::Train;
  opts.rng = &rng;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle_each_epoch) rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix batch = gather_rows(train.features, idx);
      std::vector<int> labels;
      labels.reserve(idx.size());
      for (std::size_t i : idx) labels.push_back(train.labels[i]);

      auto fwd = forward(model, batch, opts);
      loss_sum += softmax_cross_entropy(fwd.logits, labels).loss * static_cast<double>(idx.size());
      std::vector<Matrix> grads = backward(model, fwd.cache, labels);
      auto params = model.parameters();
      if (cfg.l2_lambda > 0.0) {
        const L2Result l2 = l2_penalty(params, cfg.l2_lambda);
        for (std::size_t k = 0; k < grads.size(); ++k)
          if (params[k].penalized) grads[k] = add(grads[k], l2.grads[k]);
      }
      adam_step(params, grads, adam, cfg);
      model.mark_updated();
    }

    const Metrics mon = evaluate(model, monitor);
    history.epochs.push_back(
        {epoch, loss_sum / static_cast<double>(train.size()), mon.mean_loss, mon.accuracy});
    history.stopped_epoch = epoch;
    if (mon.mean_loss < history.best_val_loss - kEarlyStopMinDelta) {
      history.best_val_loss = mon.mean_loss;
      history.best_epoch = epoch;
      best_layers = model.layers;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.early_stop_patience) {
      break;
    }
  }
  if (history.best_epoch > 0) {
    model.layers = std::move(best_layers);
    model.mark_updated();
  }
  return history;
}

}  // namespace

TrainHistory train_loop(ModelGraph& model, const Dataset& train, const Dataset& val,
                        const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return run_training(model, train, val, cfg, rng);
}

TrainHistory train_loop(ModelGraph& model, const Dataset& train_set, const TrainConfig& cfg) {
  cfg.validate();
  require_trainable(train_set);
  Rng rng(cfg.seed);
  if (cfg.val_fraction == 0.0) return run_training(model, train_set, Dataset{}, cfg, rng);
  const DatasetSplit split =
      stratified_split(train_set, {1.0 - cfg.val_fraction, cfg.val_fraction, 0.0}, rng);
  return run_training(model, split.train, split.val, cfg, rng);
}

GradCheckReport grad_check_report(ModelGraph& model, const Matrix& batch,
                                  std::span<const int> labels, const GradCheckOptions& options) {
  if (!(options.h > 0.0)) throw ArgumentError("grad_check: step h must be > 0");
  auto params = model.parameters();
  const std::size_t count = model.parameter_count();
  if (count > options.max_parameters) {
    throw CapacityError("grad_check: model has " + std::to_string(count) +
                            " parameters, limit is " + std::to_string(options.max_parameters),
                        count);
  }

  ForwardOptions opts;
  opts.mode = Mode::Train;
  opts.dropout_enabled = false;
  opts.update_running_stats = false;
  const auto loss_at = [&] {
    return softmax_cross_entropy(forward(model, batch, opts).logits, labels).loss;
  };

  auto fwd = forward(model, batch, opts);
  std::vector<Matrix> analytic = backward(model, fwd.cache, labels);
  if (options.corrupt_first_gradient != 0.0 && !analytic.empty() && !analytic[0].empty()) {
    analytic[0].values()[0] += options.corrupt_first_gradient;
  }

  std::vector<double> layer_error(model.layers.size(), 0.0);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value->values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + options.h;
      const double up = loss_at();
      theta[i] = saved - options.h;
      const double down = loss_at();
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * options.h);
      const double a = analytic[k].values()[i];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      layer_error[params[k].layer_index] = std::max(layer_error[params[k].layer_index], err);
      report.max_relative_error = std::max(report.max_relative_error, err);
    }
  }

  double upstream_max = 0.0;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const auto type = std::string(layer_type_name(model.layers[li]));
    const bool has_params = std::any_of(params.begin(), params.end(),
                                        [&](const ParamRef& p) { return p.layer_index == li; });
    const double err = has_params ? layer_error[li] : upstream_max;
    report.per_layer_type[type] = std::max(report.per_layer_type[type], err);
    upstream_max = std::max(upstream_max, layer_error[li]);
  }
  report.per_layer_type["softmax_ce"] = report.max_relative_error;
  return report;
}

double grad_check(ModelGraph& model, const Matrix& batch, std::span<const int> labels, double h) {
  GradCheckOptions options;
  options.h = h;
  return grad_check_report(model, batch, labels, options).max_relative_error;
}

}  // namespace tcn
