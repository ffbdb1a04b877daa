#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "tcn/checkpoint.hpp"
#include "tcn/errors.hpp"
#include "tcn/featcomb.hpp"
#include "tcn/pipeline.hpp"
#include "tcn/train.hpp"

namespace py = pybind11;
using namespace tcn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    Matrix m(1, static_cast<std::size_t>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), m.values().begin());
    return m;
  }
  if (a.ndim() != 2) throw py::value_error("expected a 1-D or 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.values().begin());
  return m;
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<int> to_labels(const py::array_t<long long, py::array::c_style | py::array::forcecast>& y) {
  if (y.ndim() != 1) throw py::value_error("labels must be a 1-D array");
  return {y.data(), y.data() + y.size()};
}

Dataset make_dataset(const Array& x, const std::vector<int>& labels, std::size_t n_classes) {
  Dataset ds;
  ds.features = to_matrix(x);
  if (labels.size() != ds.features.rows()) throw py::value_error("X and y have different lengths");
  ds.labels = labels;
  for (std::size_t c = 0; c < n_classes; ++c) ds.class_names.push_back(std::to_string(c));
  for (std::size_t j = 0; j < ds.features.cols(); ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

CombinationSpec make_spec(std::size_t m, const std::string& approach, std::size_t max_combined,
                          bool augment_original, bool append_global_interaction) {
  CombinationSpec spec;
  spec.m = m;
  spec.approach = approach_from_string(approach);
  spec.max_combined = max_combined;
  spec.augment_original = augment_original;
  spec.append_global_interaction = append_global_interaction;
  return spec;
}

InteractionRule rule_from_string(const std::string& name) {
  if (name == "product") return InteractionRule::ProductSign;
  if (name == "three_way") return InteractionRule::ThreeWayProductSign;
  throw ArgumentError("unknown rule '" + name + "' (expected product or three_way)");
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["mean_loss"] = m.mean_loss;
  d["confusion"] = m.confusion;
  return d;
}

// A model together with the feature pipeline fitted on its training data.
class Estimator {
 public:
  Estimator(const std::string& kind, std::size_t n_classes, ModelConfig cfg)
      : kind_(model_kind_from_string(kind)), n_classes_(n_classes), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (n_classes_ < 2) throw ArgumentError("n_classes must be >= 2");
  }

  explicit Estimator(Checkpoint ckpt)
      : kind_(ckpt.model.kind), n_classes_(ckpt.model.n_classes), cfg_(ckpt.config),
        pipeline_(std::move(ckpt.pipeline)), model_(std::move(ckpt.model)) {}

  py::dict fit(const Array& x, const std::vector<int>& y, const TrainConfig& tc) {
    const Dataset raw = make_dataset(x, y, n_classes_);
    prepare(raw);
    const TrainHistory h = train_loop(*model_, pipeline_->apply(raw), tc);
    py::list epochs;
    for (const auto& e : h.epochs) {
      py::dict d;
      d["epoch"] = e.epoch;
      d["train_loss"] = e.train_loss;
      d["val_loss"] = e.val_loss;
      d["val_accuracy"] = e.val_accuracy;
      epochs.append(d);
    }
    py::dict out;
    out["epochs"] = epochs;
    out["best_epoch"] = h.best_epoch;
    out["stopped_epoch"] = h.stopped_epoch;
    out["best_val_loss"] = h.best_val_loss;
    return out;
  }

  py::array_t<double> predict_proba(const Array& x) const {
    const ModelGraph& model = fitted();
    return to_array(forward_infer(model, pipeline_->apply(to_matrix(x))));
  }

  std::vector<int> predict(const Array& x) const {
    const ModelGraph& model = fitted();
    return argmax_rows(forward_infer(model, pipeline_->apply(to_matrix(x))));
  }

  py::dict evaluate_xy(const Array& x, const std::vector<int>& y) const {
    const ModelGraph& model = fitted();
    return metrics_dict(evaluate(model, pipeline_->apply(make_dataset(x, y, n_classes_))));
  }

  py::dict grad_check_xy(const Array& x, const std::vector<int>& y, double h) {
    const Dataset raw = make_dataset(x, y, n_classes_);
    if (!model_) prepare(raw);
    GradCheckOptions opts;
    opts.h = h;
    const GradCheckReport r = grad_check_report(*model_, pipeline_->apply(raw.features), y, opts);
    py::dict d;
    d["max_relative_error"] = r.max_relative_error;
    d["per_layer_type"] = r.per_layer_type;
    return d;
  }

  void save(const std::filesystem::path& path) const {
    Checkpoint c;
    c.model = fitted();
    c.config = cfg_;
    c.pipeline = *pipeline_;
    for (std::size_t k = 0; k < n_classes_; ++k) c.class_names.push_back(std::to_string(k));
    c.seed = cfg_.seed;
    save_checkpoint(path, c);
  }

  std::size_t parameter_count() const { return fitted().parameter_count(); }
  std::string kind() const { return std::string(to_string(kind_)); }
  bool is_fitted() const { return model_.has_value(); }
  std::vector<std::string> feature_names() const {
    if (!pipeline_) throw StateError("model has not been fitted");
    return pipeline_->output_names();
  }

 private:
  void prepare(const Dataset& raw) {
    pipeline_ = fit_pipeline(raw, kind_, cfg_.combination);
    model_ = build_model(kind_, pipeline_->output_width(), n_classes_, cfg_);
  }

  const ModelGraph& fitted() const {
    if (!model_) throw StateError("model has not been fitted");
    return *model_;
  }

  ModelKind kind_;
  std::size_t n_classes_;
  ModelConfig cfg_;
  std::optional<FeaturePipeline> pipeline_;
  std::optional<ModelGraph> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Twisted convolutional networks: feature combination, models and training";

  auto base = py::register_exception<Error>(m, "TcnError", PyExc_RuntimeError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("binomial", &binomial, py::arg("n"), py::arg("k"));
  m.def("enumerate_subsets", &enumerate_subsets, py::arg("n"), py::arg("m"),
        py::arg("max_combined") = 100000, "All m-subsets of range(n) in lexicographic order.");
  m.def(
      "combine",
      [](const Array& x, const std::vector<Subset>& subsets, const std::string& approach) {
        const Matrix v = to_matrix(x);
        if (v.rows() != 1) throw py::value_error("combine expects one feature vector");
        return to_array(combine(v.values(), subsets, approach_from_string(approach)));
      },
      py::arg("x"), py::arg("subsets"), py::arg("approach") = "mult");
  m.def(
      "global_interaction",
      [](const Array& x, const std::string& activation) {
        const Matrix v = to_matrix(x);
        return global_interaction(v.values(), activation_from_string(activation));
      },
      py::arg("x"), py::arg("activation") = "identity");
  m.def(
      "transform",
      [](const Array& x, std::size_t m, const std::string& approach, std::size_t max_combined,
         bool augment_original, bool append_global_interaction) {
        const CombinationSpec spec =
            make_spec(m, approach, max_combined, augment_original, append_global_interaction);
        return to_array(transform_dataset(to_matrix(x), spec).values);
      },
      py::arg("x"), py::arg("m") = 2, py::arg("approach") = "mult",
      py::arg("max_combined") = 100000, py::arg("augment_original") = false,
      py::arg("append_global_interaction") = false,
      "Row-wise feature combination of a samples x features array.");
  m.def(
      "synth_interaction",
      [](std::size_t n_samples, std::size_t n_features, const std::string& rule, double noise_std,
         std::uint64_t seed) {
        Rng rng(seed);
        const Dataset ds = synth_interaction(n_samples, n_features, rule_from_string(rule), noise_std, rng);
        return py::make_tuple(to_array(ds.features), ds.labels);
      },
      py::arg("n_samples"), py::arg("n_features"), py::arg("rule") = "product",
      py::arg("noise_std") = 0.1, py::arg("seed") = 0,
      "Gaussian features labelled by the sign of a product; returns (X, y).");
  m.def(
      "load_csv",
      [](const std::filesystem::path& path, const LabelColumn& label_column, bool has_header) {
        const Dataset ds = load_csv(path, label_column, has_header);
        py::dict d;
        d["X"] = to_array(ds.features);
        d["y"] = ds.labels;
        d["class_names"] = ds.class_names;
        d["feature_names"] = ds.feature_names;
        return d;
      },
      py::arg("path"), py::arg("label_column"), py::arg("has_header") = true);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](double learning_rate, std::size_t batch_size, std::size_t max_epochs,
                       double l2_lambda, std::size_t early_stop_patience, double val_fraction,
                       std::uint64_t seed) {
             TrainConfig c;
             c.learning_rate = learning_rate;
             c.batch_size = batch_size;
             c.max_epochs = max_epochs;
             c.l2_lambda = l2_lambda;
             c.early_stop_patience = early_stop_patience;
             c.val_fraction = val_fraction;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("learning_rate") = 0.001, py::arg("batch_size") = 10,
           py::arg("max_epochs") = 200, py::arg("l2_lambda") = 1e-4,
           py::arg("early_stop_patience") = 20, py::arg("val_fraction") = 0.1,
           py::arg("seed") = 0)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("l2_lambda", &TrainConfig::l2_lambda)
      .def_readwrite("early_stop_patience", &TrainConfig::early_stop_patience)
      .def_readwrite("val_fraction", &TrainConfig::val_fraction)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<Estimator>(m, "Model")
      .def(py::init([](const std::string& kind, std::size_t n_classes, std::size_t m,
                       const std::string& approach, std::size_t hidden1, std::size_t hidden2,
                       std::size_t n_residual_blocks, double dropout_rate, bool use_batchnorm,
                       std::uint64_t seed) {
             ModelConfig cfg;
             cfg.combination = make_spec(m, approach, 100000, false, false);
             cfg.hidden1 = hidden1;
             cfg.hidden2 = hidden2;
             cfg.n_residual_blocks = n_residual_blocks;
             cfg.dropout_rate = dropout_rate;
             cfg.use_batchnorm = use_batchnorm;
             cfg.seed = seed;
             return Estimator(kind, n_classes, cfg);
           }),
           py::arg("kind") = "tcn", py::arg("n_classes") = 2, py::arg("m") = 2,
           py::arg("approach") = "mult", py::arg("hidden1") = 20, py::arg("hidden2") = 10,
           py::arg("n_residual_blocks") = 1, py::arg("dropout_rate") = 0.5,
           py::arg("use_batchnorm") = true, py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& p) { return Estimator(load_checkpoint(p)); },
          py::arg("path"))
      .def("fit", &Estimator::fit, py::arg("X"), py::arg("y"), py::arg("config") = TrainConfig{},
           "Fit the feature pipeline and train; returns the training history.")
      .def("predict_proba", &Estimator::predict_proba, py::arg("X"))
      .def("predict", &Estimator::predict, py::arg("X"))
      .def("evaluate", &Estimator::evaluate_xy, py::arg("X"), py::arg("y"))
      .def("grad_check", &Estimator::grad_check_xy, py::arg("X"), py::arg("y"),
           py::arg("h") = 1e-5)
      .def("save", &Estimator::save, py::arg("path"))
      .def_property_readonly("parameter_count", &Estimator::parameter_count)
      .def_property_readonly("kind", &Estimator::kind)
      .def_property_readonly("is_fitted", &Estimator::is_fitted)
      .def_property_readonly("feature_names", &Estimator::feature_names);
}
