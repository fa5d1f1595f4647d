// awfnet._core: numpy-facing bindings over the C++ library. Functional ops
// run in double precision; the AwfNet class wraps the float training network.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "awfnet/checkpoint.hpp"
#include "awfnet/gradsuite.hpp"
#include "awfnet/train.hpp"

namespace py = pybind11;
using namespace awfnet;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> tensor_from(const Arr& a, int expected_ndim,
                           bool requires_grad = false) {
  if (a.ndim() != expected_ndim)
    throw ContractError("expected a " + std::to_string(expected_ndim) +
                        "-d array, got " + std::to_string(a.ndim()) + "-d");
  Shape shape(a.ndim());
  std::size_t n = 1;
  for (int i = 0; i < a.ndim(); ++i) {
    shape[i] = static_cast<int>(a.shape(i));
    n *= static_cast<std::size_t>(a.shape(i));
  }
  std::vector<double> data(a.data(), a.data() + n);
  return Tensor<double>::from_data(std::move(shape), std::move(data),
                                   requires_grad);
}

py::array array_from(const std::vector<double>& data, const Shape& shape) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<double> out(dims);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

py::array array_from_tensor(const Tensor<double>& t) {
  return array_from(t.data(), t.shape());
}

std::vector<int> targets_from(const py::array_t<long, py::array::forcecast>& y) {
  std::vector<int> out(y.size());
  for (py::ssize_t i = 0; i < y.size(); ++i) out[i] = static_cast<int>(y.data()[i]);
  return out;
}

// Loss entry point shared by the four bindings: returns value, per-sample
// losses, and the analytic logit gradient of the mean loss.
py::dict loss_result(const Arr& logits_arr, const std::vector<int>& targets,
                     const LossConfig& cfg) {
  auto logits = tensor_from(logits_arr, 2, /*requires_grad=*/true);
  auto out = compute_loss(logits, targets, cfg);
  out.value.backward();
  py::dict d;
  d["value"] = out.value.item();
  d["per_sample"] = array_from(
      out.per_sample, {static_cast<int>(out.per_sample.size())});
  d["grad"] = array_from(logits.grad(), logits.shape());
  return d;
}

PredictionSet prediction_set(const Arr& probs,
                             const py::array_t<long, py::array::forcecast>& labels,
                             int positive_class) {
  if (probs.ndim() != 2) throw ContractError("probs must be [N, C]");
  PredictionSet p;
  p.num_classes = static_cast<int>(probs.shape(1));
  p.positive_class = positive_class;
  p.probs.assign(probs.data(), probs.data() + probs.size());
  for (py::ssize_t i = 0; i < labels.size(); ++i)
    p.labels.push_back(static_cast<int>(labels.data()[i]));
  return p;
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  const auto& names = metric_column_names();
  const auto values = metric_column_values(r);
  for (std::size_t i = 0; i < names.size(); ++i) d[names[i].c_str()] = values[i];
  d["confusion"] = r.confusion;
  d["degenerate"] = r.degenerate;
  return d;
}

LossConfig loss_config(const std::string& kind, double alpha, double lambda,
                       double t, double gamma, const std::vector<long>& counts,
                       bool convex) {
  LossConfig cfg;
  cfg.kind = loss_kind_from_name(kind);
  cfg.alpha = alpha;
  cfg.lambda = lambda;
  cfg.t = t;
  cfg.focal_gamma = gamma;
  cfg.class_counts = counts;
  cfg.sign = convex ? SignConvention::convex : SignConvention::literal;
  return cfg;
}

class PyAwfNet {
 public:
  PyAwfNet(const std::string& stem, std::vector<int> channels, int blocks,
           int num_classes, int input_size, int groups, int expansion,
           const std::string& variant, bool mixer_only, std::uint64_t seed) {
    spec_.stem = stem_kind_from_name(stem);
    spec_.stem_channels = std::move(channels);
    spec_.num_awf_blocks = blocks;
    spec_.num_classes = num_classes;
    spec_.input_h = spec_.input_w = input_size;
    cfg_.groups = groups;
    cfg_.expansion_ratio = expansion;
    cfg_.variant = weighting_variant_from_name(variant);
    cfg_.awf_mixer = !mixer_only;
    net_ = std::make_unique<AwfNet<float>>(spec_, cfg_, seed);
  }

  py::array forward(const Arr& x, bool train) {
    if (x.ndim() != 4) throw ContractError("input must be [B, C, H, W]");
    std::vector<float> data(x.data(), x.data() + x.size());
    Shape shape(4);
    for (int i = 0; i < 4; ++i) shape[i] = static_cast<int>(x.shape(i));
    auto logits = net_->forward(Tensor<float>::from_data(shape, std::move(data)),
                                train ? Mode::train : Mode::eval);
    std::vector<double> out(logits.data().begin(), logits.data().end());
    return array_from(out, logits.shape());
  }

  std::int64_t parameter_count() const {
    return net_->registry().parameter_count();
  }
  int groups() const { return net_->config().groups; }
  void save(const std::string& path) { save_checkpoint(path, net_->registry()); }
  void load(const std::string& path) { load_checkpoint(path, net_->registry()); }

 private:
  NetworkSpec spec_;
  AwfConfig cfg_;
  std::unique_ptr<AwfNet<float>> net_;
};

py::dict dataset_dict(const Dataset& ds) {
  auto split_to = [&](const std::vector<Sample>& split) {
    std::vector<py::ssize_t> dims = {static_cast<py::ssize_t>(split.size()), 1,
                                     ds.height, ds.width};
    py::array_t<float> x(dims);
    py::array_t<long> y(static_cast<py::ssize_t>(split.size()));
    float* xp = x.mutable_data();
    long* yp = y.mutable_data();
    for (std::size_t i = 0; i < split.size(); ++i) {
      std::copy(split[i].pixels.begin(), split[i].pixels.end(),
                xp + i * split[i].pixels.size());
      yp[i] = split[i].label;
    }
    return py::make_tuple(x, y);
  };
  py::dict d;
  d["train"] = split_to(ds.train);
  d["val"] = split_to(ds.val);
  d["test"] = split_to(ds.test);
  d["num_classes"] = ds.num_classes;
  return d;
}

DatasetSpec dataset_spec(int samples, const std::vector<double>& ratio,
                         int size, std::uint64_t seed, double contrast,
                         double cycles, double slope) {
  DatasetSpec spec;
  spec.num_samples = samples;
  spec.class_ratio = ratio;
  spec.image_h = spec.image_w = size;
  spec.seed = seed;
  spec.grating_contrast = contrast;
  spec.grating_cycles = cycles;
  spec.spectral_slope = slope;
  return spec;
}

py::dict run_training(int samples, const std::vector<double>& ratio, int size,
                      std::uint64_t seed, double contrast, double cycles,
                      double slope, const std::string& stem,
                      std::vector<int> channels, int blocks, int groups,
                      int expansion, const std::string& variant,
                      bool mixer_only, const std::string& loss, double alpha,
                      double lambda, double t, double gamma, double lr,
                      int batch, int epochs, int patience, double rotation,
                      const std::string& out_dir) {
  const DatasetSpec dspec =
      dataset_spec(samples, ratio, size, seed, contrast, cycles, slope);
  const Dataset ds = load_dataset(dspec);
  NetworkSpec nspec;
  nspec.stem = stem_kind_from_name(stem);
  nspec.stem_channels = std::move(channels);
  nspec.num_awf_blocks = blocks;
  nspec.num_classes = ds.num_classes;
  nspec.input_h = ds.height;
  nspec.input_w = ds.width;
  AwfConfig acfg;
  acfg.groups = groups;
  acfg.expansion_ratio = expansion;
  acfg.variant = weighting_variant_from_name(variant);
  acfg.awf_mixer = !mixer_only;
  TrainConfig tcfg;
  tcfg.loss = loss_config(loss, alpha, lambda, t, gamma, {}, true);
  tcfg.lr = lr;
  tcfg.batch_size = batch;
  tcfg.max_epochs = epochs;
  tcfg.early_stop_patience = patience;
  tcfg.seed = seed;
  tcfg.augment.random_rotation_degrees = rotation;

  auto rec = train(nspec, acfg, tcfg, dspec, ds, out_dir);
  py::dict d;
  py::list rows;
  for (const auto& e : rec.epochs) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["train_loss"] = e.train_loss;
    row["val_loss"] = e.val_loss;
    row["val"] = report_dict(e.val);
    rows.append(row);
  }
  d["epochs"] = rows;
  d["best_epoch"] = rec.best_epoch;
  d["test"] = report_dict(rec.test);
  d["checkpoint"] = rec.checkpoint_path;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adaptive wavelet filter networks (C++ core)";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "AwfnetError");

  m.def(
      "dwt2",
      [](const Arr& x) {
        auto s = dwt2(tensor_from(x, 4));
        return py::make_tuple(array_from_tensor(s.ll), array_from_tensor(s.lh),
                              array_from_tensor(s.hl), array_from_tensor(s.hh));
      },
      py::arg("x"),
      "Single-level orthonormal Haar analysis of a [B,C,H,W] array; returns "
      "(ll, lh, hl, hh).");

  m.def(
      "idwt2",
      [](const Arr& ll, const Arr& lh, const Arr& hl, const Arr& hh) {
        SubbandSet<double> s{tensor_from(ll, 4), tensor_from(lh, 4),
                             tensor_from(hl, 4), tensor_from(hh, 4)};
        return array_from_tensor(idwt2(s));
      },
      py::arg("ll"), py::arg("lh"), py::arg("hl"), py::arg("hh"),
      "Exact inverse of dwt2.");

  m.def(
      "ce_loss",
      [](const Arr& logits, const py::array_t<long, py::array::forcecast>& y) {
        return loss_result(logits, targets_from(y), LossConfig{});
      },
      py::arg("logits"), py::arg("targets"));

  m.def(
      "cs_loss",
      [](const Arr& logits, const py::array_t<long, py::array::forcecast>& y,
         const std::vector<long>& counts, double lambda, double t) {
        auto cfg = loss_config("cs", 0.5, lambda, t, 2.0, counts, true);
        return loss_result(logits, targets_from(y), cfg);
      },
      py::arg("logits"), py::arg("targets"), py::arg("class_counts"),
      py::arg("lam") = 0.8, py::arg("t") = 2.0);

  m.def(
      "bc_loss",
      [](const Arr& logits, const py::array_t<long, py::array::forcecast>& y,
         const std::vector<long>& counts, double alpha, double lambda, double t,
         bool convex) {
        auto cfg = loss_config("bc", alpha, lambda, t, 2.0, counts, convex);
        return loss_result(logits, targets_from(y), cfg);
      },
      py::arg("logits"), py::arg("targets"), py::arg("class_counts"),
      py::arg("alpha") = 0.5, py::arg("lam") = 0.8, py::arg("t") = 2.0,
      py::arg("convex") = true);

  m.def(
      "focal_loss",
      [](const Arr& logits, const py::array_t<long, py::array::forcecast>& y,
         double gamma) {
        auto cfg = loss_config("fl", 0.5, 0.8, 2.0, gamma, {}, true);
        return loss_result(logits, targets_from(y), cfg);
      },
      py::arg("logits"), py::arg("targets"), py::arg("gamma") = 2.0);

  m.def(
      "balance_factors",
      [](const std::vector<double>& p, const std::vector<long>& counts,
         int target, double lambda, double t) {
        return balance_factors<double>(p, counts, target, lambda, t);
      },
      py::arg("p"), py::arg("class_counts"), py::arg("target"),
      py::arg("lam") = 0.8, py::arg("t") = 2.0,
      "S_k = T_k * M_k factors for one sample's competitor classes.");

  m.def(
      "ce_gradient",
      [](const Arr& logits, const py::array_t<long, py::array::forcecast>& y) {
        auto t = tensor_from(logits, 2);
        return array_from_tensor(ce_gradient_closed_form(t, targets_from(y)));
      },
      py::arg("logits"), py::arg("targets"),
      "Closed-form (softmax - onehot) / N gradient of the mean CE loss.");

  m.def(
      "classification_metrics",
      [](const Arr& probs, const py::array_t<long, py::array::forcecast>& y,
         int positive_class) {
        return report_dict(classification_metrics(
            prediction_set(probs, y, positive_class)));
      },
      py::arg("probs"), py::arg("labels"), py::arg("positive_class") = 1);

  m.def(
      "auc",
      [](const Arr& probs, const py::array_t<long, py::array::forcecast>& y,
         int positive_class) {
        return auc(prediction_set(probs, y, positive_class));
      },
      py::arg("probs"), py::arg("labels"), py::arg("positive_class") = 1);

  m.def(
      "calibration_errors",
      [](const Arr& probs, const py::array_t<long, py::array::forcecast>& y,
         int bins) {
        auto [ece, mce] =
            calibration_errors(prediction_set(probs, y, 1), bins);
        return py::make_tuple(ece, mce);
      },
      py::arg("probs"), py::arg("labels"), py::arg("bins") = 15);

  m.def(
      "full_metrics",
      [](const Arr& probs, const py::array_t<long, py::array::forcecast>& y,
         int positive_class, int bins) {
        return report_dict(
            compute_metrics(prediction_set(probs, y, positive_class), bins));
      },
      py::arg("probs"), py::arg("labels"), py::arg("positive_class") = 1,
      py::arg("bins") = 15);

  m.def(
      "gradcheck_suite",
      [](int seeds) {
        GradSuiteOptions opts;
        opts.seeds = seeds;
        py::list out;
        for (const auto& r : run_gradient_suite(opts)) {
          py::dict d;
          d["op"] = r.op_name;
          d["max_rel_error"] = r.max_rel_error;
          d["pass"] = r.pass;
          out.append(d);
        }
        return out;
      },
      py::arg("seeds") = 5,
      "Finite-difference checks for every op, block, loss, and the "
      "end-to-end network.");

  m.def(
      "generate_synthetic",
      [](int samples, const std::vector<double>& ratio, int size,
         std::uint64_t seed, double contrast, double cycles, double slope) {
        return dataset_dict(load_dataset(
            dataset_spec(samples, ratio, size, seed, contrast, cycles, slope)));
      },
      py::arg("samples") = 400,
      py::arg("ratio") = std::vector<double>{0.704, 0.296},
      py::arg("size") = 64, py::arg("seed") = 0, py::arg("contrast") = 0.35,
      py::arg("cycles") = 8.0, py::arg("slope") = 1.0);

  m.def("run_training", &run_training, py::arg("samples") = 400,
        py::arg("ratio") = std::vector<double>{0.704, 0.296},
        py::arg("size") = 64, py::arg("seed") = 0, py::arg("contrast") = 0.35,
        py::arg("cycles") = 8.0, py::arg("slope") = 1.0,
        py::arg("stem") = "small_cnn",
        py::arg("channels") = std::vector<int>{8, 16, 32},
        py::arg("blocks") = 3, py::arg("groups") = 0, py::arg("expansion") = 2,
        py::arg("variant") = "grouped_linear", py::arg("mixer_only") = false,
        py::arg("loss") = "ce", py::arg("alpha") = 0.5, py::arg("lam") = 0.8,
        py::arg("t") = 2.0, py::arg("gamma") = 2.0, py::arg("lr") = 1e-4,
        py::arg("batch") = 16, py::arg("epochs") = 30,
        py::arg("patience") = 20, py::arg("rotation") = 10.0,
        py::arg("out_dir") = "",
        "Synthetic-task training run; returns per-epoch rows and the final "
        "test metrics.");

  py::class_<PyAwfNet>(m, "AwfNet")
      .def(py::init<const std::string&, std::vector<int>, int, int, int, int,
                    int, const std::string&, bool, std::uint64_t>(),
           py::arg("stem") = "small_cnn",
           py::arg("channels") = std::vector<int>{8, 16, 32},
           py::arg("blocks") = 3, py::arg("num_classes") = 2,
           py::arg("input_size") = 64, py::arg("groups") = 0,
           py::arg("expansion") = 2, py::arg("variant") = "grouped_linear",
           py::arg("mixer_only") = false, py::arg("seed") = 0)
      .def("forward", &PyAwfNet::forward, py::arg("x"), py::arg("train") = false)
      .def("__call__", &PyAwfNet::forward, py::arg("x"), py::arg("train") = false)
      .def_property_readonly("parameter_count", &PyAwfNet::parameter_count)
      .def_property_readonly("groups", &PyAwfNet::groups)
      .def("save", &PyAwfNet::save, py::arg("path"))
      .def("load", &PyAwfNet::load, py::arg("path"));
}
