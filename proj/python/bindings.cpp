#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

#include "dcpl/cli.hpp"
#include "dcpl/dataset.hpp"
#include "dcpl/error.hpp"
#include "dcpl/losses.hpp"
#include "dcpl/pseudolabel.hpp"
#include "dcpl/synthbench.hpp"
#include "dcpl/trainer.hpp"
#include "dcpl/transition.hpp"
#include "dcpl/verify.hpp"

namespace py = pybind11;
using namespace dcpl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Mat& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array to_numpy(const Vec& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Mat to_mat(const Array& a) {
  if (a.ndim() != 2) throw ArgumentError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Mat(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Vec to_vec(const Array& a) {
  if (a.ndim() != 1) throw ArgumentError("expected a 1-D array");
  return Vec(a.data(), a.data() + a.shape(0));
}

PriorMatrix prior_from(const Array& m) {
  PriorMatrix p;
  p.matrix = to_mat(m);
  return p;
}

}  // namespace

PYBIND11_MODULE(_dcpl, m) {
  m.doc() = "De-confusing noisy pseudo-labels for source-free adaptation (C++ core)";

  static py::exception<Error> base_error(m, "DcplError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  m.def("softmax_temp", [](const Array& logits, double tau) { return to_numpy(softmax_temp(to_vec(logits), tau)); },
        py::arg("logits"), py::arg("tau") = 1.0);
  m.def("entropy", [](const Array& p) { return entropy(to_vec(p)); });
  m.def("cosine_similarity", [](const Array& a, const Array& b) {
    return cosine_similarity(to_vec(a), to_vec(b));
  });

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<std::size_t, std::size_t>(), py::arg("k"), py::arg("d_f"))
      .def_property(
          "weights", [](const ModelParams& p) { return to_numpy(p.weights); },
          [](ModelParams& p, const Array& a) { p.weights = to_mat(a); })
      .def_property(
          "bias", [](const ModelParams& p) { return to_numpy(p.bias); },
          [](ModelParams& p, const Array& a) { p.bias = to_vec(a); })
      .def_property_readonly("k", &ModelParams::num_classes)
      .def_property_readonly("d_f", &ModelParams::feature_dim);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const Array& ff, const Array& fp, std::size_t k,
                       std::optional<std::vector<std::size_t>> true_labels) {
             Dataset ds;
             ds.k = k;
             ds.features_f = to_mat(ff);
             ds.features_p = to_mat(fp);
             ds.true_labels = std::move(true_labels);
             validate(ds);
             return ds;
           }),
           py::arg("features_f"), py::arg("features_p"), py::arg("k"),
           py::arg("true_labels") = py::none())
      .def_readonly("k", &Dataset::k)
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("features_f", [](const Dataset& d) { return to_numpy(d.features_f); })
      .def_property_readonly("features_p", [](const Dataset& d) { return to_numpy(d.features_p); })
      .def_readwrite("true_labels", &Dataset::true_labels)
      .def_readwrite("pseudo_labels", &Dataset::pseudo_labels)
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

  m.def("load_dataset", [](const std::string& path, std::optional<std::size_t> k) {
    return load_dataset(path, {k});
  }, py::arg("path"), py::arg("k") = py::none());
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_head", &load_head);
  m.def("save_head", &save_head);

  py::enum_<LrSchedule>(m, "LrSchedule")
      .value("constant", LrSchedule::kConstant)
      .value("poly", LrSchedule::kPoly);

  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init<>())
      .def_readwrite("lambda_", &HyperParams::lambda)
      .def_readwrite("gamma", &HyperParams::gamma)
      .def_readwrite("tau", &HyperParams::tau)
      .def_readwrite("lr", &HyperParams::learning_rate)
      .def_readwrite("momentum", &HyperParams::momentum)
      .def_readwrite("weight_decay", &HyperParams::weight_decay)
      .def_readwrite("epochs", &HyperParams::epochs)
      .def_readwrite("batch_size", &HyperParams::batch_size)
      .def_readwrite("seed", &HyperParams::seed)
      .def_readwrite("im_weight", &HyperParams::im_weight)
      .def_readwrite("beta", &HyperParams::beta)
      .def_readwrite("lr_schedule", &HyperParams::lr_schedule)
      .def_readwrite("prior_transpose", &HyperParams::prior_transpose);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("k", &SynthConfig::k)
      .def_readwrite("d_f", &SynthConfig::d_f)
      .def_readwrite("d_p", &SynthConfig::d_p)
      .def_readwrite("n_source", &SynthConfig::n_source)
      .def_readwrite("n_target", &SynthConfig::n_target)
      .def_readwrite("class_separation", &SynthConfig::class_separation)
      .def_readwrite("shift_translation", &SynthConfig::shift_translation)
      .def_readwrite("shift_rotation", &SynthConfig::shift_rotation)
      .def_readwrite("pretrained_noise", &SynthConfig::pretrained_noise)
      .def_readwrite("seed", &SynthConfig::seed);

  m.def("generate_pair", [](const SynthConfig& cfg) {
    auto pair = generate_pair(cfg);
    return py::make_tuple(std::move(pair.source), std::move(pair.target));
  });
  m.def("train_source_head", &train_source_head, py::arg("source"), py::arg("hp"));
  m.def("predict_labels", [](const ModelParams& p, const Array& x) {
    return predict_labels(p, to_mat(x));
  });
  m.def("forward_probs", [](const ModelParams& p, const Array& x) {
    return to_numpy(forward_probs(p, to_mat(x)));
  });

  m.def("compute_centroids", [](const Dataset& ds, const ModelParams& head) {
    return to_numpy(compute_centroids(ds, head));
  });
  m.def("assign_pseudo_labels", [](const Dataset& ds, const Array& centroids) {
    return assign_pseudo_labels(ds, to_mat(centroids));
  });
  m.def("compute_prior_matrix",
        [](const Dataset& ds, const Array& centroids, double tau) {
          return to_numpy(compute_prior_matrix(ds, to_mat(centroids), tau).matrix);
        },
        py::arg("dataset"), py::arg("centroids"), py::arg("tau") = 0.01);
  m.def("oracle_transition",
        [](std::vector<std::size_t> true_labels, std::vector<std::size_t> pseudo, std::size_t k) {
          Dataset ds;
          ds.k = k;
          ds.true_labels = std::move(true_labels);
          ds.pseudo_labels = std::move(pseudo);
          return to_numpy(oracle_transition(ds).matrix);
        },
        py::arg("true_labels"), py::arg("pseudo_labels"), py::arg("k"));

  m.def(
      "init_near_identity",
      [](std::size_t k, double beta) {
        return to_numpy(init_near_identity(k, beta).logits);
      },
      py::arg("k"), py::arg("beta") = 6.0);
  m.def("materialize", [](const Array& logits) {
    return to_numpy(materialize(TransitionParams{to_mat(logits)}));
  });

  m.def("total_loss",
        [](const ModelParams& p, const Array& t_logits, const Array& prior, const Array& x,
           const std::vector<std::size_t>& labels, const HyperParams& hp) {
          const LossResult r = total_loss(p, TransitionParams{to_mat(t_logits)}, prior_from(prior),
                                          to_mat(x), labels, hp);
          py::dict d;
          d["ce_noisy"] = r.breakdown.ce_noisy;
          d["trace_term"] = r.breakdown.trace_term;
          d["prior_term"] = r.breakdown.prior_term;
          d["sfda_term"] = r.breakdown.sfda_term;
          d["total"] = r.breakdown.total;
          d["grad_weights"] = to_numpy(r.grads.head.weights);
          d["grad_bias"] = to_numpy(r.grads.head.bias);
          d["grad_transition"] = to_numpy(r.grads.transition);
          return d;
        });

  py::class_<AdaptationReport>(m, "AdaptationReport")
      .def_property_readonly("epoch_accuracy", [](const AdaptationReport& r) { return r.epoch_accuracy; })
      .def_property_readonly("epoch_total_loss", [](const AdaptationReport& r) {
        std::vector<double> out;
        for (const auto& e : r.epoch_losses) out.push_back(e.total);
        return out;
      })
      .def_property_readonly("final_accuracy", &AdaptationReport::final_accuracy)
      .def_readonly("pseudo_label_accuracy", &AdaptationReport::pseudo_label_accuracy)
      .def_readonly("source_accuracy", &AdaptationReport::source_accuracy)
      .def_readonly("pseudo_labels", &AdaptationReport::pseudo_labels)
      .def_property_readonly("t_hat", [](const AdaptationReport& r) { return to_numpy(r.t_hat); })
      .def_property_readonly("prior", [](const AdaptationReport& r) { return to_numpy(r.prior.matrix); })
      .def_property_readonly("t_oracle", [](const AdaptationReport& r) -> py::object {
        if (!r.t_oracle) return py::none();
        return to_numpy(*r.t_oracle);
      })
      .def_readonly("head", &AdaptationReport::head)
      .def_readonly("warnings", &AdaptationReport::warnings)
      .def_readonly("seconds", &AdaptationReport::seconds);

  m.def("run_adaptation", &run_adaptation, py::arg("target"), py::arg("source_head"), py::arg("hp"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_identity_baseline", &run_identity_baseline, py::arg("target"),
        py::arg("source_head"), py::arg("hp"), py::call_guard<py::gil_scoped_release>());
  m.def("run_oracle", &run_oracle, py::arg("target"), py::arg("source_head"), py::arg("hp"),
        py::call_guard<py::gil_scoped_release>());

  m.def("transition_recovery_error", [](const Array& a, const Array& b) {
    return transition_recovery_error(to_mat(a), to_mat(b));
  });
  m.def("eq5_bound_check", [](const Array& t_hat, const Array& p_bar) {
    const auto r = eq5_bound_check(to_mat(t_hat), to_mat(p_bar));
    py::dict d;
    d["precondition_met"] = r.precondition_met;
    d["holds"] = r.holds;
    d["induced_diagonal"] = to_numpy(r.induced_diagonal);
    d["violating_index"] = r.violating_index;
    return d;
  });
  m.def("run_gradcheck_suite", [](std::uint64_t seed, std::size_t configs) {
    const auto r = run_gradcheck_suite(seed, configs);
    return py::make_tuple(r.passed, r.max_rel_error);
  }, py::arg("seed") = 2020, py::arg("configurations") = 20);
  m.def("run_bound_suite", [](std::uint64_t seed, std::size_t trials) {
    const auto r = run_bound_suite(seed, trials);
    return py::make_tuple(r.passed, r.violations);
  }, py::arg("seed") = 2020, py::arg("trials") = 1000);

  m.def("parse_config_text", [](const std::string& text) {
    const RunConfig cfg = parse_config_text(text);
    return cfg.hp;
  });
}
