#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qmda/dynamics.hpp"
#include "qmda/experiments.hpp"
#include "qmda/filter.hpp"
#include "qmda/kernel_basis.hpp"
#include "qmda/metrics.hpp"
#include "qmda/operators.hpp"
#include "qmda/quantizer.hpp"

namespace py = pybind11;
using namespace qmda;

namespace {

// StepRecord stream as a dict of column arrays, matching run.csv
py::dict records_to_dict(const std::vector<StepRecord>& records, int s) {
  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::VectorXd t(n), d(n), e(n), measured_value(n);
  Eigen::VectorXi measured_bin(n);
  Eigen::MatrixXd probs(n, s);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    t[i] = r.time;
    d[i] = r.precision;
    e[i] = r.ignorance;
    measured_bin[i] = r.measured_bin;
    measured_value[i] = r.measured_value;
    probs.row(i) = r.probs;
  }
  py::dict out;
  out["t"] = t;
  out["probs"] = probs;
  out["measured_bin"] = measured_bin;
  out["measured_value"] = measured_value;
  out["D"] = d;
  out["E"] = e;
  return out;
}

}  // namespace

PYBIND11_MODULE(_qmda, m) {
  m.doc() = "Operator-theoretic sequential data assimilation: density-matrix "
            "filtering with Koopman shift operators and spectral projectors";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  // ------------------------------------------------------------ dynamics
  py::class_<L63Params>(m, "L63Params")
      .def(py::init<>())
      .def_readwrite("sigma", &L63Params::sigma)
      .def_readwrite("rho", &L63Params::rho)
      .def_readwrite("beta", &L63Params::beta);

  py::class_<CircleParams>(m, "CircleParams")
      .def(py::init<>())
      .def_readwrite("omega", &CircleParams::omega)
      .def("period", &CircleParams::period);

  py::class_<TrajectoryDataset>(m, "TrajectoryDataset")
      .def_readonly("delta_t", &TrajectoryDataset::delta_t)
      .def_readonly("samples", &TrajectoryDataset::samples)
      .def_readonly("h_values", &TrajectoryDataset::h_values)
      .def("__len__", &TrajectoryDataset::n_samples);

  m.def("l63_velocity", &l63_velocity, py::arg("x"), py::arg("params") = L63Params{});
  m.def(
      "integrate_l63_rk4",
      [](const Eigen::Vector3d& x0, const L63Params& p, double dt, long n) {
        return integrate_rk4(
            x0, [&p](const Eigen::VectorXd& x) -> Eigen::VectorXd {
              return l63_velocity(x, p);
            },
            dt, n);
      },
      py::arg("x0"), py::arg("params"), py::arg("dt"), py::arg("n_steps"));
  m.def("spinup_sample", &spinup_sample, py::arg("params"), py::arg("x_init"),
        py::arg("n"), py::arg("dt"));
  m.def(
      "circle_trajectory",
      [](double theta0, double omega, double dt, long n,
         const std::string& observable, double alpha) {
        CircleObservable obs;
        obs.kind = observable == "binary" ? CircleObservable::Kind::binary
                                          : CircleObservable::Kind::cosine;
        obs.alpha = alpha;
        return circle_trajectory(theta0, CircleParams{omega}, dt, n, obs);
      },
      py::arg("theta0"), py::arg("omega"), py::arg("dt"), py::arg("n"),
      py::arg("observable") = "cos", py::arg("alpha") = std::numbers::pi);
  m.def(
      "delay_embed",
      [](const Eigen::VectorXd& h, int q) { return delay_embed(h, q).vectors; },
      py::arg("h_values"), py::arg("q_delays"));

  // ---------------------------------------------------------- kernel basis
  py::class_<KernelBasisParams>(m, "KernelBasisParams")
      .def(py::init<>())
      .def_readwrite("k_b", &KernelBasisParams::k_b)
      .def_readwrite("r", &KernelBasisParams::r)
      .def_readwrite("eps_lo", &KernelBasisParams::eps_lo)
      .def_readwrite("eps_hi", &KernelBasisParams::eps_hi)
      .def_readwrite("eps_grid", &KernelBasisParams::eps_grid);

  py::class_<EigenBasis>(m, "EigenBasis")
      .def_readonly("values", &EigenBasis::values)
      .def_readonly("eigenvalues", &EigenBasis::eigenvalues);

  m.def(
      "build_basis",
      [](const Eigen::MatrixXd& points, int l, const KernelBasisParams& prm) {
        auto r = build_basis(points, l, prm);
        py::dict diag;
        diag["epsilon_star"] = r.scan.epsilon_star;
        diag["slope_at_star"] = r.scan.slope_at_star;
        diag["boundary_warning"] = r.scan.boundary_warning;
        diag["r"] = r.r;
        diag["sinkhorn_iterations"] = r.sinkhorn_iterations;
        diag["row_sum_error"] = r.row_sum_error;
        return py::make_tuple(std::move(r.basis), diag);
      },
      py::arg("points"), py::arg("l"), py::arg("params") = KernelBasisParams{});

  // ------------------------------------------------------------ quantizer
  py::class_<QuantilePartition>(m, "QuantilePartition")
      .def_readonly("s", &QuantilePartition::s)
      .def_readonly("boundaries", &QuantilePartition::boundaries)
      .def_readonly("cond_means", &QuantilePartition::cond_means)
      .def_readonly("index_sets", &QuantilePartition::index_sets)
      .def_readonly("ties_split", &QuantilePartition::ties_split);

  m.def("empirical_cdf", &empirical_cdf, py::arg("h_values"), py::arg("a"));
  m.def("build_partition", &build_partition, py::arg("h_values"), py::arg("s"));
  m.def(
      "affiliation",
      [](const QuantilePartition& p, double a) { return affiliation(p, a); },
      py::arg("partition"), py::arg("a"));
  m.def(
      "projector_matrices",
      [](const EigenBasis& basis, const QuantilePartition& part) {
        return projector_matrices(basis, part).mats;
      },
      py::arg("basis"), py::arg("partition"));

  // ------------------------------------------------------------ operators
  m.def(
      "shift_matrix",
      [](const EigenBasis& basis, int q) { return shift_matrix(basis, q).m; },
      py::arg("basis"), py::arg("q"));

  py::class_<AnalyticCircleBasis>(m, "AnalyticCircleBasis")
      .def(py::init<int, double>(), py::arg("l_max"), py::arg("omega") = 1.0)
      .def_readonly("l_max", &AnalyticCircleBasis::l_max)
      .def_readonly("omega", &AnalyticCircleBasis::omega)
      .def("dim", &AnalyticCircleBasis::dim);

  m.def(
      "circle_binary_projectors",
      [](double alpha, const AnalyticCircleBasis& c) {
        return circle_binary_projectors(alpha, c).mats;
      },
      py::arg("alpha"), py::arg("basis"));
  m.def(
      "circle_cos_projectors",
      [](int s, const AnalyticCircleBasis& c) {
        return circle_cos_projectors(s, c).mats;
      },
      py::arg("s"), py::arg("basis"));

  // --------------------------------------------------------------- metrics
  m.def("precision_bits", &precision_bits, py::arg("probs"));
  m.def(
      "ignorance_bits",
      [](const Eigen::VectorXd& probs, int bin, double floor) {
        const auto r = ignorance_bits(probs, bin, floor);
        return py::make_tuple(r.bits, r.clamped);
      },
      py::arg("probs"), py::arg("true_bin"), py::arg("floor") = 9.313225746154785e-10);

  // ------------------------------------------------------------ experiments
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("preset", &ExperimentConfig::preset)
      .def_readwrite("backend", &ExperimentConfig::backend)
      .def_readwrite("system", &ExperimentConfig::system)
      .def_readwrite("observable", &ExperimentConfig::observable)
      .def_readwrite("alpha", &ExperimentConfig::alpha)
      .def_readwrite("dt", &ExperimentConfig::dt)
      .def_readwrite("n_train", &ExperimentConfig::n_train)
      .def_readwrite("q_delays", &ExperimentConfig::q_delays)
      .def_readwrite("kernel", &ExperimentConfig::kernel)
      .def_readwrite("l_basis", &ExperimentConfig::l_basis)
      .def_readwrite("s_bins", &ExperimentConfig::s_bins)
      .def_readwrite("obs_interval_steps", &ExperimentConfig::obs_interval_steps)
      .def_readwrite("report_stride", &ExperimentConfig::report_stride)
      .def_readwrite("n_steps", &ExperimentConfig::n_steps)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("truth_seed", &ExperimentConfig::truth_seed)
      .def_readwrite("scale", &ExperimentConfig::scale)
      .def_readwrite("out_dir", &ExperimentConfig::out_dir)
      .def_readwrite("check_invariants", &ExperimentConfig::check_invariants);

  m.def("preset_config", &preset_config, py::arg("name"));
  m.def("preset_names", &preset_names);
  m.def("apply_scale", &apply_scale, py::arg("config"));
  m.def("config_to_json", &config_to_json, py::arg("config"));

  py::class_<OperatorBundle>(m, "OperatorBundle")
      .def_property_readonly("dim", &OperatorBundle::dim)
      .def_property_readonly("is_analytic", &OperatorBundle::is_analytic)
      .def_property_readonly(
          "s_bins", [](const OperatorBundle& b) { return b.partition.s; })
      .def_property_readonly(
          "eigenvalues",
          [](const OperatorBundle& b) -> py::object {
            if (!b.basis) return py::none();
            return py::cast(b.basis->eigenvalues);
          })
      .def_property_readonly("payload_hash",
                             [](const OperatorBundle& b) { return b.payload_hash; });

  m.def("train", &train, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("save_bundle", &save_bundle, py::arg("bundle"), py::arg("path"));
  m.def("load_bundle", &load_bundle, py::arg("path"));
  m.def(
      "assimilate",
      [](const OperatorBundle& bundle, const ExperimentConfig& cfg) {
        AssimilationResult result;
        {
          py::gil_scoped_release release;
          result = assimilate(bundle, cfg);
        }
        py::dict out = records_to_dict(result.records, bundle.partition.s);
        py::dict summary;
        summary["mean_precision"] = result.summary.mean_precision;
        summary["mean_ignorance"] = result.summary.mean_ignorance;
        summary["useful_fraction"] = result.summary.useful_fraction;
        out["summary"] = summary;
        return out;
      },
      py::arg("bundle"), py::arg("config"));
  m.def(
      "run_preset",
      [](const std::string& name, const std::string& out_dir, double scale) {
        PresetOutputs out;
        {
          py::gil_scoped_release release;
          out = run_preset(name, out_dir, scale);
        }
        py::dict d;
        d["bundle_path"] = out.bundle_path;
        d["run_csv_path"] = out.run_csv_path;
        d["summary_path"] = out.summary_path;
        d["convergence_csv_path"] = out.convergence_csv_path;
        d["mean_precision"] = out.summary.mean_precision;
        d["mean_ignorance"] = out.summary.mean_ignorance;
        d["useful_fraction"] = out.summary.useful_fraction;
        return d;
      },
      py::arg("name"), py::arg("out_dir"), py::arg("scale") = 1.0);
  m.def(
      "convergence_study",
      [](const ExperimentConfig& cfg) {
        ConvergenceReport rep;
        {
          py::gil_scoped_release release;
          rep = convergence_study(cfg);
        }
        py::dict d;
        d["n_values"] = rep.n_values;
        d["u_errors"] = rep.u_errors;
        d["e_errors"] = rep.e_errors;
        d["boundary_errors"] = rep.boundary_errors;
        d["prob_errors"] = rep.prob_errors;
        return d;
      },
      py::arg("config"));

  m.attr("__version__") = "0.1.0";
}
