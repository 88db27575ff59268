#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <Eigen/Core>

#include "oedkit/experiments.hpp"

namespace py = pybind11;
using namespace oedkit;

namespace {

WeightingMode parse_mode(const std::string& mode) {
  if (mode == "relaxed") return WeightingMode::HadamardRelaxed;
  if (mode == "binary") return WeightingMode::BinaryPseudoInverse;
  throw Error(ErrorCode::InvalidArgument, "weighting mode must be 'relaxed' or 'binary'");
}

CriterionKind parse_criterion(const std::string& kind) {
  for (auto k : {CriterionKind::AFim, CriterionKind::DFim, CriterionKind::APosteriorGoal,
                 CriterionKind::DPosteriorGoal})
    if (to_string(k) == kind) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown criterion '" + kind + "'");
}

ExperimentConfig config_from(const py::object& source) {
  ConfigParse parsed;
  if (py::isinstance<py::str>(source) || py::hasattr(source, "__fspath__")) {
    parsed = load_config(py::str(py::module_::import("os").attr("fspath")(source)).cast<std::string>());
  } else {
    const std::string text = py::module_::import("json").attr("dumps")(source).cast<std::string>();
    parsed = parse_config(nlohmann::json::parse(text));
  }
  if (!parsed.diagnostics.empty()) {
    std::string msg = "invalid config:";
    for (const auto& d : parsed.diagnostics) msg += "\n  " + (d.path.empty() ? "<root>" : d.path) + ": " + d.message;
    throw Error(ErrorCode::InvalidArgument, msg);
  }
  return *parsed.config;
}

/// Wraps a Python callable so it can run on solver worker threads.
Utility python_utility(py::function fn) {
  auto holder = std::make_shared<py::function>(std::move(fn));
  return [holder](const DesignVector& d) {
    py::gil_scoped_acquire gil;
    return (*holder)(d.weights()).cast<double>();
  };
}

py::dict result_dict(const OEDResult& r) {
  py::dict out;
  out["solver"] = to_string(r.solver);
  out["optimal_design"] = r.optimal_design.weights();
  out["optimal_value"] = r.optimal_value;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  out["final_parameter"] = r.final_parameter;
  py::list traj;
  for (const auto& tp : r.trajectory) traj.append(py::make_tuple(tp.iteration, tp.parameter, tp.utility));
  out["trajectory"] = traj;
  py::list table;
  for (const auto& [index, value] : r.brute_force_table) table.append(py::make_tuple(index, value));
  out["brute_force_table"] = table;
  py::list samples;
  for (const auto& [d, value] : r.sampled_designs) samples.append(py::make_tuple(d.weights(), value));
  out["sampled_designs"] = samples;
  if (r.best_seen_design) {
    out["best_seen_design"] = r.best_seen_design->weights();
    out["best_seen_value"] = *r.best_seen_value;
  }
  if (r.rounded_design) {
    out["rounded_design"] = r.rounded_design->weights();
    out["rounded_value"] = *r.rounded_value;
  }
  return out;
}

/// An assembled experiment with its observation-space OED evaluator.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg)
      : cfg_(std::move(cfg)), setup_(build_experiment(cfg_)), problem_(setup_.ip, setup_.obs_indices) {}

  Eigen::Index n_state() const { return setup_.model->state_size(); }
  Eigen::Index n_sensors() const { return problem_.sensor_count(); }
  const Vector& truth() const { return setup_.truth; }
  Vector prior_mean() const { return setup_.ip.prior().mean(); }
  Matrix prior_covariance() const { return setup_.ip.prior().covariance().matrix(); }
  std::vector<double> obs_times() const { return setup_.obs_times; }
  std::vector<std::pair<double, double>> sensor_locations() const { return setup_.sensor_locations; }

  Matrix fisher_information(const Vector& w, const std::string& mode) const {
    return problem_.fisher_information(DesignVector(w), parse_mode(mode)).matrix();
  }
  double criterion_value(const std::string& kind, const Vector& w, const std::optional<Matrix>& goal,
                         const std::string& mode) const {
    return problem_.criterion_value({parse_criterion(kind), goal}, DesignVector(w), parse_mode(mode)).value;
  }
  Vector criterion_gradient(const std::string& kind, const Vector& w, const std::optional<Matrix>& goal) const {
    return problem_.criterion_gradient({parse_criterion(kind), goal}, DesignVector(w));
  }
  double utility(const Vector& w, const std::string& mode) const {
    const OedSpec& spec = oed_spec();
    return problem_.utility(spec.criterion, spec.penalty, DesignVector(w), parse_mode(mode));
  }
 private:
  const OedSpec& oed_spec() const {
    if (!cfg_.oed) throw Error(ErrorCode::MissingComponent, "oed (add an \"oed\" block to the config)");
    return *cfg_.oed;
  }

  ExperimentConfig cfg_;
  ExperimentSetup setup_;
  LinearOEDProblem problem_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optimal sensor placement and data assimilation for linear-Gaussian inverse problems";
  m.attr("__version__") = kVersion;

  static py::exception<Error> error(m, "OedkitError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def(
      "validate_config",
      [](const std::filesystem::path& path) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& d : load_config(path).diagnostics) out.emplace_back(d.path, d.message);
        return out;
      },
      py::arg("path"), "List (field path, message) for every problem in a config file.");

  m.def(
      "run_json",
      [](const py::object& config, const std::optional<std::string>& experiment, std::optional<std::uint64_t> seed,
         const std::optional<std::filesystem::path>& output, std::optional<unsigned> workers) {
        ExperimentConfig cfg = config_from(config);
        if (experiment) {
          nlohmann::json doc = cfg.source;
          doc["experiment"] = *experiment;
          ConfigParse again = parse_config(doc);
          if (!again.diagnostics.empty())
            throw Error(ErrorCode::InvalidArgument, again.diagnostics.front().path + ": " + again.diagnostics.front().message);
          cfg = *again.config;
        }
        if (seed) cfg.seed = *seed;
        if (output) cfg.output_dir = *output;
        if (workers) cfg.workers = *workers;
        RunReport report;
        {
          py::gil_scoped_release release;
          report = run_experiment(cfg);
        }
        return py::make_tuple(report.exit_code, report.bundle.dump());
      },
      py::arg("config"), py::arg("experiment") = py::none(), py::arg("seed") = py::none(),
      py::arg("output") = py::none(), py::arg("workers") = py::none());

  m.def(
      "toy_linear_matrix",
      [](Eigen::Index n, double dt, std::uint64_t seed) { return toy_linear_create(n, dt, seed).a_matrix(); },
      py::arg("n_state"), py::arg("dt"), py::arg("seed"));

  m.def(
      "weighted_precision",
      [](const Matrix& r, const Vector& w, const std::string& mode) {
        return weighted_precision(SymMatrix(r), DesignVector(w), parse_mode(mode)).matrix();
      },
      py::arg("covariance"), py::arg("design"), py::arg("mode") = "relaxed");

  m.def(
      "hutchinson_trace",
      [](const Matrix& a, std::size_t samples, std::uint64_t seed) {
        Rng rng(seed);
        return hutchinson_trace([&](const Vector& v) -> Vector { return a * v; }, a.rows(), samples, rng);
      },
      py::arg("matrix"), py::arg("samples"), py::arg("seed"));

  m.def(
      "log_pmf", [](const Vector& theta, const Vector& d) { return log_pmf(BernoulliPolicy(theta), DesignVector(d)); },
      py::arg("theta"), py::arg("design"));
  m.def(
      "log_pmf_gradient",
      [](const Vector& theta, const Vector& d) { return log_pmf_gradient(BernoulliPolicy(theta), DesignVector(d)); },
      py::arg("theta"), py::arg("design"));

  m.def(
      "brute_force",
      [](py::function fn, Eigen::Index n, unsigned workers) {
        const Utility u = python_utility(std::move(fn));
        OEDResult r;
        {
          py::gil_scoped_release release;
          r = brute_force(u, n, workers);
        }
        return result_dict(r);
      },
      py::arg("utility"), py::arg("n_sensors"), py::arg("workers") = 1);

  m.def(
      "solve_stochastic",
      [](py::function fn, Eigen::Index n, std::uint64_t seed, double eta0, double tau, int max_iter, int ensemble_size,
         int final_samples, int baseline_batches, double bound, double tol, bool center_utility, unsigned workers) {
        StochasticOptions o;
        o.step = {eta0, tau};
        o.max_iter = max_iter;
        o.ensemble_size = ensemble_size;
        o.final_samples = final_samples;
        o.baseline_batches = baseline_batches;
        o.bound = bound;
        o.tol = tol;
        o.center_utility = center_utility;
        o.workers = workers;
        const Utility u = python_utility(std::move(fn));
        Rng rng(seed);
        OEDResult r;
        {
          py::gil_scoped_release release;
          r = solve_stochastic(u, n, rng, o);
        }
        return result_dict(r);
      },
      py::arg("utility"), py::arg("n_sensors"), py::arg("seed"), py::arg("eta0") = 0.1, py::arg("tau") = 50.0,
      py::arg("max_iter") = 300, py::arg("ensemble_size") = 32, py::arg("final_samples") = 64,
      py::arg("baseline_batches") = 4, py::arg("bound") = 1e-3, py::arg("tol") = 1e-6,
      py::arg("center_utility") = false, py::arg("workers") = 1);

  m.def(
      "optimal_baseline",
      [](const Vector& theta, py::function fn, int ensemble_size, int batches, std::uint64_t seed) {
        const Utility u = python_utility(std::move(fn));
        Rng rng(seed);
        py::gil_scoped_release release;
        return optimal_baseline(theta, u, ensemble_size, batches, rng);
      },
      py::arg("theta"), py::arg("utility"), py::arg("ensemble_size"), py::arg("batches"), py::arg("seed"));

  py::class_<Experiment>(m, "Experiment")
      .def(py::init([](const py::object& config) { return Experiment(config_from(config)); }), py::arg("config"),
           "Assemble an experiment from a config path or a dict.")
      .def_property_readonly("n_state", &Experiment::n_state)
      .def_property_readonly("n_sensors", &Experiment::n_sensors)
      .def_property_readonly("truth", &Experiment::truth)
      .def_property_readonly("prior_mean", &Experiment::prior_mean)
      .def_property_readonly("prior_covariance", &Experiment::prior_covariance)
      .def_property_readonly("obs_times", &Experiment::obs_times)
      .def_property_readonly("sensor_locations", &Experiment::sensor_locations)
      .def("fisher_information", &Experiment::fisher_information, py::arg("design"), py::arg("mode") = "relaxed")
      .def("criterion_value", &Experiment::criterion_value, py::arg("kind"), py::arg("design"),
           py::arg("goal_operator") = py::none(), py::arg("mode") = "relaxed")
      .def("criterion_gradient", &Experiment::criterion_gradient, py::arg("kind"), py::arg("design"),
           py::arg("goal_operator") = py::none())
      .def("utility", &Experiment::utility, py::arg("design"), py::arg("mode") = "binary",
           "Penalized utility of the configured criterion.");
}
