#include "oedkit/experiments.hpp"

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace oedkit {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw IoFailure("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoFailure("failed writing " + path.string());
  }

 private:
  std::filesystem::path dir_;
};

std::string csv_vector_rows(const std::string& header, const Vector& v) {
  std::ostringstream os;
  os << header << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << i << ',' << format_double(v(i)) << '\n';
  return os.str();
}

std::string matrix_text(const Matrix& m) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_double(m(i, j));
    os << '\n';
  }
  return os.str();
}

std::string timed_rows(const std::string& prefix, Eigen::Index n,
                       const std::vector<std::pair<double, Vector>>& rows) {
  std::ostringstream os;
  os << "time";
  for (Eigen::Index i = 0; i < n; ++i) os << ',' << prefix << i;
  os << '\n';
  for (const auto& [t, v] : rows) {
    os << format_double(t);
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << format_double(v(i));
    os << '\n';
  }
  return os.str();
}

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Config echo without the fields that only say where or how fast to run.
json config_echo(const ExperimentConfig& cfg) {
  json echo = cfg.source;
  echo.erase("output_dir");
  echo.erase("workers");
  echo["seed"] = cfg.seed;
  return echo;
}

json bundle_header(const ExperimentConfig& cfg) {
  json b;
  b["schema_version"] = kResultSchemaVersion;
  b["experiment"] = to_string(cfg.kind);
  b["seed"] = cfg.seed;
  b["config"] = config_echo(cfg);
  b["versions"] = {{"oedkit", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                 "." + std::to_string(EIGEN_MINOR_VERSION)}};
  b["timings"] = {{"file", "timings.json"}};
  return b;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void finish(OutputDir& out, RunReport& report, const json& timings) {
  out.write("result.json", report.bundle.dump(2) + "\n");
  out.write("timings.json", timings.dump(2) + "\n");
}

std::vector<ObservationVector> twin_observations(const ExperimentConfig& cfg, const ExperimentSetup& s) {
  if (cfg.twin.observations_file) {
    auto obs = read_observations_csv(*cfg.twin.observations_file);
    for (const auto& o : obs)
      require(o.values.size() == s.obs_op->observation_size(), ErrorCode::DimensionMismatch,
              "observations file row length differs from the number of sensors");
    return obs;
  }
  Rng noise = Rng(cfg.seed).substream("noise");
  const bool noisy = cfg.twin.add_noise && cfg.noise.variance.value_or(1.0) > 0.0;
  return synthesize_observations(s.ip, s.truth, s.obs_times, noise, noisy);
}

std::vector<std::pair<double, Vector>> trajectory(const ExperimentSetup& s, const Vector& x0) {
  std::vector<std::pair<double, Vector>> rows;
  for (const auto& st : s.model->integrate({x0, s.ip.window().t0}, s.ip.window()))
    rows.emplace_back(st.time.value_or(0.0), st.values);
  return rows;
}

}  // namespace

std::vector<ObservationVector> read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot read observations file " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<ObservationVector> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      require(end != cell.c_str(), ErrorCode::InvalidArgument, "non-numeric field in " + path.string());
      fields.push_back(v);
    }
    require(fields.size() >= 2, ErrorCode::InvalidArgument, "observation rows need a time and values");
    ObservationVector o;
    o.time = fields[0];
    o.values = Eigen::Map<Vector>(fields.data() + 1, static_cast<Eigen::Index>(fields.size() - 1));
    out.push_back(std::move(o));
  }
  return out;
}

ExperimentSetup build_experiment(const ExperimentConfig& cfg) {
  ExperimentSetup s;
  const Rng master(cfg.seed);
  Eigen::Index n = 0;
  std::optional<Grid2D> grid2d;

  if (const auto* toy = std::get_if<ToyLinearSpec>(&cfg.model)) {
    const std::uint64_t model_seed = toy->seed ? *toy->seed : master.substream("model").next_u64();
    s.model = std::make_shared<LinearTimeDependentModel>(toy_linear_create(toy->nx, toy->dt, model_seed));
    n = toy->nx;
    Rng truth_rng = master.substream("truth");
    s.truth.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) s.truth(i) = truth_rng.normal();
  } else {
    const auto& ad = std::get<AdvectionDiffusionSpec>(cfg.model);
    AdvectionDiffusionModel::Params p;
    p.nx = ad.nx;
    p.ny = ad.ny;
    p.kappa = ad.kappa;
    p.dt = ad.dt;
    p.velocity = ad.velocity;
    p.velocity_scale = ad.velocity_scale;
    auto model = std::make_shared<AdvectionDiffusionModel>(p);
    n = model->state_size();
    grid2d = model->grid();
    s.truth = model->default_initial_condition();
    s.model = model;
  }

  switch (cfg.observation.kind) {
    case ObservationSpec::Kind::Identity:
      s.obs_op = std::make_shared<PointObservationOperator>(PointObservationOperator::identity(n));
      for (Eigen::Index i = 0; i < n; ++i) s.sensor_locations.emplace_back(static_cast<double>(i), 0.0);
      break;
    case ObservationSpec::Kind::Indices:
      s.obs_op = std::make_shared<PointObservationOperator>(
          PointObservationOperator::at_indices(cfg.observation.indices, n));
      for (auto i : cfg.observation.indices) s.sensor_locations.emplace_back(static_cast<double>(i), 0.0);
      break;
    case ObservationSpec::Kind::Points:
      require(grid2d.has_value(), ErrorCode::InvalidArgument, "points observations need a 2-D grid");
      s.obs_op = std::make_shared<PointObservationOperator>(
          PointObservationOperator::at_points(cfg.observation.coordinates, *grid2d));
      s.sensor_locations = cfg.observation.coordinates;
      s.point_sensors = true;
      break;
  }
  const Eigen::Index n_obs = s.obs_op->observation_size();

  s.ip.register_model(s.model);
  s.ip.register_observation_operator(s.obs_op);
  s.ip.register_window(TimeGrid(cfg.window.t0, cfg.window.dt, cfg.window.n_steps));

  if (cfg.noise.file) {
    s.ip.register_noise(GaussianMeasure(Vector::Zero(n_obs), SymMatrix(read_matrix_file(*cfg.noise.file))));
  } else {
    // A zero variance only occurs for noise-free twin data; any positive
    // stand-in keeps the measure well defined and is never sampled.
    const double var = cfg.noise.variance.value_or(1.0);
    s.ip.register_noise(GaussianMeasure(Vector::Zero(n_obs), SymMatrix::diagonal(Vector::Constant(n_obs, var > 0.0 ? var : 1.0))));
  }

  if (cfg.prior) {
    const PriorSpec& ps = *cfg.prior;
    SymMatrix cov = SymMatrix::identity(n);
    if (ps.kind == PriorSpec::Kind::Diagonal) {
      cov = SymMatrix::diagonal(Vector::Constant(n, ps.variance));
    } else {
      const std::variant<Grid1D, Grid2D> g =
          grid2d ? std::variant<Grid1D, Grid2D>(*grid2d) : std::variant<Grid1D, Grid2D>(Grid1D{n});
      cov = bilaplacian_prior_build(g, ps.delta, ps.scale).covariance();
    }
    Vector mean = Vector::Zero(n);
    if (ps.mean == PriorSpec::Mean::Perturbed) {
      Rng prior_rng = master.substream("prior");
      mean = s.truth + gaussian_sample(GaussianMeasure(Vector::Zero(n), cov), prior_rng);
    } else if (ps.mean == PriorSpec::Mean::Explicit) {
      mean = Eigen::Map<const Vector>(ps.mean_values.data(), n);
    }
    s.ip.register_prior(GaussianMeasure(mean, cov));
  }

  s.obs_times = cfg.window.obs_times;
  const TimeGrid& w = s.ip.window();
  for (double t : s.obs_times) {
    const auto k = w.lattice_index(t);
    if (!k) throw Error(ErrorCode::TimeOffLattice, "observation time " + format_double(t) + " is off the lattice");
    s.obs_indices.push_back(*k);
  }
  std::sort(s.obs_indices.begin(), s.obs_indices.end());
  return s;
}

RunReport run_twin_data(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const ExperimentSetup s = build_experiment(cfg);
  RunReport report;
  report.bundle = bundle_header(cfg);
  const auto obs = twin_observations(cfg, s);

  OutputDir out(cfg.output_dir);
  out.write("truth.csv", csv_vector_rows("index,value", s.truth));
  out.write("trajectory.csv", timed_rows("x", s.model->state_size(), trajectory(s, s.truth)));
  std::vector<std::pair<double, Vector>> rows;
  for (const auto& o : obs) rows.emplace_back(o.time, o.values);
  out.write("observations.csv", timed_rows("y", s.obs_op->observation_size(), rows));

  report.bundle["twin"] = {{"n_state", s.model->state_size()},
                           {"n_sensors", s.obs_op->observation_size()},
                           {"n_observations", obs.size()},
                           {"noise_added", cfg.twin.add_noise && cfg.noise.variance.value_or(1.0) > 0.0},
                           {"files",
                            {{"truth", "truth.csv"},
                             {"trajectory", "trajectory.csv"},
                             {"observations", "observations.csv"}}}};
  finish(out, report, {{"total_seconds", seconds_since(t0)}});
  report.summary = "twin-data: wrote " + std::to_string(obs.size()) + " observation records to " +
                   cfg.output_dir.string();
  return report;
}

RunReport run_assimilate(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentSetup s = build_experiment(cfg);
  s.ip.register_observations(twin_observations(cfg, s));

  RunReport report;
  report.bundle = bundle_header(cfg);
  SolveOptions opts;
  opts.update_posterior_covariance = cfg.assimilation.posterior_covariance;
  opts.max_iter = cfg.assimilation.max_iter;
  opts.grad_tol = cfg.assimilation.grad_tol;

  const auto t_solve = Clock::now();
  PosteriorResult post;
  std::string failure;
  try {
    post = solve_inverse_problem(s.ip, opts);
  } catch (const NonConvergence<PosteriorResult>& e) {
    post = e.best();
    failure = e.what();
    report.exit_code = kExitNonConvergence;
  }
  const double solve_seconds = seconds_since(t_solve);

  const auto prior_traj = trajectory(s, s.ip.prior().mean());
  const auto post_traj = trajectory(s, post.map_point.values);
  const auto truth_traj = trajectory(s, s.truth);
  std::ostringstream rmse_csv;
  rmse_csv << "time,prior_rmse,posterior_rmse\n";
  json prior_rmse = json::array(), post_rmse = json::array(), times = json::array();
  std::size_t improved = 0;
  for (std::size_t k = 0; k < truth_traj.size(); ++k) {
    const double a = rmse(prior_traj[k].second, truth_traj[k].second);
    const double b = rmse(post_traj[k].second, truth_traj[k].second);
    rmse_csv << format_double(truth_traj[k].first) << ',' << format_double(a) << ',' << format_double(b) << '\n';
    prior_rmse.push_back(a);
    post_rmse.push_back(b);
    times.push_back(truth_traj[k].first);
    improved += b < a ? 1 : 0;
  }

  OutputDir out(cfg.output_dir);
  out.write("rmse.csv", rmse_csv.str());
  out.write("map.csv", csv_vector_rows("index,value", post.map_point.values));
  std::ostringstream trace;
  trace << "iteration,objective\n";
  for (const auto& [it, f] : post.objective_trace) trace << it << ',' << format_double(f) << '\n';
  out.write("objective.csv", trace.str());

  json files = {{"rmse", "rmse.csv"}, {"map", "map.csv"}, {"objective", "objective.csv"}};
  json posterior = {{"converged", post.converged},
                    {"iterations", post.objective_trace.empty() ? 0 : post.objective_trace.back().first},
                    {"times", times},
                    {"prior_rmse", prior_rmse},
                    {"posterior_rmse", post_rmse},
                    {"posterior_improves_every_time", improved == truth_traj.size()},
                    {"map", to_json(post.map_point.values)}};
  if (!failure.empty()) posterior["error"] = failure;
  if (post.covariance) {
    out.write("posterior_covariance.txt", matrix_text(post.covariance->matrix()));
    files["posterior_covariance"] = "posterior_covariance.txt";
  }
  if (cfg.assimilation.closed_form_check && s.model->is_linear() && s.model->dense_operator()) {
    const PosteriorResult cf = closed_form_posterior(s.ip);
    const Vector& m_cf = cf.map_point.values;
    const double mean_abs = (post.map_point.values - m_cf).lpNorm<Eigen::Infinity>();
    json closed = {{"max_abs_mean_error", mean_abs},
                   {"relative_mean_error", (post.map_point.values - m_cf).norm() / std::max(m_cf.norm(), 1e-300)}};
    if (post.covariance && cf.covariance) {
      const Matrix err = (post.covariance->matrix() - cf.covariance->matrix()).cwiseAbs();
      out.write("covariance_error.txt", matrix_text(err));
      files["covariance_error"] = "covariance_error.txt";
      closed["max_abs_covariance_error"] = err.maxCoeff();
    }
    posterior["closed_form"] = closed;
  }
  posterior["files"] = files;
  report.bundle["posterior"] = posterior;
  finish(out, report, {{"total_seconds", seconds_since(t0)}, {"solve_seconds", solve_seconds}});

  std::ostringstream summary;
  summary << "assimilate: " << (post.converged ? "converged" : "did not converge") << "; posterior RMSE below prior at "
          << improved << "/" << truth_traj.size() << " times";
  report.summary = summary.str();
  return report;
}

RunReport run_oed(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  require(cfg.oed.has_value(), ErrorCode::MissingComponent, "oed (add an \"oed\" block to the config)");
  const OedSpec& spec = *cfg.oed;
  const ExperimentSetup s = build_experiment(cfg);
  const LinearOEDProblem problem(s.ip, s.obs_indices);
  const Eigen::Index n_s = problem.sensor_count();

  const Utility utility = [&](const DesignVector& d) {
    return problem.utility(spec.criterion, spec.penalty, d,
                           d.is_binary() ? WeightingMode::BinaryPseudoInverse : WeightingMode::HadamardRelaxed);
  };

  RunReport report;
  report.bundle = bundle_header(cfg);
  const SolverKind solver = cfg.kind == ExperimentKind::BruteForce ? SolverKind::BruteForce : spec.solver.kind;

  const auto t_solve = Clock::now();
  OEDResult result;
  std::string failure;
  if (solver == SolverKind::Relaxed) {
    try {
      result = solve_relaxed(spec.criterion, spec.penalty, problem, spec.solver.relaxed);
    } catch (const NonConvergence<OEDResult>& e) {
      result = e.best();
      failure = e.what();
      report.exit_code = kExitNonConvergence;
    }
  } else if (solver == SolverKind::Stochastic) {
    Rng rng = Rng(cfg.seed).substream("solver");
    StochasticOptions opts = spec.solver.stochastic;
    opts.workers = cfg.workers;
    result = solve_stochastic(utility, n_s, rng, opts);
  } else {
    result = brute_force(utility, n_s, cfg.workers);
  }
  const double solve_seconds = seconds_since(t_solve);

  OEDResult table;
  const bool enumerate = solver == SolverKind::BruteForce || spec.brute_force_compare;
  if (solver == SolverKind::BruteForce) table = result;
  else if (enumerate) table = brute_force(utility, n_s, cfg.workers);

  OutputDir out(cfg.output_dir);
  json files = {{"design", "design.csv"}, {"sensors", "sensors.csv"}};

  if (!result.trajectory.empty()) {
    std::ostringstream os;
    os << "iteration,utility";
    for (Eigen::Index i = 0; i < n_s; ++i) os << ",p" << i;
    os << '\n';
    for (const auto& tp : result.trajectory) {
      os << tp.iteration << ',' << format_double(tp.utility);
      for (Eigen::Index i = 0; i < tp.parameter.size(); ++i) os << ',' << format_double(tp.parameter(i));
      os << '\n';
    }
    out.write("objective.csv", os.str());
    files["objective"] = "objective.csv";
  }

  const DesignVector& chosen = result.rounded_design ? *result.rounded_design : result.optimal_design;
  {
    std::ostringstream os;
    os << "sensor,weight,selected\n";
    for (Eigen::Index i = 0; i < n_s; ++i)
      os << i << ',' << format_double(result.optimal_design[i]) << ',' << (chosen[i] == 1.0 ? 1 : 0) << '\n';
    out.write("design.csv", os.str());
  }
  {
    std::ostringstream os;
    os << (s.point_sensors ? "sensor,x,y,active\n" : "sensor,state_index,active\n");
    for (Eigen::Index i = 0; i < n_s; ++i) {
      const auto& loc = s.sensor_locations[static_cast<std::size_t>(i)];
      os << i << ',';
      if (s.point_sensors) os << format_double(loc.first) << ',' << format_double(loc.second);
      else os << static_cast<long long>(loc.first);
      os << ',' << (chosen[i] == 1.0 ? 1 : 0) << '\n';
    }
    out.write("sensors.csv", os.str());
  }
  if (!result.sampled_designs.empty()) {
    std::ostringstream os;
    os << "sample,design_index,utility\n";
    for (std::size_t j = 0; j < result.sampled_designs.size(); ++j)
      os << j << ',' << result.sampled_designs[j].first.to_index() << ','
         << format_double(result.sampled_designs[j].second) << '\n';
    out.write("sampled_designs.csv", os.str());
    files["sampled_designs"] = "sampled_designs.csv";
  }

  json oed = {{"solver", to_string(solver)},
              {"criterion", to_string(spec.criterion.kind)},
              {"orientation", spec.criterion.orientation() == Orientation::Maximize ? "maximize" : "minimize"},
              {"penalty",
               {{"kind", to_string(spec.penalty.kind)},
                {"alpha", spec.penalty.alpha},
                {"budget", spec.penalty.budget ? json(*spec.penalty.budget) : json(nullptr)}}},
              {"n_sensors", n_s},
              {"optimal_design", to_json(result.optimal_design.weights())},
              {"optimal_value", result.optimal_value},
              {"converged", result.converged},
              {"iterations", result.iterations},
              {"final_parameter", to_json(result.final_parameter)}};
  if (result.optimal_design.is_binary()) oed["optimal_index"] = result.optimal_design.to_index();
  if (result.rounded_design) {
    oed["rounded_design"] = to_json(result.rounded_design->weights());
    oed["rounded_value"] = *result.rounded_value;
  }
  if (result.best_seen_design) {
    oed["best_seen_design"] = to_json(result.best_seen_design->weights());
    oed["best_seen_value"] = *result.best_seen_value;
  }
  if (!failure.empty()) oed["error"] = failure;

  if (enumerate) {
    std::uint64_t best = table.optimal_design.to_index();
    std::ostringstream os;
    os << "index,utility,optimal\n";
    for (const auto& [idx, u] : table.brute_force_table)
      os << idx << ',' << format_double(u) << ',' << (idx == best ? 1 : 0) << '\n';
    out.write("brute_force.csv", os.str());
    files["brute_force"] = "brute_force.csv";
    // Rank of the returned design among all enumerated designs (1 = best).
    std::size_t rank = 1;
    const double chosen_value = utility(chosen);
    for (const auto& [idx, u] : table.brute_force_table) rank += u > chosen_value ? 1 : 0;
    oed["brute_force"] = {{"n_designs", table.brute_force_table.size()},
                          {"optimal_index", best},
                          {"optimal_value", table.optimal_value},
                          {"returned_design_rank", rank}};
  }
  oed["files"] = files;
  report.bundle["oed"] = oed;
  finish(out, report, {{"total_seconds", seconds_since(t0)}, {"solve_seconds", solve_seconds}});

  std::ostringstream summary;
  summary << to_string(cfg.kind) << " (" << to_string(solver) << "): utility " << format_double(result.optimal_value)
          << ", active sensors";
  for (Eigen::Index i = 0; i < n_s; ++i)
    if (chosen[i] == 1.0) summary << ' ' << i;
  report.summary = summary.str();
  return report;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::TwinData: return run_twin_data(cfg);
    case ExperimentKind::Assimilate: return run_assimilate(cfg);
    case ExperimentKind::OedSolve:
    case ExperimentKind::BruteForce: return run_oed(cfg);
  }
  return {};
}

}  // namespace oedkit
