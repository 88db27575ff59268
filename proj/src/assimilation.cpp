#include "oedkit/assimilation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace oedkit {

namespace {

Error missing(const char* what) {
  return Error(ErrorCode::MissingComponent,
               std::string(what) + " (register it on the inverse problem before solving)");
}

}  // namespace

InverseProblem::InverseProblem(std::shared_ptr<const SimulationModel> model,
                               std::shared_ptr<const PointObservationOperator> obs_op,
                               GaussianMeasure prior, WeightedNoiseModel noise, TimeGrid window) {
  register_model(std::move(model));
  register_observation_operator(std::move(obs_op));
  register_prior(std::move(prior));
  register_noise(std::move(noise));
  register_window(window);
}

void InverseProblem::register_model(std::shared_ptr<const SimulationModel> model) {
  require(model != nullptr, ErrorCode::InvalidArgument, "null simulation model");
  model_ = std::move(model);
  ++revision_;
}

void InverseProblem::register_observation_operator(
    std::shared_ptr<const PointObservationOperator> obs_op) {
  require(obs_op != nullptr, ErrorCode::InvalidArgument, "null observation operator");
  obs_op_ = std::move(obs_op);
  ++revision_;
}

void InverseProblem::register_prior(GaussianMeasure prior) {
  prior_.emplace(std::move(prior));
  ++revision_;
}

void InverseProblem::register_noise(WeightedNoiseModel noise) {
  noise_.emplace(std::move(noise));
  ++revision_;
}

void InverseProblem::register_window(TimeGrid window) {
  window_ = window;
  // Re-key existing data against the new lattice.
  std::map<std::size_t, ObservationVector> rekeyed;
  for (auto& [k, obs] : data_) rekeyed.emplace(index_of(obs.time), std::move(obs));
  data_ = std::move(rekeyed);
  ++revision_;
}

std::size_t InverseProblem::index_of(double t) const {
  if (!window_) throw missing("window");
  const auto k = window_->lattice_index(t);
  if (!k) {
    std::ostringstream os;
    os << "observation time " << t << " is not on the integration lattice t0 + k*dt within the window";
    throw Error(ErrorCode::TimeOffLattice, os.str());
  }
  return *k;
}

void InverseProblem::register_observations(std::vector<ObservationVector> observations) {
  std::map<std::size_t, ObservationVector> fresh;
  for (auto& obs : observations) {
    const std::size_t k = index_of(obs.time);
    require(fresh.find(k) == fresh.end(), ErrorCode::InvalidArgument,
            "two observations registered at the same time");
    fresh.emplace(k, std::move(obs));
  }
  data_ = std::move(fresh);
  ++revision_;
}

void InverseProblem::add_observation(ObservationVector observation) {
  const std::size_t k = index_of(observation.time);
  require(data_.find(k) == data_.end(), ErrorCode::InvalidArgument,
          "an observation is already registered at this time");
  data_.emplace(k, std::move(observation));
  ++revision_;
}

void InverseProblem::clear_observations() {
  data_.clear();
  ++revision_;
}

void InverseProblem::set_design(DesignVector design) {
  if (!noise_) throw missing("noise");
  noise_->set_design(std::move(design));
  ++revision_;
}

const SimulationModel& InverseProblem::model() const {
  if (!model_) throw missing("model");
  return *model_;
}
const PointObservationOperator& InverseProblem::observation_operator() const {
  if (!obs_op_) throw missing("observation_operator");
  return *obs_op_;
}
const GaussianMeasure& InverseProblem::prior() const {
  if (!prior_) throw missing("prior");
  return *prior_;
}
const WeightedNoiseModel& InverseProblem::noise() const {
  if (!noise_) throw missing("noise");
  return *noise_;
}
const TimeGrid& InverseProblem::window() const {
  if (!window_) throw missing("window");
  return *window_;
}

void InverseProblem::validate() const {
  const auto& m = model();
  const auto& o = observation_operator();
  const auto& pr = prior();
  const auto& nz = noise();
  window();
  require(o.state_size() == m.state_size(), ErrorCode::DimensionMismatch,
          "observation operator state size differs from the model state size");
  require(pr.size() == m.state_size(), ErrorCode::DimensionMismatch,
          "prior dimension differs from the model state size");
  require(nz.size() == o.observation_size(), ErrorCode::DimensionMismatch,
          "noise dimension differs from the observation size");
  for (const auto& [k, obs] : data_)
    require(obs.values.size() == o.observation_size(), ErrorCode::DimensionMismatch,
            "observation data length differs from the observation size");
}

std::vector<std::size_t> observation_indices(const InverseProblem& ip) {
  std::vector<std::size_t> idx;
  for (const auto& [k, obs] : ip.observations()) idx.push_back(k);
  return idx;
}

double fourdvar_objective(const InverseProblem& ip, const Vector& theta) {
  ip.validate();
  const auto& model = ip.model();
  const auto& op = ip.observation_operator();
  const auto& w = ip.noise().precision().matrix();
  require(theta.size() == model.state_size(), ErrorCode::DimensionMismatch,
          "parameter length differs from the model state size");

  const Vector dtheta = theta - ip.prior().mean();
  double j = 0.5 * dtheta.dot(ip.prior().apply_precision(dtheta));

  Vector x = theta;
  std::size_t k = 0;
  for (const auto& [idx, obs] : ip.observations()) {
    for (; k < idx; ++k) x = model.step(x);
    const Vector r = observe(op, x) - obs.values;
    j += 0.5 * r.dot(w * r);
  }
  return j;
}

Vector fourdvar_gradient(const InverseProblem& ip, const Vector& theta) {
  ip.validate();
  const auto& model = ip.model();
  const auto& op = ip.observation_operator();
  const auto& w = ip.noise().precision().matrix();
  require(theta.size() == model.state_size(), ErrorCode::DimensionMismatch,
          "parameter length differs from the model state size");

  // Forward pass keeps the observed states only.
  std::map<std::size_t, Vector> residuals;
  Vector x = theta;
  std::size_t k = 0;
  for (const auto& [idx, obs] : ip.observations()) {
    for (; k < idx; ++k) x = model.step(x);
    residuals.emplace(idx, observe(op, x) - obs.values);
  }

  // Backward sweep: lambda_k = M^T lambda_{k+1} + O^T W r_k.
  Vector lambda = Vector::Zero(model.state_size());
  const std::size_t last = residuals.empty() ? 0 : residuals.rbegin()->first;
  for (std::size_t kk = last + 1; kk-- > 0;) {
    if (auto it = residuals.find(kk); it != residuals.end())
      lambda += observe_adjoint(op, Vector(w * it->second));
    if (kk > 0) lambda = model.adjoint_step(lambda);
  }
  return ip.prior().apply_precision(theta - ip.prior().mean()) + lambda;
}

Vector fourdvar_hessian_action(const InverseProblem& ip, const Vector& v) {
  ip.validate();
  const auto& model = ip.model();
  const auto& op = ip.observation_operator();
  const auto& w = ip.noise().precision().matrix();
  require(v.size() == model.state_size(), ErrorCode::DimensionMismatch,
          "direction length differs from the model state size");

  std::map<std::size_t, Vector> weighted;
  Vector x = v;
  std::size_t k = 0;
  for (const auto& [idx, obs] : ip.observations()) {
    for (; k < idx; ++k) x = model.step(x);
    weighted.emplace(idx, w * observe(op, x));
  }
  Vector lambda = Vector::Zero(model.state_size());
  const std::size_t last = weighted.empty() ? 0 : weighted.rbegin()->first;
  for (std::size_t kk = last + 1; kk-- > 0;) {
    if (auto it = weighted.find(kk); it != weighted.end()) lambda += observe_adjoint(op, it->second);
    if (kk > 0) lambda = model.adjoint_step(lambda);
  }
  return ip.prior().apply_precision(v) + lambda;
}

namespace {

SymMatrix assemble_posterior_covariance(const InverseProblem& ip) {
  const Eigen::Index n = ip.model().state_size();
  Matrix h(n, n);
  Vector e = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e(i) = 1.0;
    h.col(i) = fourdvar_hessian_action(ip, e);
    e(i) = 0.0;
  }
  return inverse_spd(SymMatrix(Matrix(0.5 * (h + h.transpose()))));
}

// Two-loop recursion on the stored (s, y) pairs.
Vector lbfgs_direction(const Vector& g, const std::deque<std::pair<Vector, Vector>>& history) {
  Vector q = g;
  std::vector<double> alpha(history.size());
  for (std::size_t i = history.size(); i-- > 0;) {
    const auto& [s, y] = history[i];
    alpha[i] = s.dot(q) / y.dot(s);
    q -= alpha[i] * y;
  }
  if (!history.empty()) {
    const auto& [s, y] = history.back();
    q *= s.dot(y) / y.dot(y);
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& [s, y] = history[i];
    const double beta = y.dot(q) / y.dot(s);
    q += (alpha[i] - beta) * s;
  }
  return -q;
}

}  // namespace

PosteriorResult solve_inverse_problem(const InverseProblem& ip, const SolveOptions& opts) {
  ip.validate();
  const auto& prior = ip.prior();
  const Eigen::Index n = ip.model().state_size();
  require(opts.max_iter >= 0 && opts.grad_tol > 0.0 && opts.lbfgs_memory >= 1,
          ErrorCode::InvalidArgument, "invalid solver options");

  const Vector theta0 = opts.init.value_or(prior.mean());
  require(theta0.size() == n, ErrorCode::DimensionMismatch, "initial point length mismatch");

  PosteriorResult result;
  if (opts.skip_map) {
    result.map_point = {theta0, ip.window().t0};
  } else {
    // theta = theta_pr + L xi, so the prior term is 1/2 |xi|^2.
    const Matrix& l = prior.cholesky();
    auto to_theta = [&](const Vector& xi) -> Vector { return prior.mean() + l * xi; };
    auto grad_xi = [&](const Vector& theta) -> Vector {
      return l.transpose() * fourdvar_gradient(ip, theta);
    };

    Vector xi = l.triangularView<Eigen::Lower>().solve(theta0 - prior.mean());
    Vector theta = to_theta(xi);
    double f = fourdvar_objective(ip, theta);
    Vector g = grad_xi(theta);
    std::deque<std::pair<Vector, Vector>> history;
    result.objective_trace.emplace_back(0, f);

    int iter = 0;
    bool stalled = false;
    while (g.norm() > opts.grad_tol && iter < opts.max_iter) {
      Vector d = lbfgs_direction(g, history);
      double slope = g.dot(d);
      if (slope >= 0.0) {
        history.clear();
        d = -g;
        slope = -g.squaredNorm();
      }
      double step = 1.0;
      Vector xi_new, g_new;
      double f_new = f;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        xi_new = xi + step * d;
        f_new = fourdvar_objective(ip, to_theta(xi_new));
        // The slack keeps the test meaningful once the decrease drops below
        // the rounding error of f.
        if (f_new <= f + 1e-4 * step * slope + 1e-14 * std::abs(f)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        stalled = true;
        break;
      }
      g_new = grad_xi(to_theta(xi_new));
      Vector s = xi_new - xi, y = g_new - g;
      if (s.dot(y) > 1e-300) {
        history.emplace_back(std::move(s), std::move(y));
        if (static_cast<int>(history.size()) > opts.lbfgs_memory) history.pop_front();
      }
      xi = std::move(xi_new);
      g = std::move(g_new);
      f = f_new;
      ++iter;
      result.objective_trace.emplace_back(iter, f);
    }
    result.map_point = {to_theta(xi), ip.window().t0};
    result.converged = g.norm() <= opts.grad_tol;
    if (!result.converged) {
      if (opts.update_posterior_covariance) result.covariance = assemble_posterior_covariance(ip);
      std::ostringstream os;
      os << (stalled ? "line search stalled" : "iteration limit reached")
         << " with gradient norm " << g.norm() << " after " << iter << " iterations";
      throw NonConvergence<PosteriorResult>(os.str(), std::move(result));
    }
  }
  if (opts.update_posterior_covariance) result.covariance = assemble_posterior_covariance(ip);
  return result;
}

PosteriorResult closed_form_posterior(const InverseProblem& ip) {
  ip.validate();
  const auto& model = ip.model();
  const auto a_opt = model.dense_operator();
  if (!model.is_linear() || !a_opt)
    throw Error(ErrorCode::NotLinear, "closed-form posterior needs a dense linear propagator");
  const Matrix& a = *a_opt;
  const Matrix o = ip.observation_operator().matrix();
  const Matrix& w = ip.noise().precision().matrix();
  const auto& prior = ip.prior();

  Matrix fim = prior.precision().matrix();
  Vector rhs = prior.apply_precision(prior.mean());
  Matrix power = Matrix::Identity(a.rows(), a.cols());
  std::size_t k = 0;
  for (const auto& [idx, obs] : ip.observations()) {
    for (; k < idx; ++k) power = a * power;
    const Matrix f = o * power;
    fim += f.transpose() * w * f;
    rhs += f.transpose() * (w * obs.values);
  }
  PosteriorResult result;
  result.covariance = inverse_spd(SymMatrix(Matrix(0.5 * (fim + fim.transpose()))));
  result.map_point = {result.covariance->matrix() * rhs, ip.window().t0};
  result.converged = true;
  return result;
}

std::vector<Matrix> forward_blocks(const InverseProblem& ip, const std::vector<std::size_t>& indices) {
  ip.validate();
  const auto& model = ip.model();
  if (!model.is_linear()) throw Error(ErrorCode::NotLinear, "Fisher information needs a linear model");
  const Matrix ot = ip.observation_operator().matrix().transpose();
  std::vector<Matrix> blocks;
  blocks.reserve(indices.size());
  for (std::size_t idx : indices) {
    Matrix cols = ot;  // columns of (M^T)^idx O^T
    for (std::size_t s = 0; s < idx; ++s)
      for (Eigen::Index c = 0; c < cols.cols(); ++c) cols.col(c) = model.adjoint_step(cols.col(c));
    blocks.push_back(cols.transpose());
  }
  return blocks;
}

PosteriorResult goal_posterior(const PosteriorResult& pr, const Matrix& p_matrix) {
  require(pr.covariance.has_value(), ErrorCode::InvalidArgument,
          "goal posterior needs a posterior covariance");
  require(p_matrix.cols() == pr.map_point.values.size(), ErrorCode::DimensionMismatch,
          "goal operator columns must match the parameter dimension");
  PosteriorResult out;
  out.map_point = {p_matrix * pr.map_point.values, pr.map_point.time};
  const Matrix cov = p_matrix * pr.covariance->matrix() * p_matrix.transpose();
  out.covariance = SymMatrix(Matrix(0.5 * (cov + cov.transpose())));
  out.objective_trace = pr.objective_trace;
  out.converged = pr.converged;
  return out;
}

GaussianMeasure goal_prior(const GaussianMeasure& prior, const Matrix& p_matrix) {
  require(p_matrix.cols() == prior.size(), ErrorCode::DimensionMismatch,
          "goal operator columns must match the parameter dimension");
  const Matrix cov = p_matrix * prior.covariance().matrix() * p_matrix.transpose();
  return GaussianMeasure(p_matrix * prior.mean(), SymMatrix(Matrix(0.5 * (cov + cov.transpose()))));
}

double rmse(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorCode::DimensionMismatch, "rmse needs equal lengths");
  require(a.size() > 0, ErrorCode::InvalidArgument, "rmse of empty vectors");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

std::vector<ObservationVector> synthesize_observations(const InverseProblem& ip, const Vector& truth,
                                                       const std::vector<double>& times, Rng& rng,
                                                       bool add_noise) {
  const auto& model = ip.model();
  const auto& op = ip.observation_operator();
  const auto& window = ip.window();
  std::vector<std::pair<std::size_t, double>> targets;
  for (double t : times) {
    const auto k = window.lattice_index(t);
    if (!k) {
      std::ostringstream os;
      os << "observation time " << t << " is not on the integration lattice";
      throw Error(ErrorCode::TimeOffLattice, os.str());
    }
    targets.emplace_back(*k, window.time(*k));
  }
  std::vector<std::size_t> order(targets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return targets[a].first < targets[b].first; });

  std::vector<ObservationVector> out(targets.size());
  Vector x = truth;
  std::size_t k = 0;
  for (std::size_t i : order) {
    for (; k < targets[i].first; ++k) x = model.step(x);
    out[i] = {observe(op, x), targets[i].second};
  }
  // Noise is drawn in the caller's time order.
  if (add_noise)
    for (auto& obs : out) obs.values += gaussian_sample(ip.noise().base(), rng) - ip.noise().base().mean();
  return out;
}

}  // namespace oedkit
