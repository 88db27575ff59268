#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "oedkit/design.hpp"

namespace oedkit {

/// Simulation model, observation operator, prior, design-weighted noise and
/// data over a time window.
///
/// Components can be bundled at construction or registered afterwards;
/// registering a component again replaces it and bumps revision(), which
/// consumers use to detect stale cached quantities.
class InverseProblem {
 public:
  InverseProblem() = default;
  InverseProblem(std::shared_ptr<const SimulationModel> model,
                 std::shared_ptr<const PointObservationOperator> obs_op, GaussianMeasure prior,
                 WeightedNoiseModel noise, TimeGrid window);

  void register_model(std::shared_ptr<const SimulationModel> model);
  void register_observation_operator(std::shared_ptr<const PointObservationOperator> obs_op);
  void register_prior(GaussianMeasure prior);
  void register_noise(WeightedNoiseModel noise);
  void register_noise(GaussianMeasure noise) { register_noise(WeightedNoiseModel(std::move(noise))); }
  void register_window(TimeGrid window);
  /// Replaces all data. Times must sit on the window lattice.
  void register_observations(std::vector<ObservationVector> observations);
  void add_observation(ObservationVector observation);
  void clear_observations();

  /// Replaces the design of the registered noise model.
  void set_design(DesignVector design);

  bool has_model() const noexcept { return model_ != nullptr; }
  bool has_prior() const noexcept { return prior_.has_value(); }

  const SimulationModel& model() const;
  const PointObservationOperator& observation_operator() const;
  const GaussianMeasure& prior() const;
  const WeightedNoiseModel& noise() const;
  const TimeGrid& window() const;

  /// Data keyed by lattice index.
  const std::map<std::size_t, ObservationVector>& observations() const noexcept { return data_; }

  /// Throws MissingComponent naming the first absent component, or the
  /// relevant error for inconsistent sizes.
  void validate() const;

  std::uint64_t revision() const noexcept { return revision_; }

 private:
  std::size_t index_of(double t) const;

  std::shared_ptr<const SimulationModel> model_;
  std::shared_ptr<const PointObservationOperator> obs_op_;
  std::optional<GaussianMeasure> prior_;
  std::optional<WeightedNoiseModel> noise_;
  std::optional<TimeGrid> window_;
  std::map<std::size_t, ObservationVector> data_;
  std::uint64_t revision_ = 0;
};

struct PosteriorResult {
  StateVector map_point;
  std::optional<SymMatrix> covariance;
  std::vector<std::pair<int, double>> objective_trace;
  bool converged = false;
};

/// 1/2 sum_k |O x_k - y_k|^2_W + 1/2 |theta - theta_pr|^2_{Gamma_pr^-1}.
double fourdvar_objective(const InverseProblem& ip, const Vector& theta);

/// Gradient of fourdvar_objective by one backward adjoint sweep.
Vector fourdvar_gradient(const InverseProblem& ip, const Vector& theta);

/// Hessian-vector product of the 4DVar objective (exact for linear models):
/// Gamma_pr^{-1} v + sum_k M^k^T O^T W O M^k v, by a tangent-linear forward
/// pass and an adjoint sweep.
Vector fourdvar_hessian_action(const InverseProblem& ip, const Vector& v);

struct SolveOptions {
  bool update_posterior_covariance = false;
  bool skip_map = false;
  std::optional<Vector> init;
  int max_iter = 200;
  double grad_tol = 1e-8;
  int lbfgs_memory = 10;
};

/// MAP point by prior-preconditioned L-BFGS, started at the prior mean unless
/// opts.init is given. The convergence test is on the gradient with respect
/// to the whitened parameter L^{-1}(theta - theta_pr), L = chol(Gamma_pr).
/// Throws NonConvergence<PosteriorResult> holding the best iterate.
PosteriorResult solve_inverse_problem(const InverseProblem& ip, const SolveOptions& opts = {});

/// Linear-Gaussian posterior from explicit powers of the dense propagator:
/// Sigma = (sum_k F_k^T W F_k + Gamma_pr^{-1})^{-1}, F_k = O A^k, and
/// mean = Sigma (Gamma_pr^{-1} theta_pr + sum_k F_k^T W y_k).
PosteriorResult closed_form_posterior(const InverseProblem& ip);

/// F_k = O M^k for each requested lattice index, built row by row through
/// adjoint sweeps. Requires a linear model.
std::vector<Matrix> forward_blocks(const InverseProblem& ip, const std::vector<std::size_t>& indices);

/// Lattice indices carrying data, ascending.
std::vector<std::size_t> observation_indices(const InverseProblem& ip);

/// Push-forward through a linear goal operator: mean P m, covariance P S P^T.
PosteriorResult goal_posterior(const PosteriorResult& pr, const Matrix& p_matrix);
GaussianMeasure goal_prior(const GaussianMeasure& prior, const Matrix& p_matrix);

double rmse(const Vector& a, const Vector& b);

/// y(t) = O x(t; truth) + noise drawn from the base observation covariance.
std::vector<ObservationVector> synthesize_observations(const InverseProblem& ip, const Vector& truth,
                                                       const std::vector<double>& times, Rng& rng,
                                                       bool add_noise = true);

}  // namespace oedkit
