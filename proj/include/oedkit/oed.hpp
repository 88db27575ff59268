#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "oedkit/assimilation.hpp"
#include "oedkit/stats.hpp"

namespace oedkit {

enum class Orientation { Maximize, Minimize };

enum class CriterionKind { AFim, DFim, APosteriorGoal, DPosteriorGoal };

/// Optimality criterion. FIM kinds are maximized; posterior kinds (trace or
/// log-determinant of P Sigma_post P^T, P defaulting to the identity) are
/// minimized.
struct Criterion {
  CriterionKind kind = CriterionKind::AFim;
  std::optional<Matrix> goal_operator;

  Orientation orientation() const {
    return kind == CriterionKind::AFim || kind == CriterionKind::DFim ? Orientation::Maximize
                                                                      : Orientation::Minimize;
  }
};

struct CriterionValue {
  double value = 0.0;
  Orientation orientation = Orientation::Maximize;

  /// Value signed so that larger is better.
  double utility() const { return orientation == Orientation::Maximize ? value : -value; }
};

enum class PenaltyKind { L0, L1, SmoothedL0, BudgetEquality };

/// Sparsity term Phi entering the utility as -alpha * Phi(design).
///
///   l0               count of nonzeros, or (count - budget)^2 when a budget is set
///   l1               sum of weights
///   smoothed-l0      sum w_i^2 / (w_i^2 + smoothing)
///   budget-equality  (sum of weights - budget)^2
struct Penalty {
  PenaltyKind kind = PenaltyKind::L1;
  double alpha = 0.0;
  std::optional<int> budget;
  double smoothing = 1e-2;

  bool differentiable() const { return kind != PenaltyKind::L0; }
  void validate(Eigen::Index n_sensors) const;
};

double penalty_value(const Penalty& p, const DesignVector& design);
/// Throws NotDifferentiable for l0.
Vector penalty_gradient(const Penalty& p, const DesignVector& design);

/// Precomputed linear-Gaussian quantities for repeated criterion evaluation
/// over designs. Criteria are evaluated in observation space through
/// K = (I + W S)^{-1} W, S = F Gamma_pr F^T with F the time-stacked forward
/// blocks, so no state-sized factorization is needed per design except for
/// the log-determinant of a full-state goal posterior.
class LinearOEDProblem {
 public:
  /// Uses the observation times registered on ip.
  explicit LinearOEDProblem(const InverseProblem& ip);
  LinearOEDProblem(const InverseProblem& ip, std::vector<std::size_t> observation_indices);

  Eigen::Index sensor_count() const noexcept { return n_sensors_; }
  Eigen::Index state_size() const noexcept { return n_state_; }
  const std::vector<std::size_t>& observation_indices() const noexcept { return indices_; }
  const std::vector<Matrix>& forward_blocks() const noexcept { return blocks_; }
  const SymMatrix& noise_covariance() const noexcept { return noise_cov_; }

  /// True when ip has been re-registered since this object was built from it.
  bool is_stale(const InverseProblem& ip) const noexcept { return ip.revision() != revision_; }

  SymMatrix fisher_information(const DesignVector& design,
                               WeightingMode mode = WeightingMode::HadamardRelaxed) const;
  SymMatrix posterior_covariance(const DesignVector& design,
                                 WeightingMode mode = WeightingMode::HadamardRelaxed) const;

  CriterionValue criterion_value(const Criterion& c, const DesignVector& design,
                                 WeightingMode mode = WeightingMode::HadamardRelaxed) const;

  /// Gradient of criterion_value under the relaxed weighting. Components at
  /// zero weights take the one-sided limit, which is zero.
  Vector criterion_gradient(const Criterion& c, const DesignVector& design) const;

  /// criterion utility - alpha * penalty.
  double utility(const Criterion& c, const Penalty& p, const DesignVector& design,
                 WeightingMode mode = WeightingMode::HadamardRelaxed) const;
  Vector utility_gradient(const Criterion& c, const Penalty& p, const DesignVector& design) const;

 private:
  Matrix solve_k(const SymMatrix& w) const;
  Matrix block_diagonal_sum(const Matrix& m) const;

  Eigen::Index n_state_ = 0;
  Eigen::Index n_sensors_ = 0;
  std::uint64_t revision_ = 0;
  std::vector<std::size_t> indices_;
  std::vector<Matrix> blocks_;
  SymMatrix noise_cov_;
  Matrix prior_cov_;
  Matrix prior_precision_;
  Matrix stacked_;          // F, (T n_s) x n
  Matrix gamma_ft_;         // Gamma F^T, n x (T n_s)
  Matrix s_;                // F Gamma F^T
  Matrix g_trace_;          // sum_k F_k F_k^T
  double prior_precision_trace_ = 0.0;
  double prior_precision_logdet_ = 0.0;
};

SymMatrix fisher_information(const InverseProblem& ip, const DesignVector& design,
                             WeightingMode mode = WeightingMode::HadamardRelaxed);
CriterionValue criterion_value(const Criterion& c, const InverseProblem& ip,
                               const DesignVector& design,
                               WeightingMode mode = WeightingMode::HadamardRelaxed);
Vector criterion_gradient(const Criterion& c, const InverseProblem& ip, const DesignVector& design);

enum class SolverKind { Relaxed, Stochastic, BruteForce };

struct TrajectoryPoint {
  int iteration = 0;
  Vector parameter;  // relaxed design or Bernoulli parameter
  double utility = 0.0;
};

struct OEDResult {
  SolverKind solver = SolverKind::BruteForce;
  DesignVector optimal_design;
  double optimal_value = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<std::pair<DesignVector, double>> sampled_designs;
  std::vector<std::pair<std::uint64_t, double>> brute_force_table;
  /// Relaxed solver: the rounded design and its utility.
  std::optional<DesignVector> rounded_design;
  std::optional<double> rounded_value;
  /// Stochastic solver: best design evaluated during the iterations.
  std::optional<DesignVector> best_seen_design;
  std::optional<double> best_seen_value;
  Vector final_parameter;
  int iterations = 0;
  bool converged = false;
};

using Utility = std::function<double(const DesignVector&)>;

/// Evaluates all 2^n_s binary designs in index order (bit j of the index is
/// sensor j) and returns the table with its maximizer; ties go to the lowest
/// index. Limited to n_s <= 22.
OEDResult brute_force(const Utility& utility, Eigen::Index n_sensors, unsigned workers = 1);

enum class RoundingRule { ThresholdHalf, TopK };

/// threshold-half activates w_i >= 0.5; top-k activates the k largest
/// weights with ties broken by lowest index.
DesignVector round_design(const DesignVector& design, RoundingRule rule,
                          std::optional<int> k = std::nullopt);

/// eta_n = eta0 / (1 + n / tau).
struct StepSchedule {
  double eta0 = 0.1;
  double tau = 50.0;
  double at(int n) const { return eta0 / (1.0 + static_cast<double>(n) / tau); }
};

struct RelaxedOptions {
  StepSchedule step;
  int max_iter = 500;
  double tol = 1e-6;
  std::optional<Vector> init;  // defaults to 0.5 everywhere
  RoundingRule rounding = RoundingRule::ThresholdHalf;
  std::optional<int> round_k;
};

/// Projected gradient ascent on [0,1]^n_s of the penalized utility. Rejects
/// non-differentiable penalties. Converged when the unit-step projected
/// gradient falls below tol; otherwise throws NonConvergence<OEDResult>
/// holding the best iterate.
OEDResult solve_relaxed(const Criterion& c, const Penalty& p, const LinearOEDProblem& problem,
                        const RelaxedOptions& opts = {});

struct StochasticOptions {
  std::optional<Vector> theta0;  // defaults to 0.5 everywhere
  StepSchedule step;
  int ensemble_size = 32;    // designs per gradient estimate
  int final_samples = 64;    // designs drawn from the final policy
  int baseline_batches = 4;  // baseline batch count
  int max_iter = 300;
  double bound = 1e-3;       // theta is projected onto [bound, 1 - bound]
  double tol = 1e-6;
  unsigned workers = 1;
  /// Subtract the empty-design utility before estimating baselines and
  /// gradients. The optimum and the expected gradient are unchanged, but the
  /// baseline noise, which scales with |U|, no longer sees a large constant.
  bool center_utility = false;
};

/// Control-variate baseline estimate; returns b after the final scaling
/// b * Nens / (b_m * sum_i 1 / (theta_i - theta_i^2)).
double optimal_baseline(const Vector& theta, const Utility& utility, int ensemble_size,
                        int baseline_batches, Rng& rng);

/// One score-function gradient estimate (1/Nens) sum_j (U(d_j) - b) grad log p(d_j).
Vector stochastic_gradient_estimate(const Vector& theta, const Utility& utility, int ensemble_size,
                                    double baseline, Rng& rng);

/// Binary optimization by maximizing E_{d ~ Bernoulli(theta)}[U(d) - b] over
/// theta, then returning the best of final_samples designs drawn from the
/// last policy. The utility is treated as a black box and is assumed
/// deterministic (values are memoized per design).
OEDResult solve_stochastic(const Utility& utility, Eigen::Index n_sensors, Rng& rng,
                           const StochasticOptions& opts = {});

}  // namespace oedkit
