#include "oedkit/oed.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace oedkit {

// ---------------------------------------------------------------------------
// Penalties

void Penalty::validate(Eigen::Index n_sensors) const {
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorCode::InvalidArgument,
          "penalty weight alpha must be non-negative");
  if (budget) {
    require(kind == PenaltyKind::L0 || kind == PenaltyKind::BudgetEquality,
            ErrorCode::InvalidArgument, "a budget applies only to l0 and budget-equality penalties");
    require(*budget >= 0 && *budget <= n_sensors, ErrorCode::InvalidArgument,
            "penalty budget must lie in [0, n_sensors]");
  }
  if (kind == PenaltyKind::BudgetEquality)
    require(budget.has_value(), ErrorCode::InvalidArgument, "budget-equality penalty needs a budget");
  if (kind == PenaltyKind::SmoothedL0)
    require(smoothing > 0.0, ErrorCode::InvalidArgument, "smoothed-l0 needs a positive smoothing");
}

double penalty_value(const Penalty& p, const DesignVector& design) {
  p.validate(design.size());
  const Vector& w = design.weights();
  switch (p.kind) {
    case PenaltyKind::L0: {
      const auto count = static_cast<double>(design.active_count());
      if (!p.budget) return count;
      const double dev = count - *p.budget;
      return dev * dev;
    }
    case PenaltyKind::L1:
      return w.sum();
    case PenaltyKind::SmoothedL0: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) s += w(i) * w(i) / (w(i) * w(i) + p.smoothing);
      return s;
    }
    case PenaltyKind::BudgetEquality: {
      const double dev = w.sum() - *p.budget;
      return dev * dev;
    }
  }
  return 0.0;
}

Vector penalty_gradient(const Penalty& p, const DesignVector& design) {
  p.validate(design.size());
  const Vector& w = design.weights();
  switch (p.kind) {
    case PenaltyKind::L0:
      throw Error(ErrorCode::NotDifferentiable, "the l0 penalty has no gradient");
    case PenaltyKind::L1:
      return Vector::Ones(w.size());
    case PenaltyKind::SmoothedL0: {
      Vector g(w.size());
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double den = w(i) * w(i) + p.smoothing;
        g(i) = 2.0 * w(i) * p.smoothing / (den * den);
      }
      return g;
    }
    case PenaltyKind::BudgetEquality:
      return Vector::Constant(w.size(), 2.0 * (w.sum() - *p.budget));
  }
  return Vector::Zero(w.size());
}

// ---------------------------------------------------------------------------
// Linear-Gaussian criteria

LinearOEDProblem::LinearOEDProblem(const InverseProblem& ip)
    : LinearOEDProblem(ip, oedkit::observation_indices(ip)) {}

LinearOEDProblem::LinearOEDProblem(const InverseProblem& ip, std::vector<std::size_t> indices)
    : revision_(ip.revision()), indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  blocks_ = oedkit::forward_blocks(ip, indices_);
  n_state_ = ip.model().state_size();
  n_sensors_ = ip.observation_operator().observation_size();
  noise_cov_ = ip.noise().base().covariance();
  prior_cov_ = ip.prior().covariance().matrix();
  prior_precision_ = ip.prior().precision().matrix();
  prior_precision_trace_ = trace(prior_precision_);
  prior_precision_logdet_ = -logdet_spd(ip.prior().covariance());

  const auto t = static_cast<Eigen::Index>(blocks_.size());
  stacked_.resize(t * n_sensors_, n_state_);
  g_trace_ = Matrix::Zero(n_sensors_, n_sensors_);
  for (Eigen::Index k = 0; k < t; ++k) {
    const Matrix& f = blocks_[static_cast<std::size_t>(k)];
    stacked_.middleRows(k * n_sensors_, n_sensors_) = f;
    g_trace_ += f * f.transpose();
  }
  gamma_ft_ = prior_cov_ * stacked_.transpose();
  s_ = stacked_ * gamma_ft_;
  s_ = 0.5 * (s_ + s_.transpose()).eval();
}

Matrix LinearOEDProblem::solve_k(const SymMatrix& w) const {
  const Eigen::Index m = s_.rows();
  if (m == 0) return Matrix(0, 0);
  Matrix wbig = Matrix::Zero(m, m);
  for (Eigen::Index k = 0; k < m / n_sensors_; ++k)
    wbig.block(k * n_sensors_, k * n_sensors_, n_sensors_, n_sensors_) = w.matrix();
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(m, m) + wbig * s_);
  Matrix k = lu.solve(wbig);
  return 0.5 * (k + k.transpose());
}

Matrix LinearOEDProblem::block_diagonal_sum(const Matrix& m) const {
  Matrix out = Matrix::Zero(n_sensors_, n_sensors_);
  for (Eigen::Index k = 0; k < m.rows() / n_sensors_; ++k)
    out += m.block(k * n_sensors_, k * n_sensors_, n_sensors_, n_sensors_);
  return out;
}

SymMatrix LinearOEDProblem::fisher_information(const DesignVector& design, WeightingMode mode) const {
  const SymMatrix w = weighted_precision(noise_cov_, design, mode);
  Matrix fim = prior_precision_;
  for (const auto& f : blocks_) fim += f.transpose() * w.matrix() * f;
  return SymMatrix(Matrix(0.5 * (fim + fim.transpose())));
}

SymMatrix LinearOEDProblem::posterior_covariance(const DesignVector& design, WeightingMode mode) const {
  return inverse_spd(fisher_information(design, mode));
}

namespace {

struct GoalTerms {
  Matrix goal_prior;  // P Gamma P^T
  Matrix c;           // P Gamma F^T
};

}  // namespace

CriterionValue LinearOEDProblem::criterion_value(const Criterion& c, const DesignVector& design,
                                                 WeightingMode mode) const {
  require(design.size() == n_sensors_, ErrorCode::DimensionMismatch,
          "design length must equal the number of candidate sensors");
  const SymMatrix w = weighted_precision(noise_cov_, design, mode);
  CriterionValue out{0.0, c.orientation()};
  switch (c.kind) {
    case CriterionKind::AFim:
      out.value = prior_precision_trace_ + (w.matrix().array() * g_trace_.array()).sum();
      return out;
    case CriterionKind::DFim: {
      double logdet = prior_precision_logdet_;
      const Eigen::Index m = s_.rows();
      if (m > 0) {
        Matrix wbig = Matrix::Zero(m, m);
        for (Eigen::Index k = 0; k < m / n_sensors_; ++k)
          wbig.block(k * n_sensors_, k * n_sensors_, n_sensors_, n_sensors_) = w.matrix();
        Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(m, m) + wbig * s_);
        const Matrix& u = lu.matrixLU();
        for (Eigen::Index i = 0; i < m; ++i) logdet += std::log(std::abs(u(i, i)));
      }
      out.value = logdet;
      return out;
    }
    case CriterionKind::APosteriorGoal:
    case CriterionKind::DPosteriorGoal: {
      const Matrix k = solve_k(w);
      Matrix post;
      if (c.goal_operator) {
        const Matrix& p = *c.goal_operator;
        require(p.cols() == n_state_, ErrorCode::DimensionMismatch,
                "goal operator columns must match the parameter dimension");
        const Matrix cm = p * gamma_ft_;
        post = p * prior_cov_ * p.transpose();
        if (k.size() > 0) post -= cm * k * cm.transpose();
      } else {
        post = prior_cov_;
        if (k.size() > 0) post -= gamma_ft_ * k * gamma_ft_.transpose();
      }
      post = 0.5 * (post + post.transpose()).eval();
      out.value = c.kind == CriterionKind::APosteriorGoal ? trace(post) : logdet_spd(SymMatrix(post));
      return out;
    }
  }
  return out;
}

Vector LinearOEDProblem::criterion_gradient(const Criterion& c, const DesignVector& design) const {
  require(design.size() == n_sensors_, ErrorCode::DimensionMismatch,
          "design length must equal the number of candidate sensors");
  const SymMatrix wsym = weighted_precision_relaxed(noise_cov_, design);
  const Matrix& w = wsym.matrix();

  // d value / d w_j = <dW/dw_j, G> for a symmetric n_s x n_s matrix G.
  Matrix g;
  switch (c.kind) {
    case CriterionKind::AFim:
      g = g_trace_;
      break;
    case CriterionKind::DFim: {
      if (s_.rows() == 0) return Vector::Zero(n_sensors_);
      const Matrix k = solve_k(wsym);
      g = block_diagonal_sum(s_ - s_ * k * s_);
      break;
    }
    case CriterionKind::APosteriorGoal:
    case CriterionKind::DPosteriorGoal: {
      if (s_.rows() == 0) return Vector::Zero(n_sensors_);
      const Matrix k = solve_k(wsym);
      Matrix ct, goal_post;  // ct = F Gamma P^T
      if (c.goal_operator) {
        const Matrix& p = *c.goal_operator;
        require(p.cols() == n_state_, ErrorCode::DimensionMismatch,
                "goal operator columns must match the parameter dimension");
        ct = (p * gamma_ft_).transpose();
        goal_post = p * prior_cov_ * p.transpose();
      } else {
        ct = gamma_ft_.transpose();
        goal_post = prior_cov_;
      }
      goal_post -= ct.transpose() * k * ct;
      goal_post = 0.5 * (goal_post + goal_post.transpose()).eval();
      const Matrix d = ct - s_ * k * ct;  // F Sigma_post P^T
      if (c.kind == CriterionKind::APosteriorGoal) {
        g = -block_diagonal_sum(d * d.transpose());
      } else {
        Eigen::LLT<Matrix> llt(goal_post);
        if (llt.info() != Eigen::Success)
          throw Error(ErrorCode::NotPositiveDefinite, "goal posterior covariance is degenerate");
        g = -block_diagonal_sum(d * llt.solve(d.transpose()));
      }
      break;
    }
  }

  // W restricted to the active block is B^{-1} with B = (Lambda o R)_AA, so
  // <dW, G> = -<dB, W G W>.
  const Matrix h = w * g * w;
  const Vector& z = design.weights();
  const Matrix& r = noise_cov_.matrix();
  Vector grad = Vector::Zero(n_sensors_);
  for (Eigen::Index j = 0; j < n_sensors_; ++j) {
    if (z(j) == 0.0) continue;  // one-sided limit vanishes
    double inner = -2.0 * r(j, j) * h(j, j) / (z(j) * z(j) * z(j));
    for (Eigen::Index i = 0; i < n_sensors_; ++i)
      if (i != j && z(i) != 0.0) inner += 2.0 * z(i) * r(j, i) * h(j, i);
    grad(j) = -inner;
  }
  return grad;
}

double LinearOEDProblem::utility(const Criterion& c, const Penalty& p, const DesignVector& design,
                                 WeightingMode mode) const {
  double u = criterion_value(c, design, mode).utility();
  if (p.alpha != 0.0) u -= p.alpha * penalty_value(p, design);
  return u;
}

Vector LinearOEDProblem::utility_gradient(const Criterion& c, const Penalty& p,
                                          const DesignVector& design) const {
  Vector g = criterion_gradient(c, design);
  if (c.orientation() == Orientation::Minimize) g = -g;
  if (p.alpha != 0.0) g -= p.alpha * penalty_gradient(p, design);
  return g;
}

SymMatrix fisher_information(const InverseProblem& ip, const DesignVector& design, WeightingMode mode) {
  return LinearOEDProblem(ip).fisher_information(design, mode);
}

CriterionValue criterion_value(const Criterion& c, const InverseProblem& ip, const DesignVector& design,
                               WeightingMode mode) {
  return LinearOEDProblem(ip).criterion_value(c, design, mode);
}

Vector criterion_gradient(const Criterion& c, const InverseProblem& ip, const DesignVector& design) {
  return LinearOEDProblem(ip).criterion_gradient(c, design);
}

// ---------------------------------------------------------------------------
// Design utilities

namespace {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once, so results written per index do not depend on the
/// worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  const unsigned w = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  for (unsigned t = 0; t < w; ++t)
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Memoizing batch evaluator for a deterministic black-box utility.
class UtilityCache {
 public:
  UtilityCache(const Utility& utility, unsigned workers) : utility_(utility), workers_(workers) {}

  std::vector<double> evaluate(const std::vector<DesignVector>& designs) {
    std::vector<double> out(designs.size());
    std::vector<std::size_t> pending;
    std::vector<std::uint64_t> keys(designs.size());
    std::unordered_map<std::uint64_t, std::size_t> first_pending;
    for (std::size_t i = 0; i < designs.size(); ++i) {
      keys[i] = designs[i].to_index();
      if (cache_.count(keys[i]) == 0 && first_pending.count(keys[i]) == 0) {
        first_pending.emplace(keys[i], pending.size());
        pending.push_back(i);
      }
    }
    std::vector<double> fresh(pending.size());
    parallel_for(pending.size(), workers_, [&](std::size_t p) { fresh[p] = utility_(designs[pending[p]]); });
    for (std::size_t p = 0; p < pending.size(); ++p) cache_.emplace(keys[pending[p]], fresh[p]);
    for (std::size_t i = 0; i < designs.size(); ++i) out[i] = cache_.at(keys[i]);
    return out;
  }

 private:
  const Utility& utility_;
  unsigned workers_;
  std::unordered_map<std::uint64_t, double> cache_;
};

std::vector<DesignVector> draw(const BernoulliPolicy& policy, int count, Rng& rng) {
  std::vector<DesignVector> designs;
  designs.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) designs.push_back(sample(policy, rng));
  return designs;
}

double optimal_baseline_impl(const Vector& theta, UtilityCache& cache, int ensemble_size,
                             int baseline_batches, Rng& rng, double shift = 0.0) {
  const BernoulliPolicy policy(theta);
  double b = 0.0;
  for (int e = 0; e < baseline_batches; ++e) {
    const auto designs = draw(policy, ensemble_size, rng);
    const auto values = cache.evaluate(designs);
    Vector d = Vector::Zero(theta.size());
    Vector g = Vector::Zero(theta.size());
    for (std::size_t j = 0; j < designs.size(); ++j) {
      const Vector r = log_pmf_gradient(policy, designs[j]);
      d += r;
      g += (values[j] - shift) * r;
    }
    d /= ensemble_size;
    g /= ensemble_size;
    b += g.dot(d);
  }
  double inv_var_sum = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) inv_var_sum += 1.0 / (theta(i) - theta(i) * theta(i));
  return b * ensemble_size / (baseline_batches * inv_var_sum);
}

Vector gradient_estimate_impl(const Vector& theta, const std::vector<DesignVector>& designs,
                              const std::vector<double>& values, double baseline) {
  const BernoulliPolicy policy(theta);
  Vector g = Vector::Zero(theta.size());
  for (std::size_t j = 0; j < designs.size(); ++j)
    g += (values[j] - baseline) * log_pmf_gradient(policy, designs[j]);
  return g / static_cast<double>(designs.size());
}

void check_sampling_sizes(int ensemble_size, int baseline_batches) {
  require(ensemble_size >= 1, ErrorCode::InvalidArgument, "ensemble size must be at least 1");
  require(baseline_batches >= 1, ErrorCode::InvalidArgument, "baseline batch count must be at least 1");
}

}  // namespace

OEDResult brute_force(const Utility& utility, Eigen::Index n_sensors, unsigned workers) {
  require(n_sensors >= 1, ErrorCode::InvalidArgument, "brute force needs at least one sensor");
  if (n_sensors > 22) {
    std::ostringstream os;
    os << "brute force over 2^" << n_sensors << " designs refused (limit is 22 sensors)";
    throw Error(ErrorCode::TooManyDesigns, os.str());
  }
  const std::uint64_t count = std::uint64_t{1} << n_sensors;
  OEDResult result;
  result.solver = SolverKind::BruteForce;
  result.brute_force_table.resize(count);
  parallel_for(count, workers, [&](std::size_t i) {
    result.brute_force_table[i] = {i, utility(DesignVector::from_index(i, n_sensors))};
  });
  std::uint64_t best = 0;
  for (std::uint64_t i = 1; i < count; ++i)
    if (result.brute_force_table[i].second > result.brute_force_table[best].second) best = i;
  result.optimal_design = DesignVector::from_index(best, n_sensors);
  result.optimal_value = result.brute_force_table[best].second;
  result.final_parameter = result.optimal_design.weights();
  result.iterations = static_cast<int>(count);
  result.converged = true;
  return result;
}

DesignVector round_design(const DesignVector& design, RoundingRule rule, std::optional<int> k) {
  const Eigen::Index n = design.size();
  Vector out = Vector::Zero(n);
  if (rule == RoundingRule::ThresholdHalf) {
    for (Eigen::Index i = 0; i < n; ++i) out(i) = design[i] >= 0.5 ? 1.0 : 0.0;
    return DesignVector(std::move(out));
  }
  require(k.has_value(), ErrorCode::InvalidArgument, "top-k rounding needs k");
  require(*k >= 0 && *k <= n, ErrorCode::InvalidArgument, "top-k rounding needs 0 <= k <= n");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return design[a] > design[b]; });
  for (int i = 0; i < *k; ++i) out(order[static_cast<std::size_t>(i)]) = 1.0;
  return DesignVector(std::move(out));
}

OEDResult solve_relaxed(const Criterion& c, const Penalty& p, const LinearOEDProblem& problem,
                        const RelaxedOptions& opts) {
  const Eigen::Index n = problem.sensor_count();
  p.validate(n);
  if (!p.differentiable())
    throw Error(ErrorCode::NonDifferentiablePenalty,
                "the relaxed solver needs a differentiable penalty; use smoothed-l0 or the "
                "stochastic solver for l0");
  require(opts.step.eta0 >= 0.0 && opts.step.tau > 0.0, ErrorCode::InvalidArgument,
          "step schedule needs eta0 >= 0 and tau > 0");
  require(opts.max_iter >= 0 && opts.tol > 0.0, ErrorCode::InvalidArgument, "invalid solver options");

  Vector z = opts.init.value_or(Vector::Constant(n, 0.5));
  require(z.size() == n, ErrorCode::DimensionMismatch, "initial design length mismatch");

  OEDResult result;
  result.solver = SolverKind::Relaxed;
  Vector best = z;
  double best_u = -std::numeric_limits<double>::infinity();
  int iter = 0;
  for (;; ++iter) {
    const DesignVector design(z);
    const double u = problem.utility(c, p, design);
    result.trajectory.push_back({iter, z, u});
    if (u > best_u) {
      best_u = u;
      best = z;
    }
    const Vector g = problem.utility_gradient(c, p, design);
    const Vector projected = (z + g).cwiseMax(0.0).cwiseMin(1.0) - z;
    if (projected.lpNorm<Eigen::Infinity>() <= opts.tol) {
      result.converged = true;
      break;
    }
    if (iter == opts.max_iter) break;
    z = (z + opts.step.at(iter) * g).cwiseMax(0.0).cwiseMin(1.0);
  }

  result.iterations = iter;
  result.optimal_design = DesignVector(best);
  result.optimal_value = best_u;
  result.final_parameter = z;
  std::optional<int> k = opts.round_k;
  if (!k && opts.rounding == RoundingRule::TopK && p.budget) k = p.budget;
  result.rounded_design = round_design(result.optimal_design, opts.rounding, k);
  result.rounded_value = problem.utility(c, p, *result.rounded_design);

  if (!result.converged) {
    std::ostringstream os;
    os << "relaxed solver did not reach a stationary point in " << opts.max_iter << " iterations";
    throw NonConvergence<OEDResult>(os.str(), std::move(result));
  }
  return result;
}

double optimal_baseline(const Vector& theta, const Utility& utility, int ensemble_size,
                        int baseline_batches, Rng& rng) {
  check_sampling_sizes(ensemble_size, baseline_batches);
  UtilityCache cache(utility, 1);
  return optimal_baseline_impl(theta, cache, ensemble_size, baseline_batches, rng);
}

Vector stochastic_gradient_estimate(const Vector& theta, const Utility& utility, int ensemble_size,
                                    double baseline, Rng& rng) {
  check_sampling_sizes(ensemble_size, 1);
  const BernoulliPolicy policy(theta);
  const auto designs = draw(policy, ensemble_size, rng);
  std::vector<double> values(designs.size());
  for (std::size_t j = 0; j < designs.size(); ++j) values[j] = utility(designs[j]);
  return gradient_estimate_impl(theta, designs, values, baseline);
}

OEDResult solve_stochastic(const Utility& utility, Eigen::Index n_sensors, Rng& rng,
                           const StochasticOptions& opts) {
  require(n_sensors >= 1 && n_sensors <= 63, ErrorCode::InvalidArgument,
          "stochastic solver supports 1..63 sensors");
  if (!(opts.bound > 0.0 && opts.bound < 0.5))
    throw Error(ErrorCode::InvalidBounds, "theta bound must lie in (0, 0.5)");
  check_sampling_sizes(opts.ensemble_size, opts.baseline_batches);
  require(opts.final_samples >= 1, ErrorCode::InvalidArgument, "final sample count must be at least 1");
  require(opts.max_iter >= 0 && opts.tol >= 0.0, ErrorCode::InvalidArgument, "invalid solver options");
  require(opts.step.eta0 >= 0.0 && opts.step.tau > 0.0, ErrorCode::InvalidArgument,
          "step schedule needs eta0 >= 0 and tau > 0");

  Vector theta = opts.theta0.value_or(Vector::Constant(n_sensors, 0.5));
  require(theta.size() == n_sensors, ErrorCode::DimensionMismatch, "theta0 length mismatch");
  for (Eigen::Index i = 0; i < n_sensors; ++i)
    require(theta(i) > 0.0 && theta(i) < 1.0, ErrorCode::InvalidArgument,
            "theta0 must be strictly inside (0, 1)");
  const double lo = opts.bound, hi = 1.0 - opts.bound;
  theta = theta.cwiseMax(lo).cwiseMin(hi);

  UtilityCache cache(utility, opts.workers);
  OEDResult result;
  result.solver = SolverKind::Stochastic;
  const double shift = opts.center_utility ? cache.evaluate({DesignVector::zeros(n_sensors)}).front() : 0.0;

  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    const BernoulliPolicy policy(theta);
    const auto designs = draw(policy, opts.ensemble_size, rng);
    const double b = optimal_baseline_impl(theta, cache, opts.ensemble_size, opts.baseline_batches, rng, shift);
    const auto values = cache.evaluate(designs);
    const Vector g = gradient_estimate_impl(theta, designs, values, b + shift);

    const double mean_u = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    result.trajectory.push_back({iter, theta, mean_u});
    for (std::size_t j = 0; j < designs.size(); ++j)
      if (!result.best_seen_value || values[j] > *result.best_seen_value) {
        result.best_seen_value = values[j];
        result.best_seen_design = designs[j];
      }

    const Vector next = (theta + opts.step.at(iter) * g).cwiseMax(lo).cwiseMin(hi);
    const double moved = (next - theta).lpNorm<Eigen::Infinity>();
    theta = next;
    if (moved <= opts.tol) {
      result.converged = true;
      ++iter;
      break;
    }
  }
  result.iterations = iter;
  result.final_parameter = theta;

  const BernoulliPolicy final_policy(theta);
  const auto finals = draw(final_policy, opts.final_samples, rng);
  const auto final_values = cache.evaluate(finals);
  std::size_t best = 0;
  for (std::size_t j = 0; j < finals.size(); ++j) {
    result.sampled_designs.emplace_back(finals[j], final_values[j]);
    if (final_values[j] > final_values[best]) best = j;
  }
  result.optimal_design = finals[best];
  result.optimal_value = final_values[best];
  return result;
}

}  // namespace oedkit
