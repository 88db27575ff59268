#include <doctest.h>

#include <Eigen/SVD>
#include <algorithm>

#include "support.hpp"

using namespace oedkit;
using namespace oedkit::testing;

namespace {

Matrix svd_pinv(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-12 * std::max(1.0, s(0))) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Posterior covariance through the dense closed form with the design set
/// on the inverse problem's noise model.
Matrix oracle_posterior(InverseProblem ip, const DesignVector& d, WeightingMode mode) {
  ip.register_noise(WeightedNoiseModel(ip.noise().base(), d, mode));
  return closed_form_posterior(ip).covariance->matrix();
}

ToyTwin dense_toy(std::uint64_t seed, Eigen::Index nx = 5) {
  ToySpec spec;
  spec.nx = nx;
  spec.dense_noise = true;
  spec.dense_prior = true;
  return make_toy(spec, seed);
}

}  // namespace

TEST_CASE("design vectors") {
  CHECK_THROWS_AS(DesignVector(Vector{{0.5, 1.2}}), Error);
  CHECK_THROWS_AS(DesignVector(Vector{{-0.1}}), Error);
  const DesignVector d = DesignVector::from_index(0b1011, 5);
  CHECK(d.weights() == Vector{{1, 1, 0, 1, 0}});
  CHECK(d.to_index() == 0b1011);
  CHECK(d.active_count() == 3);
  CHECK(d.is_binary());
  CHECK_FALSE(DesignVector(Vector{{0.5, 1.0}}).is_binary());
  CHECK_THROWS_AS(DesignVector(Vector{{0.5, 1.0}}).to_index(), Error);
}

TEST_CASE("binary weighted precision: trivial designs and SVD oracle") {
  Rng rng(1);
  const SymMatrix r = random_spd(6, rng);
  CHECK((weighted_precision_binary(r, DesignVector::ones(6)).matrix() - inverse_spd(r).matrix()).norm() < 1e-12);
  CHECK(weighted_precision_binary(r, DesignVector::zeros(6)).matrix().norm() == 0.0);
  for (int trial = 0; trial < 30; ++trial) {
    const DesignVector d = random_binary(6, rng);
    const Matrix dm = d.weights().asDiagonal();
    CHECK((weighted_precision_binary(r, d).matrix() - svd_pinv(dm * r.matrix() * dm)).norm() < 1e-9);
  }
  try {
    weighted_precision_binary(r, DesignVector(Vector::Constant(6, 0.5)));
    FAIL("expected NonBinaryDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonBinaryDesign);
  }
}

TEST_CASE("relaxed weighted precision agrees with the binary path and is continuous") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 10;
    const SymMatrix r = random_spd(n, rng);
    const DesignVector d = random_binary(n, rng);
    const Matrix wb = weighted_precision_binary(r, d).matrix();
    CHECK((weighted_precision_relaxed(r, d).matrix() - wb).norm() <= 1e-10);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 2; k <= 6; ++k) {
      const double delta = std::pow(10.0, -k);
      // Active weights move down, inactive ones up.
      Vector w = d.weights();
      for (Eigen::Index i = 0; i < n; ++i) w(i) = w(i) == 1.0 ? 1.0 - delta : delta;
      const double dist = (weighted_precision_relaxed(r, DesignVector(w)).matrix() - wb).norm();
      CHECK(dist < prev);
      prev = dist;
    }
  }
  const SymMatrix r = random_spd(4, rng);
  CHECK((weighted_precision_relaxed(r, DesignVector::ones(4)).matrix() - inverse_spd(r).matrix()).norm() < 1e-12);
}

TEST_CASE("Fisher information: zero design, all-ones oracle, monotonicity") {
  auto toy = dense_toy(3);
  const LinearOEDProblem problem(toy.ip);
  const Matrix prior_prec = toy.ip.prior().precision().matrix();
  CHECK((problem.fisher_information(DesignVector::zeros(5)).matrix() - prior_prec).norm() < 1e-10);
  const Matrix sigma = oracle_posterior(toy.ip, DesignVector::ones(5), WeightingMode::HadamardRelaxed);
  CHECK((problem.fisher_information(DesignVector::ones(5)).matrix() * sigma - Matrix::Identity(5, 5)).norm() < 1e-9);
  CHECK((fisher_information(toy.ip, DesignVector::ones(5)).matrix() -
         problem.fisher_information(DesignVector::ones(5)).matrix())
            .norm() < 1e-12);

  for (std::uint64_t k = 0; k < 32; ++k) {
    const DesignVector d = DesignVector::from_index(k, 5);
    const Matrix f = problem.fisher_information(d, WeightingMode::BinaryPseudoInverse).matrix();
    for (Eigen::Index i = 0; i < 5; ++i) {
      if (d[i] == 1.0) continue;
      const DesignVector up = DesignVector::from_index(k | (1ULL << i), 5);
      const Matrix g = problem.fisher_information(up, WeightingMode::BinaryPseudoInverse).matrix();
      CHECK(symmetric_eigenvalues(g - f).minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("criterion values match dense posterior oracles") {
  auto toy = dense_toy(4);
  const LinearOEDProblem problem(toy.ip);
  const Matrix gamma = toy.ip.prior().covariance().matrix();
  CHECK(problem.criterion_value({CriterionKind::AFim, {}}, DesignVector::zeros(5)).value ==
        doctest::Approx(trace(toy.ip.prior().precision())).epsilon(1e-12));
  CHECK(problem.criterion_value({CriterionKind::DFim, {}}, DesignVector::zeros(5)).value ==
        doctest::Approx(-logdet_spd(toy.ip.prior().covariance())).epsilon(1e-12));

  Rng rng(5);
  Matrix p(2, 5);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  for (int trial = 0; trial < 10; ++trial) {
    const bool binary = trial % 2 == 0;
    const DesignVector d = binary ? random_binary(5, rng) : random_interior(5, rng);
    const WeightingMode mode = binary ? WeightingMode::BinaryPseudoInverse : WeightingMode::HadamardRelaxed;
    const Matrix sigma = oracle_posterior(toy.ip, d, mode);
    const SymMatrix fim = inverse_spd(SymMatrix(sigma));
    CHECK(problem.criterion_value({CriterionKind::AFim, {}}, d, mode).value == doctest::Approx(trace(fim)).epsilon(1e-9));
    CHECK(problem.criterion_value({CriterionKind::DFim, {}}, d, mode).value ==
          doctest::Approx(logdet_spd(fim)).epsilon(1e-9));
    CHECK(problem.criterion_value({CriterionKind::APosteriorGoal, {}}, d, mode).value ==
          doctest::Approx(sigma.trace()).epsilon(1e-9));
    CHECK(problem.criterion_value({CriterionKind::DPosteriorGoal, {}}, d, mode).value ==
          doctest::Approx(logdet_spd(SymMatrix(sigma))).epsilon(1e-9));
    const Matrix goal = p * sigma * p.transpose();
    CHECK(problem.criterion_value({CriterionKind::APosteriorGoal, p}, d, mode).value ==
          doctest::Approx(goal.trace()).epsilon(1e-9));
    CHECK(problem.criterion_value({CriterionKind::DPosteriorGoal, p}, d, mode).value ==
          doctest::Approx(logdet_spd(SymMatrix(goal))).epsilon(1e-9));
  }
  CHECK(problem.criterion_value({CriterionKind::APosteriorGoal, {}}, DesignVector::zeros(5)).value ==
        doctest::Approx(gamma.trace()));
  const CriterionValue v = problem.criterion_value({CriterionKind::APosteriorGoal, {}}, DesignVector::ones(5));
  CHECK(v.orientation == Orientation::Minimize);
  CHECK(v.utility() == -v.value);

  // A goal operator with dependent rows has a singular goal covariance.
  Matrix degenerate(2, 5);
  degenerate.row(0) = p.row(0);
  degenerate.row(1) = 2.0 * p.row(0);
  try {
    problem.criterion_value({CriterionKind::DPosteriorGoal, degenerate}, DesignVector::ones(5));
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositiveDefinite);
  }
}

TEST_CASE("multi-time criteria use every registered observation time") {
  auto toy = dense_toy(6);
  const LinearOEDProblem all(toy.ip);
  CHECK(all.observation_indices() == std::vector<std::size_t>{1, 2, 3});
  const LinearOEDProblem one(toy.ip, {2});
  CHECK(one.forward_blocks().size() == 1);
  CHECK(all.criterion_value({CriterionKind::AFim, {}}, DesignVector::ones(5)).value >
        one.criterion_value({CriterionKind::AFim, {}}, DesignVector::ones(5)).value);
  CHECK_FALSE(all.is_stale(toy.ip));
  toy.ip.register_prior(toy.ip.prior());
  CHECK(all.is_stale(toy.ip));
}

TEST_CASE("criterion gradients match central differences at interior designs") {
  Rng rng(7);
  Matrix p(2, 5);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.normal();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto toy = dense_toy(seed);
    const LinearOEDProblem problem(toy.ip);
    for (const Criterion& c : {Criterion{CriterionKind::AFim, {}}, Criterion{CriterionKind::DFim, {}},
                               Criterion{CriterionKind::APosteriorGoal, {}}, Criterion{CriterionKind::APosteriorGoal, p},
                               Criterion{CriterionKind::DPosteriorGoal, {}}, Criterion{CriterionKind::DPosteriorGoal, p}}) {
      for (int trial = 0; trial < 3; ++trial) {
        const DesignVector d = random_interior(5, rng);
        auto f = [&](const Vector& w) { return problem.criterion_value(c, DesignVector(w)).value; };
        CHECK(rel_err(problem.criterion_gradient(c, d), finite_difference_gradient(f, d.weights(), 1e-6)) < 1e-5);
      }
    }
  }
}

TEST_CASE("criterion gradient edge cases") {
  auto toy = dense_toy(8);
  // Forward operator identically zero: the FIM trace does not depend on the design.
  InverseProblem zero = toy.ip;
  zero.register_model(std::make_shared<LinearTimeDependentModel>(Matrix::Zero(5, 5), 0.1));
  const LinearOEDProblem flat(zero, {1, 2});
  Rng rng(1);
  CHECK(flat.criterion_gradient({CriterionKind::AFim, {}}, random_interior(5, rng)).norm() == 0.0);

  // Exchangeable sensors: R = I and identical observation rows.
  const Eigen::Index n = 4;
  std::vector<PointObservationOperator::Stencil> same(3, PointObservationOperator::Stencil{{{1, 1.0}}});
  InverseProblem sym(std::make_shared<LinearTimeDependentModel>(toy_linear_create(n, 0.1, 3)),
                     std::make_shared<PointObservationOperator>(same, n),
                     GaussianMeasure(Vector::Zero(n), SymMatrix::identity(n)),
                     WeightedNoiseModel(GaussianMeasure(Vector::Zero(3), SymMatrix::identity(3))), TimeGrid(0.0, 0.1, 4));
  const LinearOEDProblem sp(sym, {1, 3});
  const DesignVector eq(Vector::Constant(3, 0.6));
  for (auto kind : {CriterionKind::AFim, CriterionKind::DFim, CriterionKind::APosteriorGoal}) {
    const Vector g = sp.criterion_gradient({kind, {}}, eq);
    CHECK(std::abs(g(0) - g(1)) <= 1e-10 * (1 + g.norm()));
    CHECK(std::abs(g(0) - g(2)) <= 1e-10 * (1 + g.norm()));
  }

  // Zero weights take the one-sided limit.
  const LinearOEDProblem problem(toy.ip);
  Vector w = Vector::Constant(5, 0.5);
  w(2) = 0.0;
  const Vector g = problem.criterion_gradient({CriterionKind::DFim, {}}, DesignVector(w));
  CHECK(g(2) == 0.0);
  CHECK(g.allFinite());
}

TEST_CASE("penalties and their gradients") {
  const DesignVector b(Vector{{1, 0, 1, 0}});
  CHECK(penalty_value({PenaltyKind::L0, 1.0, {}}, b) == 2.0);
  CHECK(penalty_value({PenaltyKind::L0, 1.0, 3}, b) == 1.0);
  CHECK(penalty_value({PenaltyKind::L1, 1.0, {}}, DesignVector(Vector{{0.25, 0.5}})) == 0.75);
  CHECK(penalty_value({PenaltyKind::BudgetEquality, 1.0, 1}, DesignVector(Vector{{0.25, 0.5}})) == doctest::Approx(0.0625));
  try {
    penalty_gradient({PenaltyKind::L0, 1.0, {}}, b);
    FAIL("expected NotDifferentiable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotDifferentiable);
  }
  Rng rng(3);
  const DesignVector any = random_interior(6, rng);
  CHECK(penalty_gradient({PenaltyKind::L1, 1.0, {}}, any) == Vector::Ones(6));

  // smoothed-l0 approaches l0 on binary designs as epsilon shrinks.
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
    Penalty p{PenaltyKind::SmoothedL0, 1.0, {}, eps};
    const double gap = std::abs(penalty_value(p, b) - 2.0);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-7);

  for (const Penalty& p : {Penalty{PenaltyKind::L1, 1.0, {}}, Penalty{PenaltyKind::SmoothedL0, 1.0, {}, 0.05},
                           Penalty{PenaltyKind::BudgetEquality, 1.0, 3}}) {
    for (int trial = 0; trial < 10; ++trial) {
      const DesignVector d = random_interior(6, rng);
      auto f = [&](const Vector& w) { return penalty_value(p, DesignVector(w)); };
      const Vector fd = finite_difference_gradient(f, d.weights(), 1e-6);
      CHECK((penalty_gradient(p, d) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
  }
  CHECK_THROWS_AS(penalty_value({PenaltyKind::L1, -1.0, {}}, b), Error);
  CHECK_THROWS_AS(penalty_value({PenaltyKind::L0, 1.0, 7}, b), Error);
  CHECK_THROWS_AS(penalty_value({PenaltyKind::BudgetEquality, 1.0, {}}, b), Error);
  CHECK_THROWS_AS(penalty_value({PenaltyKind::SmoothedL0, 1.0, {}, 0.0}, b), Error);
}

TEST_CASE("utility gradient combines orientation and penalty") {
  auto toy = dense_toy(9);
  const LinearOEDProblem problem(toy.ip);
  Rng rng(4);
  const Criterion c{CriterionKind::APosteriorGoal, {}};
  const Penalty p{PenaltyKind::SmoothedL0, 0.3, {}, 0.05};
  for (int trial = 0; trial < 5; ++trial) {
    const DesignVector d = random_interior(5, rng);
    auto f = [&](const Vector& w) { return problem.utility(c, p, DesignVector(w)); };
    CHECK(rel_err(problem.utility_gradient(c, p, d), finite_difference_gradient(f, d.weights(), 1e-6)) < 1e-5);
  }
}

TEST_CASE("brute force enumeration") {
  const Utility one = [](const DesignVector& d) { return d[0] == 1.0 ? 2.0 : 5.0; };
  const OEDResult r1 = brute_force(one, 1);
  CHECK(r1.brute_force_table.size() == 2);
  CHECK(r1.optimal_design[0] == 0.0);
  CHECK(r1.optimal_value == 5.0);

  const Utility flat = [](const DesignVector&) { return 1.0; };
  CHECK(brute_force(flat, 3).optimal_design.to_index() == 0);  // ties go to the lowest index

  auto toy = dense_toy(10);
  const LinearOEDProblem problem(toy.ip);
  const Utility afim = [&](const DesignVector& d) {
    return problem.utility({CriterionKind::AFim, {}}, {}, d, WeightingMode::BinaryPseudoInverse);
  };
  const OEDResult all = brute_force(afim, 5);
  CHECK(all.brute_force_table.size() == 32);
  CHECK(all.optimal_design.to_index() == 31);
  for (std::size_t i = 0; i < all.brute_force_table.size(); ++i) CHECK(all.brute_force_table[i].first == i);
  CHECK(all.optimal_value == afim(all.optimal_design));

  const Utility ten = [](const DesignVector& d) { return -std::abs(static_cast<double>(d.to_index()) - 700.0); };
  const OEDResult t1 = brute_force(ten, 10, 1), t3 = brute_force(ten, 10, 3);
  CHECK(t1.brute_force_table.size() == 1024);
  CHECK(t1.optimal_design.to_index() == 700);
  CHECK(t1.brute_force_table == t3.brute_force_table);
  try {
    brute_force(flat, 23);
    FAIL("expected TooManyDesigns");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyDesigns);
  }
}

TEST_CASE("rounding rules") {
  const DesignVector b(Vector{{1, 0, 1}});
  CHECK(round_design(b, RoundingRule::ThresholdHalf).weights() == b.weights());
  CHECK(round_design(b, RoundingRule::TopK, 2).weights() == b.weights());
  CHECK(round_design(DesignVector(Vector{{0.9, 0.2, 0.6}}), RoundingRule::TopK, 2).weights() == Vector{{1, 0, 1}});
  CHECK(round_design(DesignVector(Vector{{0.5, 0.5}}), RoundingRule::TopK, 1).weights() == Vector{{1, 0}});
  CHECK(round_design(DesignVector(Vector{{0.5, 0.49}}), RoundingRule::ThresholdHalf).weights() == Vector{{1, 0}});
  CHECK_THROWS_AS(round_design(b, RoundingRule::TopK), Error);
}

TEST_CASE("relaxed solver") {
  SUBCASE("single beneficial sensor converges to one") {
    InverseProblem ip(std::make_shared<LinearTimeDependentModel>(Matrix::Identity(1, 1), 0.1),
                      std::make_shared<PointObservationOperator>(PointObservationOperator::identity(1)),
                      GaussianMeasure(Vector::Zero(1), SymMatrix::identity(1)),
                      WeightedNoiseModel(GaussianMeasure(Vector::Zero(1), SymMatrix::identity(1))), TimeGrid(0.0, 0.1, 2));
    const LinearOEDProblem problem(ip, {1});
    const OEDResult r = solve_relaxed({CriterionKind::DFim, {}}, {}, problem);
    CHECK(r.converged);
    CHECK(r.optimal_design[0] == 1.0);
    CHECK(r.optimal_value == doctest::Approx(problem.utility({CriterionKind::DFim, {}}, {}, r.optimal_design)).epsilon(1e-12));
  }
  SUBCASE("rounded design is optimal among binary designs on the toy problem") {
    auto toy = make_toy({}, 11);
    const LinearOEDProblem problem(toy.ip);
    const Criterion c{CriterionKind::DFim, {}};
    const Penalty p{PenaltyKind::L1, 0.5, {}};
    RelaxedOptions opts;
    opts.max_iter = 5000;
    const OEDResult r = solve_relaxed(c, p, problem, opts);
    CHECK(r.converged);
    const Utility u = [&](const DesignVector& d) { return problem.utility(c, p, d, WeightingMode::BinaryPseudoInverse); };
    const OEDResult bf = brute_force(u, 5);
    REQUIRE(r.rounded_value.has_value());
    CHECK(*r.rounded_value >= bf.optimal_value - 1e-6);
    CHECK(std::abs(r.optimal_value - problem.utility(c, p, r.optimal_design)) <= 1e-12);
    // Utility never decreases along the trajectory's best.
    CHECK(r.optimal_value >= r.trajectory.front().utility);
  }
  SUBCASE("zero step size cannot move and fails to converge") {
    auto toy = make_toy({}, 12);
    const LinearOEDProblem problem(toy.ip);
    RelaxedOptions opts;
    opts.step.eta0 = 0.0;
    opts.max_iter = 10;
    try {
      solve_relaxed({CriterionKind::AFim, {}}, {}, problem, opts);
      FAIL("expected NonConvergence");
    } catch (const NonConvergence<OEDResult>& e) {
      CHECK(e.best().final_parameter == Vector::Constant(5, 0.5));
      for (const auto& tp : e.best().trajectory) CHECK(tp.parameter == Vector::Constant(5, 0.5));
    }
  }
  SUBCASE("l0 penalty is rejected") {
    auto toy = make_toy({}, 13);
    const LinearOEDProblem problem(toy.ip);
    try {
      solve_relaxed({CriterionKind::AFim, {}}, {PenaltyKind::L0, 1.0, 2}, problem);
      FAIL("expected NonDifferentiablePenalty");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonDifferentiablePenalty);
    }
  }
}

TEST_CASE("stochastic solver on a separable utility recovers the sign pattern") {
  const Vector c{{1.0, -2.0, 0.5, -0.7, 1.5, -0.3}};
  const Utility u = [&](const DesignVector& d) { return c.dot(d.weights()); };
  Rng rng(21);
  StochasticOptions opts;
  opts.max_iter = 200;
  const OEDResult r = solve_stochastic(u, 6, rng, opts);
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(r.optimal_design[i] == (c(i) > 0 ? 1.0 : 0.0));
    if (c(i) > 0) CHECK(r.final_parameter(i) == doctest::Approx(1.0 - opts.bound));
    else CHECK(r.final_parameter(i) == doctest::Approx(opts.bound));
  }
  CHECK(r.iterations <= 200);
  for (const auto& tp : r.trajectory) {
    CHECK(tp.parameter.minCoeff() >= opts.bound);
    CHECK(tp.parameter.maxCoeff() <= 1.0 - opts.bound);
  }
  REQUIRE(r.best_seen_value.has_value());
  CHECK(*r.best_seen_value >= r.optimal_value);
  CHECK(r.optimal_value == u(r.optimal_design));
}

TEST_CASE("stochastic solver options are validated and runs are reproducible") {
  const Utility u = [](const DesignVector& d) { return d.weights().sum(); };
  Rng rng(1);
  StochasticOptions bad;
  bad.bound = 0.5;
  try {
    solve_stochastic(u, 3, rng, bad);
    FAIL("expected InvalidBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidBounds);
  }
  bad.bound = 0.0;
  CHECK_THROWS_AS(solve_stochastic(u, 3, rng, bad), Error);
  StochasticOptions zero_ens;
  zero_ens.ensemble_size = 0;
  CHECK_THROWS_AS(solve_stochastic(u, 3, rng, zero_ens), Error);

  StochasticOptions o1, o4;
  o1.max_iter = o4.max_iter = 30;
  o4.workers = 4;
  Rng a(5), b(5);
  const OEDResult r1 = solve_stochastic(u, 4, a, o1), r4 = solve_stochastic(u, 4, b, o4);
  CHECK(r1.final_parameter == r4.final_parameter);
  CHECK(r1.optimal_design.weights() == r4.optimal_design.weights());
  REQUIRE(r1.trajectory.size() == r4.trajectory.size());
  for (std::size_t i = 0; i < r1.trajectory.size(); ++i) CHECK(r1.trajectory[i].utility == r4.trajectory[i].utility);
}

TEST_CASE("optimal baseline") {
  SUBCASE("single-sample baseline is reproducible") {
    const Utility u = [](const DesignVector& d) { return 3.0 + d[0]; };
    Rng a(17), b(17);
    CHECK(optimal_baseline(Vector{{0.4}}, u, 1, 1, a) == optimal_baseline(Vector{{0.4}}, u, 1, 1, b));
  }
  SUBCASE("U(d) = d at theta near one half matches the two-term enumeration") {
    // E[U |r|^2] / E[|r|^2] with r = 1/theta or -1/(1-theta).
    const double t = 0.45;
    const double exact = (t * 1.0 / (t * t)) / (t / (t * t) + (1 - t) / ((1 - t) * (1 - t)));
    const Utility u = [](const DesignVector& d) { return d[0]; };
    double sum = 0.0, sum_sq = 0.0;
    const int n = 4000;
    for (int s = 0; s < n; ++s) {
      Rng rng(5000 + s);
      const double b = optimal_baseline(Vector{{t}}, u, 8, 2, rng);
      sum += b;
      sum_sq += b * b;
    }
    const double mean = sum / n, se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
    CHECK(std::abs(mean - exact) <= 3.0 * se);
  }
}

TEST_CASE("gradient estimate is unbiased on two sensors") {
  const Vector theta{{0.3, 0.6}};
  const Utility u = [](const DesignVector& d) { return 1.0 + 2.0 * d[0] - d[1] + 3.0 * d[0] * d[1]; };
  const BernoulliPolicy pol(theta);
  Vector exact = Vector::Zero(2);
  for (std::uint64_t k = 0; k < 4; ++k) {
    const DesignVector d = DesignVector::from_index(k, 2);
    exact += std::exp(log_pmf(pol, d)) * u(d) * log_pmf_gradient(pol, d);
  }
  Rng rng(3);
  const Vector g = stochastic_gradient_estimate(theta, u, 10000, 0.0, rng);
  // Per-sample standard error from a second independent batch.
  Vector sum = Vector::Zero(2), sum_sq = Vector::Zero(2);
  const int n = 10000;
  for (int j = 0; j < n; ++j) {
    const Vector gj = stochastic_gradient_estimate(theta, u, 1, 0.0, rng);
    sum += gj;
    sum_sq += gj.cwiseProduct(gj);
  }
  const Vector var = (sum_sq / n - (sum / n).cwiseProduct(sum / n)) * n / (n - 1);
  for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::abs(g(i) - exact(i)) <= 3.0 * std::sqrt(var(i) / n));
}

TEST_CASE("property: solvers never beat brute force and the policy stays inside its box") {
  Rng rng(777);
  for (int trial = 0; trial < 12; ++trial) {
    const RandomProblem rp = random_problem(rng, false);
    const LinearOEDProblem problem(rp.ip);
    const Eigen::Index n = problem.sensor_count();
    const Criterion c{trial % 2 == 0 ? CriterionKind::AFim : CriterionKind::DPosteriorGoal, {}};
    const Penalty p{PenaltyKind::L1, 0.05, {}};
    const Utility u = [&](const DesignVector& d) { return problem.utility(c, p, d, WeightingMode::BinaryPseudoInverse); };
    const OEDResult bf = brute_force(u, n);
    const double slack = 1e-9 * (1.0 + std::abs(bf.optimal_value));

    StochasticOptions so;
    so.step.eta0 = 0.01;
    so.max_iter = 40;
    so.bound = 0.02;
    Rng solver_rng = rng.substream(static_cast<std::uint64_t>(trial));
    const OEDResult st = solve_stochastic(u, n, solver_rng, so);
    CHECK(st.optimal_value <= bf.optimal_value + slack);
    for (const auto& tp : st.trajectory) {
      CHECK(tp.parameter.minCoeff() >= so.bound);
      CHECK(tp.parameter.maxCoeff() <= 1.0 - so.bound);
    }

    RelaxedOptions ro;
    ro.max_iter = 200;
    OEDResult rel;
    try {
      rel = solve_relaxed(c, p, problem, ro);
    } catch (const NonConvergence<OEDResult>& e) {
      rel = e.best();
    }
    REQUIRE(rel.rounded_value.has_value());
    CHECK(*rel.rounded_value <= bf.optimal_value + slack);
    CHECK(rel.final_parameter.minCoeff() >= 0.0);
    CHECK(rel.final_parameter.maxCoeff() <= 1.0);
  }
}
