#include <doctest.h>

#include "support.hpp"

using namespace oedkit;
using namespace oedkit::testing;

TEST_CASE("TimeGrid lattice lookup") {
  const TimeGrid w(0.0, 0.1, 10);
  CHECK(w.lattice_index(0.3) == std::optional<std::size_t>(3));
  CHECK(w.lattice_index(0.0) == std::optional<std::size_t>(0));
  CHECK(w.lattice_index(1.0) == std::optional<std::size_t>(10));
  CHECK_FALSE(w.lattice_index(0.15).has_value());
  CHECK_FALSE(w.lattice_index(1.1).has_value());
  CHECK_THROWS_AS(TimeGrid(0.0, 0.0, 3), Error);
}

TEST_CASE("toy model is reproducible, seed dependent and bounded in spectral radius") {
  const auto a = toy_linear_create(5, 0.1, 1011), b = toy_linear_create(5, 0.1, 1011);
  CHECK(a.a_matrix() == b.a_matrix());
  const auto c = toy_linear_create(5, 0.1, 1012);
  CHECK((a.a_matrix() - c.a_matrix()).norm() > 1e-3);
  for (std::uint64_t s = 0; s < 20; ++s) CHECK(spectral_radius(toy_linear_create(8, 0.1, s).a_matrix()) <= 1.05 + 1e-12);

  const auto one = toy_linear_create(1, 0.1, 3);
  const double r = one.a_matrix()(0, 0);
  const auto traj = one.integrate({Vector::Constant(1, 2.0), 0.0}, TimeGrid(0.0, 0.1, 4));
  for (std::size_t k = 0; k < traj.size(); ++k)
    CHECK(traj[k].values(0) == doctest::Approx(2.0 * std::pow(r, static_cast<double>(k))));
}

TEST_CASE("integration matches dense matrix powers and trivial cases") {
  const auto m = toy_linear_create(5, 0.1, 7);
  Rng rng(1);
  const Vector x0 = random_vector(5, rng);
  const auto traj = m.integrate({x0, 0.0}, TimeGrid(0.0, 0.1, 3));
  REQUIRE(traj.size() == 4);
  const Matrix& a = m.a_matrix();
  CHECK(rel_err(traj[3].values, Vector(a * a * a * x0)) < 1e-14);
  CHECK(traj[3].time.value() == doctest::Approx(0.3));
  for (const auto& s : m.integrate({Vector::Zero(5), 0.0}, TimeGrid(0.0, 0.1, 3))) CHECK(s.values.norm() == 0.0);
  const LinearTimeDependentModel ident(Matrix::Identity(3, 3), 0.1);
  for (const auto& s : ident.integrate({Vector::Ones(3), 0.0}, TimeGrid(0.0, 0.1, 3)))
    CHECK(s.values == Vector::Ones(3));
  CHECK_THROWS_AS(m.integrate({Vector::Zero(4), 0.0}, TimeGrid(0.0, 0.1, 3)), Error);
}

TEST_CASE("adjoint identity <M x, y> = <x, M^T y> for the toy and advection-diffusion models") {
  Rng rng(2);
  const auto toy = toy_linear_create(6, 0.1, 3);
  const auto ad = ad_create(12, 12, 0.01, 0.01, VelocitySpec::Recirculating);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(6, rng), y = random_vector(6, rng);
    CHECK(std::abs(toy.step(x).dot(y) - x.dot(toy.adjoint_step(y))) < 1e-10 * (1 + x.norm() * y.norm()));
    const Vector u = random_vector(144, rng), v = random_vector(144, rng);
    CHECK(std::abs(ad.step(u).dot(v) - u.dot(ad.adjoint_step(v))) < 1e-10 * (1 + u.norm() * v.norm()));
  }
  Matrix s = random_spd(4, rng).matrix();
  const LinearTimeDependentModel sym(s, 0.1);
  const Vector x = random_vector(4, rng);
  CHECK((sym.step(x) - sym.adjoint_step(x)).norm() < 1e-12);
  const LinearTimeDependentModel ident(Matrix::Identity(4, 4), 0.1);
  CHECK(ident.adjoint_step(x) == x);
}

TEST_CASE("advection-diffusion construction and validation") {
  const auto m = ad_create(16, 16, 0.01, 0.01, VelocitySpec::Zero);
  CHECK(m.velocity_x().norm() == 0.0);
  CHECK(m.velocity_y().norm() == 0.0);
  const auto r = ad_create(16, 16, 0.01, 0.01, VelocitySpec::Recirculating);
  CHECK(r.velocity_x().norm() > 0.0);
  // Velocity vanishes inside obstacles.
  for (Eigen::Index i = 0; i < r.state_size(); ++i)
    if (r.obstacle_mask()[static_cast<std::size_t>(i)]) {
      CHECK(r.velocity_x()(i) == 0.0);
      CHECK(r.velocity_y()(i) == 0.0);
    }
  CHECK_THROWS_AS(ad_create(16, 16, 0.0, 0.01, VelocitySpec::Zero), Error);
  CHECK_THROWS_AS(ad_create(16, 16, -0.01, 0.01, VelocitySpec::Zero), Error);
  try {
    ad_create(3, 3, 0.01, 0.01, VelocitySpec::Zero);
    FAIL("expected InvalidGrid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGrid);
  }
}

TEST_CASE("zero-velocity advection-diffusion conserves mass and keeps the plume non-negative") {
  const auto m = ad_create(32, 32, 0.01, 0.01, VelocitySpec::Zero);
  Vector u = m.default_initial_condition();
  const double mass0 = m.total_mass(u);
  CHECK(mass0 > 0.0);
  for (int k = 0; k < 20; ++k) {
    const Vector next = m.step(u);
    CHECK(std::abs(m.total_mass(next) - m.total_mass(u)) <= 1e-8 * mass0);
    u = next;
  }
  CHECK(u.minCoeff() >= -1e-12);
  // Implicit upwinding keeps the recirculating plume non-negative and the
  // flux form still conserves mass.
  const auto r = ad_create(24, 24, 0.01, 0.01, VelocitySpec::Recirculating);
  Vector w = r.default_initial_condition();
  const double wmass = r.total_mass(w);
  for (int k = 0; k < 20; ++k) w = r.step(w);
  CHECK(w.minCoeff() >= -1e-12);
  CHECK(std::abs(r.total_mass(w) - wmass) <= 1e-8 * wmass);
}

TEST_CASE("point observation operators") {
  Rng rng(4);
  const Vector x = random_vector(9, rng);
  const auto id = PointObservationOperator::identity(9);
  CHECK(observe(id, x) == x);
  CHECK(observe_adjoint(id, x) == x);
  const auto pick = PointObservationOperator::at_indices({2, 7}, 9);
  CHECK(observe(pick, x)(0) == x(2));
  CHECK(observe(pick, x)(1) == x(7));
  CHECK(observe_adjoint(pick, Vector::Zero(2)).norm() == 0.0);

  // A point on a grid node sits at the center of four cell centers.
  const Grid2D grid{8, 8};
  const auto node = PointObservationOperator::at_points({{0.5, 0.25}}, grid);
  const Vector u = random_vector(64, rng);
  const double mean4 = (u(grid.index(3, 1)) + u(grid.index(4, 1)) + u(grid.index(3, 2)) + u(grid.index(4, 2))) / 4.0;
  CHECK(observe(node, u)(0) == doctest::Approx(mean4).epsilon(1e-14));

  const auto pts = PointObservationOperator::at_points({{0.1, 0.1}, {0.33, 0.71}, {0.9, 0.5}}, grid);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = random_vector(64, rng), d = random_vector(3, rng);
    CHECK(std::abs(observe(pts, a).dot(d) - a.dot(observe_adjoint(pts, d))) < 1e-12 * (1 + a.norm() * d.norm()));
  }
  CHECK((pts.matrix().rowwise().sum() - Vector::Ones(3)).norm() < 1e-14);
  CHECK_THROWS_AS(PointObservationOperator::at_indices({9}, 9), Error);
  CHECK_THROWS_AS(observe(pick, Vector::Zero(3)), Error);
  CHECK_THROWS_AS(PointObservationOperator({{{{0, 0.5}}}}, 3), Error);
}

TEST_CASE("Gaussian sampling and log density") {
  const GaussianMeasure g(Vector::Zero(2), SymMatrix::diagonal(Vector::Constant(2, 4.0)));
  Rng rng(6);
  double s2 = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) s2 += gaussian_sample(g, rng).squaredNorm();
  CHECK(std::abs(s2 / (2 * n) - 4.0) <= 0.2);

  const GaussianMeasure tight(Vector::Constant(3, 1.5), SymMatrix::diagonal(Vector::Constant(3, 1e-20)));
  CHECK((gaussian_sample(tight, rng) - tight.mean()).lpNorm<Eigen::Infinity>() < 1e-9);
  Rng a(3), b(3);
  CHECK(gaussian_sample(g, a) == gaussian_sample(g, b));

  const GaussianMeasure unit(Vector::Zero(2), SymMatrix::identity(2));
  CHECK(gaussian_log_pdf_unnormalized(unit, Vector::Zero(2)) == 0.0);
  CHECK(gaussian_log_pdf_unnormalized(unit, Vector::Ones(2)) == doctest::Approx(-1.0));
  const SymMatrix c = random_spd(5, rng);
  const Vector mean = random_vector(5, rng), v = random_vector(5, rng);
  const Matrix l = cholesky_factor(c);
  const Vector z = l.triangularView<Eigen::Lower>().solve(v - mean);
  CHECK(gaussian_log_pdf_unnormalized(GaussianMeasure(mean, c), v) == doctest::Approx(-0.5 * z.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("bilaplacian prior covariance") {
  const auto one = bilaplacian_prior_build(Grid1D{1}, 0.5, 2.0);
  CHECK(one.covariance()(0, 0) == doctest::Approx(2.0 / 0.25));
  for (const std::variant<Grid1D, Grid2D>& g : {std::variant<Grid1D, Grid2D>(Grid1D{16}),
                                                std::variant<Grid1D, Grid2D>(Grid2D{6, 5})}) {
    const auto prior = bilaplacian_prior_build(g, 0.7, 1.3);
    CHECK_NOTHROW(cholesky_factor(prior.covariance()));
    const Matrix lap = neumann_laplacian(g);
    Vector expect = symmetric_eigenvalues(lap);
    for (Eigen::Index i = 0; i < expect.size(); ++i) expect(i) = 1.3 / ((expect(i) + 0.7) * (expect(i) + 0.7));
    std::sort(expect.data(), expect.data() + expect.size());
    CHECK(rel_err(symmetric_eigenvalues(prior.covariance().matrix()), expect) < 1e-10);
    // Neumann Laplacian annihilates constants.
    CHECK((lap * Vector::Ones(lap.rows())).norm() < 1e-9);
  }
}
