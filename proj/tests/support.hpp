#pragma once

#include <memory>

#include "oedkit/oed.hpp"

namespace oedkit::testing {

/// Random SPD matrix A A^T / n + shift I.
inline SymMatrix random_spd(Eigen::Index n, Rng& rng, double shift = 0.5) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  return SymMatrix(Matrix(a * a.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n)));
}

inline Vector random_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline DesignVector random_binary(Eigen::Index n, Rng& rng) {
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return DesignVector(w);
}

/// Weights uniform in [lo, hi].
inline DesignVector random_interior(Eigen::Index n, Rng& rng, double lo = 0.15, double hi = 0.85) {
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.uniform(lo, hi);
  return DesignVector(w);
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

struct ToySpec {
  Eigen::Index nx = 5;
  double dt = 0.1;
  std::uint64_t model_seed = 1;
  std::size_t n_steps = 10;
  double noise_variance = 0.05;
  double prior_variance = 1.0;
  std::vector<double> obs_times{0.1, 0.2, 0.3};
  bool dense_noise = false;  // random SPD noise covariance instead of a diagonal one
  bool dense_prior = false;
};

/// Toy linear-Gaussian twin: random linear model, identity observations,
/// truth ~ N(0, I), prior mean = truth + prior draw, noisy data.
struct ToyTwin {
  std::shared_ptr<const LinearTimeDependentModel> model;
  InverseProblem ip;
  Vector truth;
};

inline ToyTwin make_toy(const ToySpec& spec, std::uint64_t seed, bool with_data = true) {
  ToyTwin t;
  Rng master(seed);
  t.model = std::make_shared<LinearTimeDependentModel>(toy_linear_create(spec.nx, spec.dt, spec.model_seed));
  auto op = std::make_shared<PointObservationOperator>(PointObservationOperator::identity(spec.nx));
  Rng cov_rng = master.substream("covariances");
  const SymMatrix noise_cov = spec.dense_noise ? random_spd(spec.nx, cov_rng, 0.05)
                                               : SymMatrix::diagonal(Vector::Constant(spec.nx, spec.noise_variance));
  const SymMatrix prior_cov = spec.dense_prior ? random_spd(spec.nx, cov_rng, 0.2)
                                               : SymMatrix::diagonal(Vector::Constant(spec.nx, spec.prior_variance));
  Rng truth_rng = master.substream("truth");
  t.truth = random_vector(spec.nx, truth_rng);
  Rng prior_rng = master.substream("prior");
  const Vector mean = t.truth + gaussian_sample(GaussianMeasure(Vector::Zero(spec.nx), prior_cov), prior_rng);
  t.ip = InverseProblem(t.model, op, GaussianMeasure(mean, prior_cov),
                        WeightedNoiseModel(GaussianMeasure(Vector::Zero(spec.nx), noise_cov)),
                        TimeGrid(0.0, spec.dt, spec.n_steps));
  if (with_data) {
    Rng noise_rng = master.substream("noise");
    t.ip.register_observations(synthesize_observations(t.ip, t.truth, spec.obs_times, noise_rng));
  }
  return t;
}

/// Random linear-Gaussian problem: n_state and n_obs in 1..10, a random
/// observation operator interpolating up to two state entries per sensor, dense SPD
/// prior and noise covariances, and 1..5 observation times on a 6-step window.
struct RandomProblem {
  InverseProblem ip;
  Vector truth;
  std::vector<double> obs_times;
};

inline RandomProblem random_problem(Rng& rng, bool with_data = true) {
  const auto pick = [&](std::uint64_t lo, std::uint64_t hi) {
    return static_cast<Eigen::Index>(lo + rng.next_u64() % (hi - lo + 1));
  };
  const Eigen::Index n = pick(1, 10), m = pick(1, 10);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1.0, 1.0);
  a /= std::max(1.0, a.norm() / 1.2);
  std::vector<PointObservationOperator::Stencil> sensors(static_cast<std::size_t>(m));
  for (auto& st : sensors) {
    const double w = rng.uniform() < 0.5 ? 1.0 : rng.uniform(0.2, 0.8);
    st.entries.emplace_back(pick(0, static_cast<std::uint64_t>(n - 1)), w);
    if (w < 1.0) st.entries.emplace_back(pick(0, static_cast<std::uint64_t>(n - 1)), 1.0 - w);
  }
  const std::size_t steps = 6;
  std::vector<double> times;
  for (std::size_t k = 1; k <= steps; ++k)
    if (rng.uniform() < 0.5 && times.size() < 5) times.push_back(0.1 * static_cast<double>(k));
  if (times.empty()) times.push_back(0.1 * static_cast<double>(pick(1, steps)));
  const SymMatrix prior_cov = random_spd(n, rng, 0.3), noise_cov = random_spd(m, rng, 0.1);
  RandomProblem p{InverseProblem(std::make_shared<LinearTimeDependentModel>(a, 0.1),
                                 std::make_shared<PointObservationOperator>(sensors, n),
                                 GaussianMeasure(random_vector(n, rng), prior_cov),
                                 WeightedNoiseModel(GaussianMeasure(Vector::Zero(m), noise_cov)), TimeGrid(0.0, 0.1, steps)),
                  random_vector(n, rng), times};
  if (with_data) p.ip.register_observations(synthesize_observations(p.ip, p.truth, times, rng));
  return p;
}

}  // namespace oedkit::testing
