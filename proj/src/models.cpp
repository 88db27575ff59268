#include "oedkit/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace oedkit {

TimeGrid::TimeGrid(double t0_, double dt_, std::size_t n_steps_) : t0(t0_), dt(dt_), n_steps(n_steps_) {
  require(dt > 0.0 && std::isfinite(dt), ErrorCode::InvalidArgument, "time step must be positive");
  require(std::isfinite(t0), ErrorCode::InvalidArgument, "initial time must be finite");
}

std::optional<std::size_t> TimeGrid::lattice_index(double t) const {
  const double k = std::round((t - t0) / dt);
  if (k < 0.0 || k > static_cast<double>(n_steps)) return std::nullopt;
  if (std::abs(t - (t0 + k * dt)) > 1e-9) return std::nullopt;
  return static_cast<std::size_t>(k);
}

std::vector<StateVector> SimulationModel::integrate(const StateVector& x0,
                                                    const TimeGrid& window) const {
  require(x0.values.size() == state_size(), ErrorCode::DimensionMismatch,
          "initial state length does not match the model state size");
  std::vector<StateVector> traj;
  traj.reserve(window.n_steps + 1);
  traj.push_back({x0.values, window.time(0)});
  for (std::size_t k = 1; k <= window.n_steps; ++k)
    traj.push_back({step(traj.back().values), window.time(k)});
  return traj;
}

// ---------------------------------------------------------------------------
// Linear toy model

double spectral_radius(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

LinearTimeDependentModel::LinearTimeDependentModel(Matrix a, double dt) : a_(std::move(a)), dt_(dt) {
  require(a_.rows() == a_.cols() && a_.rows() >= 1, ErrorCode::DimensionMismatch,
          "model matrix must be square and non-empty");
  require(dt_ > 0.0, ErrorCode::InvalidArgument, "model time step must be positive");
  spectral_radius_ = oedkit::spectral_radius(a_);
}

Vector LinearTimeDependentModel::step(const Vector& x) const {
  require(x.size() == a_.rows(), ErrorCode::DimensionMismatch, "state length mismatch");
  return a_ * x;
}

Vector LinearTimeDependentModel::adjoint_step(const Vector& lambda) const {
  require(lambda.size() == a_.rows(), ErrorCode::DimensionMismatch, "adjoint length mismatch");
  return a_.transpose() * lambda;
}

LinearTimeDependentModel toy_linear_create(Eigen::Index n_state, double dt, std::uint64_t seed) {
  require(n_state >= 1, ErrorCode::InvalidArgument, "toy model needs n_state >= 1");
  require(dt > 0.0, ErrorCode::InvalidArgument, "toy model needs dt > 0");
  Rng rng(seed);
  Matrix a(n_state, n_state);
  for (Eigen::Index i = 0; i < n_state; ++i)
    for (Eigen::Index j = 0; j < n_state; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
  constexpr double max_radius = 1.05;
  const double rho = spectral_radius(a);
  if (rho > max_radius) a *= max_radius / rho;
  return LinearTimeDependentModel(std::move(a), dt);
}

// ---------------------------------------------------------------------------
// Advection-diffusion

std::vector<Rectangle> default_obstacles() {
  return {{0.25, 0.5, 0.15, 0.4}, {0.6, 0.75, 0.6, 0.85}};
}

AdvectionDiffusionModel::AdvectionDiffusionModel(const Params& params)
    : params_(params), grid_{params.nx, params.ny} {
  require(params_.nx >= 4 && params_.ny >= 4, ErrorCode::InvalidGrid, "grid must be at least 4x4");
  require(params_.kappa > 0.0 && std::isfinite(params_.kappa), ErrorCode::InvalidArgument,
          "diffusivity kappa must be positive");
  require(params_.dt > 0.0, ErrorCode::InvalidArgument, "time step must be positive");

  const Eigen::Index n = grid_.size();
  obstacle_.assign(static_cast<std::size_t>(n), false);
  for (const auto& rect : params_.obstacles) {
    require(rect.x0 < rect.x1 && rect.y0 < rect.y1 && rect.x0 > 0.0 && rect.x1 < 1.0 &&
                rect.y0 > 0.0 && rect.y1 < 1.0,
            ErrorCode::InvalidGrid, "obstacle must be a proper rectangle inside the domain");
    std::size_t covered = 0;
    for (Eigen::Index j = 0; j < grid_.ny; ++j)
      for (Eigen::Index i = 0; i < grid_.nx; ++i)
        if (rect.contains(grid_.x_center(i), grid_.y_center(j))) {
          obstacle_[static_cast<std::size_t>(grid_.index(i, j))] = true;
          ++covered;
        }
    require(covered > 0, ErrorCode::InvalidGrid, "obstacle covers no grid cell; refine the grid");
  }
  auto is_obstacle = [&](Eigen::Index i, Eigen::Index j) {
    return obstacle_[static_cast<std::size_t>(grid_.index(i, j))];
  };

  vx_ = Vector::Zero(n);
  vy_ = Vector::Zero(n);
  if (params_.velocity == VelocitySpec::Recirculating) {
    const double c = params_.velocity_scale;
    const double pi = std::numbers::pi;
    for (Eigen::Index j = 0; j < grid_.ny; ++j)
      for (Eigen::Index i = 0; i < grid_.nx; ++i) {
        if (is_obstacle(i, j)) continue;
        const double x = grid_.x_center(i), y = grid_.y_center(j);
        vx_(grid_.index(i, j)) = -c * std::sin(pi * x) * std::cos(pi * y);
        vy_(grid_.index(i, j)) = c * std::cos(pi * x) * std::sin(pi * y);
      }
  }

  // du/dt = G u, assembled face by face so every flux leaving one cell enters
  // its neighbour (zero column sums).
  Matrix g = Matrix::Zero(n, n);
  const double hx = grid_.hx(), hy = grid_.hy();
  auto add_face = [&](Eigen::Index p, Eigen::Index q, double diff_coeff, double face_velocity,
                      double h) {
    // Diffusion.
    g(p, p) -= diff_coeff;
    g(p, q) += diff_coeff;
    g(q, q) -= diff_coeff;
    g(q, p) += diff_coeff;
    // Upwind advection, velocity positive from p to q.
    const Eigen::Index up = face_velocity >= 0.0 ? p : q;
    const double flux = face_velocity / h;
    g(p, up) -= flux;
    g(q, up) += flux;
  };
  for (Eigen::Index j = 0; j < grid_.ny; ++j)
    for (Eigen::Index i = 0; i < grid_.nx; ++i) {
      if (is_obstacle(i, j)) continue;
      const Eigen::Index p = grid_.index(i, j);
      if (i + 1 < grid_.nx && !is_obstacle(i + 1, j)) {
        const Eigen::Index q = grid_.index(i + 1, j);
        add_face(p, q, params_.kappa / (hx * hx), 0.5 * (vx_(p) + vx_(q)), hx);
      }
      if (j + 1 < grid_.ny && !is_obstacle(i, j + 1)) {
        const Eigen::Index q = grid_.index(i, j + 1);
        add_face(p, q, params_.kappa / (hy * hy), 0.5 * (vy_(p) + vy_(q)), hy);
      }
    }

  system_ = Matrix::Identity(n, n) - params_.dt * g;
  lu_.compute(system_);
}

Vector AdvectionDiffusionModel::step(const Vector& x) const {
  require(x.size() == grid_.size(), ErrorCode::DimensionMismatch, "state length mismatch");
  return lu_.solve(x);
}

Vector AdvectionDiffusionModel::adjoint_step(const Vector& lambda) const {
  require(lambda.size() == grid_.size(), ErrorCode::DimensionMismatch, "adjoint length mismatch");
  return lu_.transpose().solve(lambda);
}

std::optional<Matrix> AdvectionDiffusionModel::dense_operator() const {
  return Matrix(lu_.inverse());
}

double AdvectionDiffusionModel::total_mass(const Vector& u) const {
  return u.sum() * grid_.cell_area();
}

Vector AdvectionDiffusionModel::default_initial_condition() const {
  Vector u = Vector::Zero(grid_.size());
  for (Eigen::Index j = 0; j < grid_.ny; ++j)
    for (Eigen::Index i = 0; i < grid_.nx; ++i) {
      const Eigen::Index p = grid_.index(i, j);
      if (obstacle_[static_cast<std::size_t>(p)]) continue;
      const double dx = grid_.x_center(i) - 0.35, dy = grid_.y_center(j) - 0.7;
      u(p) = std::min(0.5, std::exp(-100.0 * (dx * dx + dy * dy)));
    }
  return u;
}

AdvectionDiffusionModel ad_create(Eigen::Index nx, Eigen::Index ny, double kappa, double dt,
                                  VelocitySpec velocity) {
  AdvectionDiffusionModel::Params p;
  p.nx = nx;
  p.ny = ny;
  p.kappa = kappa;
  p.dt = dt;
  p.velocity = velocity;
  return AdvectionDiffusionModel(p);
}

// ---------------------------------------------------------------------------
// Observation operator

PointObservationOperator::PointObservationOperator(std::vector<Stencil> sensors, Eigen::Index n_state)
    : sensors_(std::move(sensors)), n_state_(n_state) {
  require(n_state_ >= 1, ErrorCode::InvalidArgument, "observation operator needs n_state >= 1");
  require(!sensors_.empty(), ErrorCode::InvalidArgument, "observation operator needs a sensor");
  for (std::size_t s = 0; s < sensors_.size(); ++s) {
    const auto& st = sensors_[s];
    require(!st.entries.empty(), ErrorCode::InvalidArgument, "sensor stencil is empty");
    double wsum = 0.0;
    for (const auto& [idx, w] : st.entries) {
      require(idx >= 0 && idx < n_state_, ErrorCode::DimensionMismatch,
              "sensor stencil index out of range");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "stencil weights of sensor " << s << " sum to " << wsum << ", expected 1";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
}

PointObservationOperator PointObservationOperator::identity(Eigen::Index n_state) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_state));
  for (Eigen::Index i = 0; i < n_state; ++i) idx[static_cast<std::size_t>(i)] = i;
  return at_indices(idx, n_state);
}

PointObservationOperator PointObservationOperator::at_indices(const std::vector<Eigen::Index>& indices,
                                                              Eigen::Index n_state) {
  std::vector<Stencil> sensors;
  sensors.reserve(indices.size());
  for (auto i : indices) sensors.push_back({{{i, 1.0}}});
  return PointObservationOperator(std::move(sensors), n_state);
}

PointObservationOperator PointObservationOperator::at_points(
    const std::vector<std::pair<double, double>>& points, const Grid2D& grid) {
  require(grid.nx >= 2 && grid.ny >= 2, ErrorCode::InvalidGrid, "bilinear stencils need a 2x2 grid");
  auto locate = [](double coord, double h, Eigen::Index n, Eigen::Index& lo, double& t) {
    const double f = std::clamp(coord / h - 0.5, 0.0, static_cast<double>(n - 1));
    lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(f)), n - 2);
    t = f - static_cast<double>(lo);
  };
  std::vector<Stencil> sensors;
  for (const auto& [x, y] : points) {
    require(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0, ErrorCode::InvalidArgument,
            "sensor location outside the unit square");
    Eigen::Index i0, j0;
    double tx, ty;
    locate(x, grid.hx(), grid.nx, i0, tx);
    locate(y, grid.hy(), grid.ny, j0, ty);
    Stencil st;
    const std::pair<Eigen::Index, double> corners[4] = {
        {grid.index(i0, j0), (1 - tx) * (1 - ty)},
        {grid.index(i0 + 1, j0), tx * (1 - ty)},
        {grid.index(i0, j0 + 1), (1 - tx) * ty},
        {grid.index(i0 + 1, j0 + 1), tx * ty},
    };
    for (const auto& c : corners)
      if (c.second != 0.0) st.entries.push_back(c);
    sensors.push_back(std::move(st));
  }
  return PointObservationOperator(std::move(sensors), grid.size());
}

Matrix PointObservationOperator::matrix() const {
  Matrix o = Matrix::Zero(observation_size(), n_state_);
  for (Eigen::Index s = 0; s < observation_size(); ++s)
    for (const auto& [idx, w] : sensors_[static_cast<std::size_t>(s)].entries) o(s, idx) += w;
  return o;
}

Vector observe(const PointObservationOperator& op, const Vector& x) {
  require(x.size() == op.state_size(), ErrorCode::DimensionMismatch,
          "state length does not match the observation operator");
  Vector y(op.observation_size());
  for (Eigen::Index s = 0; s < y.size(); ++s) {
    double v = 0.0;
    for (const auto& [idx, w] : op.sensors()[static_cast<std::size_t>(s)].entries) v += w * x(idx);
    y(s) = v;
  }
  return y;
}

Vector observe_adjoint(const PointObservationOperator& op, const Vector& d) {
  require(d.size() == op.observation_size(), ErrorCode::DimensionMismatch,
          "observation length does not match the observation operator");
  Vector x = Vector::Zero(op.state_size());
  for (Eigen::Index s = 0; s < d.size(); ++s)
    for (const auto& [idx, w] : op.sensors()[static_cast<std::size_t>(s)].entries)
      x(idx) += w * d(s);
  return x;
}

ObservationVector observe(const PointObservationOperator& op, const StateVector& x) {
  return {observe(op, x.values), x.time.value_or(0.0)};
}

StateVector observe_adjoint(const PointObservationOperator& op, const ObservationVector& d) {
  return {observe_adjoint(op, d.values), d.time};
}

// ---------------------------------------------------------------------------
// Gaussian measures

GaussianMeasure::GaussianMeasure(Vector mean, SymMatrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  require(mean_.size() == covariance_.size(), ErrorCode::DimensionMismatch,
          "Gaussian mean and covariance sizes differ");
  chol_ = cholesky_factor(covariance_);
  const Eigen::Index n = mean_.size();
  Matrix linv = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  precision_ = SymMatrix(Matrix(linv.transpose() * linv));
}

Vector GaussianMeasure::apply_precision(const Vector& v) const {
  require(v.size() == size(), ErrorCode::DimensionMismatch, "precision action length mismatch");
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(v);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Vector gaussian_sample(const GaussianMeasure& g, Rng& rng) {
  Vector z(g.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return g.mean() + g.cholesky().triangularView<Eigen::Lower>() * z;
}

double gaussian_log_pdf_unnormalized(const GaussianMeasure& g, const Vector& v) {
  require(v.size() == g.size(), ErrorCode::DimensionMismatch, "log-pdf argument length mismatch");
  const Vector r = v - g.mean();
  return -0.5 * r.dot(g.apply_precision(r));
}

Matrix neumann_laplacian(const std::variant<Grid1D, Grid2D>& grid) {
  if (const auto* g1 = std::get_if<Grid1D>(&grid)) {
    const Eigen::Index n = g1->n;
    require(n >= 1, ErrorCode::InvalidGrid, "1-D grid needs at least one cell");
    const double h = 1.0 / static_cast<double>(n);
    const double c = 1.0 / (h * h);
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      l(i, i) += c;
      l(i + 1, i + 1) += c;
      l(i, i + 1) -= c;
      l(i + 1, i) -= c;
    }
    return l;
  }
  const auto& g2 = std::get<Grid2D>(grid);
  require(g2.nx >= 1 && g2.ny >= 1, ErrorCode::InvalidGrid, "2-D grid needs at least one cell");
  const Eigen::Index n = g2.size();
  const double cx = 1.0 / (g2.hx() * g2.hx()), cy = 1.0 / (g2.hy() * g2.hy());
  Matrix l = Matrix::Zero(n, n);
  auto couple = [&](Eigen::Index p, Eigen::Index q, double c) {
    l(p, p) += c;
    l(q, q) += c;
    l(p, q) -= c;
    l(q, p) -= c;
  };
  for (Eigen::Index j = 0; j < g2.ny; ++j)
    for (Eigen::Index i = 0; i < g2.nx; ++i) {
      if (i + 1 < g2.nx) couple(g2.index(i, j), g2.index(i + 1, j), cx);
      if (j + 1 < g2.ny) couple(g2.index(i, j), g2.index(i, j + 1), cy);
    }
  return l;
}

GaussianMeasure bilaplacian_prior_build(const std::variant<Grid1D, Grid2D>& grid, double delta,
                                        double scale, std::optional<Vector> mean) {
  require(delta > 0.0, ErrorCode::InvalidArgument, "prior shift delta must be positive");
  require(scale > 0.0, ErrorCode::InvalidArgument, "prior scale must be positive");
  const Matrix l = neumann_laplacian(grid);
  const Eigen::Index n = l.rows();
  const Matrix a = l + delta * Matrix::Identity(n, n);
  // (L + delta I) is SPD, so its inverse squared is as well.
  const Matrix ainv = inverse_spd(SymMatrix(a)).matrix();
  SymMatrix cov(Matrix(scale * ainv * ainv));
  Vector mu = mean.value_or(Vector::Zero(n));
  return GaussianMeasure(std::move(mu), std::move(cov));
}

}  // namespace oedkit
