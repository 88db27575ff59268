#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "oedkit/numerics.hpp"

namespace oedkit {

struct StateVector {
  Vector values;
  std::optional<double> time;
};

struct ObservationVector {
  Vector values;
  double time = 0.0;
};

/// Uniform time lattice t0 + k dt, k = 0..n_steps.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.1;
  std::size_t n_steps = 0;

  TimeGrid() = default;
  TimeGrid(double t0, double dt, std::size_t n_steps);

  double time(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double final_time() const { return time(n_steps); }

  /// Lattice index of t when t sits on the lattice within 1e-9 and inside
  /// the window.
  std::optional<std::size_t> lattice_index(double t) const;
};

/// One-step linear propagator x_{k+1} = M x_k with its adjoint.
class SimulationModel {
 public:
  virtual ~SimulationModel() = default;

  virtual Eigen::Index state_size() const = 0;
  virtual double dt() const = 0;
  virtual Vector step(const Vector& x) const = 0;
  virtual Vector adjoint_step(const Vector& lambda) const = 0;

  /// Whether step() is linear in its argument. Linear-Gaussian routines
  /// (closed-form posterior, Fisher information) refuse nonlinear models.
  virtual bool is_linear() const { return true; }

  /// Dense one-step propagator when the model can materialize it.
  virtual std::optional<Matrix> dense_operator() const = 0;

  /// Trajectory x_0 .. x_{n_steps} with times taken from the window.
  std::vector<StateVector> integrate(const StateVector& x0, const TimeGrid& window) const;
};

class LinearTimeDependentModel final : public SimulationModel {
 public:
  LinearTimeDependentModel(Matrix a, double dt);

  Eigen::Index state_size() const override { return a_.rows(); }
  double dt() const override { return dt_; }
  Vector step(const Vector& x) const override;
  Vector adjoint_step(const Vector& lambda) const override;
  std::optional<Matrix> dense_operator() const override { return a_; }

  const Matrix& a_matrix() const noexcept { return a_; }
  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  Matrix a_;
  double dt_;
  double spectral_radius_;
};

/// Pseudo-random toy model: entries i.i.d. uniform on [-1, 1], rescaled so
/// the spectral radius is at most 1.05. Identical seeds give identical A.
LinearTimeDependentModel toy_linear_create(Eigen::Index n_state, double dt, std::uint64_t seed);

double spectral_radius(const Matrix& a);

enum class VelocitySpec { Zero, Recirculating };

/// Axis-aligned rectangle [x0, x1] x [y0, y1] in the unit square.
struct Rectangle {
  double x0, x1, y0, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// The two "building" rectangles [0.25,0.5]x[0.15,0.4] and [0.6,0.75]x[0.6,0.85].
std::vector<Rectangle> default_obstacles();

/// Cell-centered uniform grid on the unit square; cell (i, j) has index j*nx + i.
struct Grid2D {
  Eigen::Index nx = 0;
  Eigen::Index ny = 0;

  Eigen::Index size() const { return nx * ny; }
  double hx() const { return 1.0 / static_cast<double>(nx); }
  double hy() const { return 1.0 / static_cast<double>(ny); }
  double cell_area() const { return hx() * hy(); }
  Eigen::Index index(Eigen::Index i, Eigen::Index j) const { return j * nx + i; }
  double x_center(Eigen::Index i) const { return (static_cast<double>(i) + 0.5) * hx(); }
  double y_center(Eigen::Index j) const { return (static_cast<double>(j) + 0.5) * hy(); }
};

struct Grid1D {
  Eigen::Index n = 0;
};

/// Advection-diffusion u_t - kappa Lap u + v . grad u = 0 on (0,1)^2 with
/// no-flux walls, including the walls of the obstacle cells.
///
/// Discretization: backward Euler in time, conservative cell-centered finite
/// differences in space with first-order upwind advective fluxes. Obstacle
/// cells are decoupled from the flow and keep their value.
class AdvectionDiffusionModel final : public SimulationModel {
 public:
  struct Params {
    Eigen::Index nx = 32;
    Eigen::Index ny = 32;
    double kappa = 0.01;
    double dt = 0.01;
    VelocitySpec velocity = VelocitySpec::Recirculating;
    double velocity_scale = 1.0;
    std::vector<Rectangle> obstacles = default_obstacles();
  };

  explicit AdvectionDiffusionModel(const Params& params);

  Eigen::Index state_size() const override { return grid_.size(); }
  double dt() const override { return params_.dt; }
  Vector step(const Vector& x) const override;
  Vector adjoint_step(const Vector& lambda) const override;
  std::optional<Matrix> dense_operator() const override;

  const Params& params() const noexcept { return params_; }
  const Grid2D& grid() const noexcept { return grid_; }
  const std::vector<bool>& obstacle_mask() const noexcept { return obstacle_; }
  const Vector& velocity_x() const noexcept { return vx_; }
  const Vector& velocity_y() const noexcept { return vy_; }

  /// Implicit system matrix I - dt G, where du/dt = G u is the semi-discrete operator.
  const Matrix& system_matrix() const noexcept { return system_; }

  /// sum(u) * cell area.
  double total_mass(const Vector& u) const;

  /// Smooth plume used as the default ground-truth initial condition; zero
  /// on obstacle cells.
  Vector default_initial_condition() const;

 private:
  Params params_;
  Grid2D grid_;
  std::vector<bool> obstacle_;
  Vector vx_, vy_;
  Matrix system_;
  Eigen::PartialPivLU<Matrix> lu_;
};

AdvectionDiffusionModel ad_create(Eigen::Index nx, Eigen::Index ny, double kappa, double dt,
                                  VelocitySpec velocity);

/// Point observations; each sensor is a weighted stencil of state entries.
class PointObservationOperator {
 public:
  struct Stencil {
    std::vector<std::pair<Eigen::Index, double>> entries;
  };

  PointObservationOperator(std::vector<Stencil> sensors, Eigen::Index n_state);

  static PointObservationOperator identity(Eigen::Index n_state);
  static PointObservationOperator at_indices(const std::vector<Eigen::Index>& indices,
                                             Eigen::Index n_state);
  /// Bilinear interpolation between the cell centers surrounding each point.
  static PointObservationOperator at_points(const std::vector<std::pair<double, double>>& points,
                                            const Grid2D& grid);

  Eigen::Index state_size() const noexcept { return n_state_; }
  Eigen::Index observation_size() const noexcept {
    return static_cast<Eigen::Index>(sensors_.size());
  }
  const std::vector<Stencil>& sensors() const noexcept { return sensors_; }

  /// Dense N_obs x N_state matrix.
  Matrix matrix() const;

 private:
  std::vector<Stencil> sensors_;
  Eigen::Index n_state_;
};

ObservationVector observe(const PointObservationOperator& op, const StateVector& x);
StateVector observe_adjoint(const PointObservationOperator& op, const ObservationVector& d);
Vector observe(const PointObservationOperator& op, const Vector& x);
Vector observe_adjoint(const PointObservationOperator& op, const Vector& d);

/// N(mean, covariance); the covariance must be SPD.
class GaussianMeasure {
 public:
  GaussianMeasure(Vector mean, SymMatrix covariance);

  Eigen::Index size() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const SymMatrix& covariance() const noexcept { return covariance_; }
  const Matrix& cholesky() const noexcept { return chol_; }

  /// Gamma^{-1} v.
  Vector apply_precision(const Vector& v) const;
  /// Dense Gamma^{-1}.
  const SymMatrix& precision() const noexcept { return precision_; }

 private:
  Vector mean_;
  SymMatrix covariance_;
  Matrix chol_;
  SymMatrix precision_;
};

Vector gaussian_sample(const GaussianMeasure& g, Rng& rng);

/// -1/2 (v - mean)^T Gamma^{-1} (v - mean).
double gaussian_log_pdf_unnormalized(const GaussianMeasure& g, const Vector& v);

/// Covariance scale * (L_h + delta I)^{-2}, L_h the Neumann negative Laplacian
/// (3-point in 1-D, 5-point in 2-D) on a cell-centered unit grid.
GaussianMeasure bilaplacian_prior_build(const std::variant<Grid1D, Grid2D>& grid, double delta = 0.5,
                                        double scale = 1.0,
                                        std::optional<Vector> mean = std::nullopt);

/// The discrete negative Laplacian used by bilaplacian_prior_build.
Matrix neumann_laplacian(const std::variant<Grid1D, Grid2D>& grid);

}  // namespace oedkit
