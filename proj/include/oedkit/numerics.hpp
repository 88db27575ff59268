#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

#include "oedkit/error.hpp"
#include "oedkit/rng.hpp"

namespace oedkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense symmetric matrix. Construction validates symmetry to 1e-12 relative
/// (against the largest entry magnitude) and then stores (m + m^T) / 2.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Matrix m);

  static SymMatrix identity(Eigen::Index n);
  static SymMatrix zero(Eigen::Index n);
  static SymMatrix diagonal(const Vector& d);

  Eigen::Index size() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// Boolean selection of active rows/columns.
class ActiveMask {
 public:
  ActiveMask() = default;
  explicit ActiveMask(std::vector<bool> flags);

  static ActiveMask all(std::size_t n) { return ActiveMask(std::vector<bool>(n, true)); }

  std::size_t size() const noexcept { return flags_.size(); }
  std::size_t count() const noexcept { return count_; }
  bool operator[](std::size_t i) const { return flags_[i]; }
  const std::vector<bool>& flags() const noexcept { return flags_; }

  /// Positions of the true flags, ascending.
  std::vector<Eigen::Index> active_indices() const;

 private:
  std::vector<bool> flags_;
  std::size_t count_ = 0;
};

/// Lower-triangular L with L L^T = m. Throws NotPositiveDefinite on a
/// non-positive pivot.
Matrix cholesky_factor(const SymMatrix& m);

double logdet_spd(const SymMatrix& m);

/// Sum of the diagonal, accumulated left to right.
double trace(const SymMatrix& m);
double trace(const Matrix& m);

/// P^T (P m P^T)^{-1} P embedded at full size. Rows and columns at inactive
/// positions are exactly zero. An empty mask yields the zero matrix: with no
/// active sensors the data misfit vanishes.
SymMatrix masked_spd_pseudo_inverse(const SymMatrix& m, const ActiveMask& mask);

using MatrixAction = std::function<Vector(const Vector&)>;

/// Randomized trace estimate (1/s) sum z^T A z with Rademacher probes z.
double hutchinson_trace(const MatrixAction& apply, Eigen::Index n, std::size_t samples,
                        Rng& rng);

Vector solve_spd(const SymMatrix& m, const Vector& b);

/// Inverse of an SPD matrix through its Cholesky factor.
SymMatrix inverse_spd(const SymMatrix& m);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double h);

/// Symmetric eigenvalues, ascending.
Vector symmetric_eigenvalues(const Matrix& m);

}  // namespace oedkit
