#include "oedkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oedkit {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::TimeOffLattice: return "TimeOffLattice";
    case ErrorCode::MissingComponent: return "MissingComponent";
    case ErrorCode::NotLinear: return "NotLinear";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NonBinaryDesign: return "NonBinaryDesign";
    case ErrorCode::NotDifferentiable: return "NotDifferentiable";
    case ErrorCode::NonDifferentiablePenalty: return "NonDifferentiablePenalty";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::TooManyDesigns: return "TooManyDesigns";
  }
  return "Unknown";
}

SymMatrix::SymMatrix(Matrix m) {
  require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "SymMatrix requires a square matrix");
  require(m.rows() >= 1, ErrorCode::InvalidArgument, "SymMatrix dimension must be at least 1");
  require(m.allFinite(), ErrorCode::InvalidArgument, "SymMatrix entries must be finite");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "matrix is not symmetric (max |m - m^T| = " << asym << ")";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

SymMatrix SymMatrix::zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

SymMatrix SymMatrix::diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

ActiveMask::ActiveMask(std::vector<bool> flags) : flags_(std::move(flags)) {
  count_ = static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), true));
}

std::vector<Eigen::Index> ActiveMask::active_indices() const {
  std::vector<Eigen::Index> idx;
  idx.reserve(count_);
  for (std::size_t i = 0; i < flags_.size(); ++i)
    if (flags_[i]) idx.push_back(static_cast<Eigen::Index>(i));
  return idx;
}

Matrix cholesky_factor(const SymMatrix& m) {
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization met a non-positive pivot");
  Matrix l = llt.matrixL();
  if ((l.diagonal().array() <= 0.0).any())
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization met a non-positive pivot");
  return l;
}

double logdet_spd(const SymMatrix& m) {
  const Matrix l = cholesky_factor(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

double trace(const Matrix& m) {
  require(m.rows() == m.cols(), ErrorCode::DimensionMismatch, "trace requires a square matrix");
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s += m(i, i);
  return s;
}

double trace(const SymMatrix& m) { return trace(m.matrix()); }

SymMatrix masked_spd_pseudo_inverse(const SymMatrix& m, const ActiveMask& mask) {
  const Eigen::Index n = m.size();
  require(static_cast<Eigen::Index>(mask.size()) == n, ErrorCode::DimensionMismatch,
          "mask length does not match matrix dimension");
  Matrix out = Matrix::Zero(n, n);
  if (mask.count() == 0) return SymMatrix(out);

  const auto idx = mask.active_indices();
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = m(idx[a], idx[b]);

  const Matrix inv = inverse_spd(SymMatrix(sub)).matrix();
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) out(idx[a], idx[b]) = inv(a, b);
  return SymMatrix(out);
}

double hutchinson_trace(const MatrixAction& apply, Eigen::Index n, std::size_t samples, Rng& rng) {
  require(samples >= 1, ErrorCode::InvalidArgument, "hutchinson_trace needs at least one sample");
  require(n >= 1, ErrorCode::InvalidArgument, "hutchinson_trace needs a positive dimension");
  double total = 0.0;
  Vector z(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.rademacher();
    const Vector az = apply(z);
    require(az.size() == n, ErrorCode::DimensionMismatch, "matrix action returned wrong length");
    total += z.dot(az);
  }
  return total / static_cast<double>(samples);
}

Vector solve_spd(const SymMatrix& m, const Vector& b) {
  require(b.size() == m.size(), ErrorCode::DimensionMismatch, "solve_spd: right-hand side length");
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "solve_spd: matrix is not positive definite");
  return llt.solve(b);
}

SymMatrix inverse_spd(const SymMatrix& m) {
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "inverse_spd: matrix is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(m.size(), m.size()));
  return SymMatrix(Matrix(0.5 * (inv + inv.transpose())));
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double h) {
  require(h > 0.0, ErrorCode::InvalidArgument, "finite difference step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double fp = f(probe);
    probe(i) = x(i) - h;
    const double fm = f(probe);
    probe(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vector symmetric_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace oedkit
