#include "oedkit/design.hpp"

#include <cmath>

namespace oedkit {

DesignVector::DesignVector(Vector weights) : w_(std::move(weights)) {
  for (Eigen::Index i = 0; i < w_.size(); ++i)
    require(std::isfinite(w_(i)) && w_(i) >= 0.0 && w_(i) <= 1.0, ErrorCode::InvalidArgument,
            "design weights must lie in [0, 1]");
}

DesignVector DesignVector::from_index(std::uint64_t index, Eigen::Index n) {
  require(n >= 1 && n <= 63, ErrorCode::InvalidArgument, "index encoding supports 1..63 sensors");
  Vector w(n);
  for (Eigen::Index j = 0; j < n; ++j) w(j) = ((index >> j) & 1U) != 0 ? 1.0 : 0.0;
  return DesignVector(std::move(w));
}

bool DesignVector::is_binary() const {
  for (Eigen::Index i = 0; i < w_.size(); ++i)
    if (w_(i) != 0.0 && w_(i) != 1.0) return false;
  return true;
}

std::size_t DesignVector::active_count() const {
  std::size_t c = 0;
  for (Eigen::Index i = 0; i < w_.size(); ++i)
    if (w_(i) != 0.0) ++c;
  return c;
}

ActiveMask DesignVector::mask() const {
  std::vector<bool> flags(static_cast<std::size_t>(w_.size()));
  for (Eigen::Index i = 0; i < w_.size(); ++i) flags[static_cast<std::size_t>(i)] = w_(i) != 0.0;
  return ActiveMask(std::move(flags));
}

std::uint64_t DesignVector::to_index() const {
  require(is_binary(), ErrorCode::NonBinaryDesign, "design index requires a binary design");
  require(w_.size() <= 63, ErrorCode::InvalidArgument, "index encoding supports up to 63 sensors");
  std::uint64_t idx = 0;
  for (Eigen::Index j = 0; j < w_.size(); ++j)
    if (w_(j) == 1.0) idx |= std::uint64_t{1} << j;
  return idx;
}

SymMatrix weighted_precision_binary(const SymMatrix& base_cov, const DesignVector& design) {
  require(design.size() == base_cov.size(), ErrorCode::DimensionMismatch,
          "design length must equal the observation dimension");
  require(design.is_binary(), ErrorCode::NonBinaryDesign,
          "pseudo-inverse weighting needs a binary design");
  const Vector& w = design.weights();
  const Matrix drd = w.asDiagonal() * base_cov.matrix() * w.asDiagonal();
  return masked_spd_pseudo_inverse(SymMatrix(drd), design.mask());
}

SymMatrix weighted_precision_relaxed(const SymMatrix& base_cov, const DesignVector& design) {
  require(design.size() == base_cov.size(), ErrorCode::DimensionMismatch,
          "design length must equal the observation dimension");
  const Eigen::Index n = base_cov.size();
  const Vector& w = design.weights();
  Matrix weighted = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double lambda;
      if (i != j)
        lambda = w(i) * w(j);
      else
        lambda = w(i) == 0.0 ? 0.0 : 1.0 / (w(i) * w(i));
      weighted(i, j) = lambda * base_cov(i, j);
    }
  return masked_spd_pseudo_inverse(SymMatrix(weighted), design.mask());
}

SymMatrix weighted_precision(const SymMatrix& base_cov, const DesignVector& design,
                             WeightingMode mode) {
  return mode == WeightingMode::BinaryPseudoInverse ? weighted_precision_binary(base_cov, design)
                                                    : weighted_precision_relaxed(base_cov, design);
}

WeightedNoiseModel::WeightedNoiseModel(GaussianMeasure base, DesignVector design, WeightingMode mode)
    : base_(std::move(base)), design_(std::move(design)), mode_(mode) {
  require(design_.size() == base_.size(), ErrorCode::DimensionMismatch,
          "one design weight per observation entry is required");
  precision_ = weighted_precision(base_.covariance(), design_, mode_);
}

WeightedNoiseModel::WeightedNoiseModel(GaussianMeasure base)
    : WeightedNoiseModel(base, DesignVector::ones(base.size()), WeightingMode::HadamardRelaxed) {}

void WeightedNoiseModel::set_design(DesignVector design) {
  require(design.size() == base_.size(), ErrorCode::DimensionMismatch,
          "one design weight per observation entry is required");
  precision_ = weighted_precision(base_.covariance(), design, mode_);
  design_ = std::move(design);
}

}  // namespace oedkit
