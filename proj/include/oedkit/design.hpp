#pragma once

#include <vector>

#include "oedkit/models.hpp"

namespace oedkit {

/// Sensor weights in [0, 1], one per observation entry.
class DesignVector {
 public:
  DesignVector() = default;
  explicit DesignVector(Vector weights);

  static DesignVector ones(Eigen::Index n) { return DesignVector(Vector::Ones(n)); }
  static DesignVector zeros(Eigen::Index n) { return DesignVector(Vector::Zero(n)); }
  /// Binary design whose bit j (least significant first) is sensor j.
  static DesignVector from_index(std::uint64_t index, Eigen::Index n);

  Eigen::Index size() const noexcept { return w_.size(); }
  const Vector& weights() const noexcept { return w_; }
  double operator[](Eigen::Index i) const { return w_(i); }

  bool is_binary() const;
  std::size_t active_count() const;
  ActiveMask mask() const;
  /// Inverse of from_index; requires a binary design.
  std::uint64_t to_index() const;

 private:
  Vector w_;
};

enum class WeightingMode { BinaryPseudoInverse, HadamardRelaxed };

/// P^T (P D R D P^T)^{-1} P with D = diag(design); design must be binary.
SymMatrix weighted_precision_binary(const SymMatrix& base_cov, const DesignVector& design);

/// Pseudo-inverse of Lambda(design) o R with Lambda_ij = w_i w_j off the
/// diagonal and 1/w_i^2 (or 0 when w_i = 0) on it; agrees with the binary
/// path at binary designs.
SymMatrix weighted_precision_relaxed(const SymMatrix& base_cov, const DesignVector& design);

SymMatrix weighted_precision(const SymMatrix& base_cov, const DesignVector& design,
                             WeightingMode mode);

/// Observation noise whose precision is reweighted by a design.
class WeightedNoiseModel {
 public:
  WeightedNoiseModel(GaussianMeasure base, DesignVector design,
                     WeightingMode mode = WeightingMode::HadamardRelaxed);
  /// All-active design.
  explicit WeightedNoiseModel(GaussianMeasure base);

  const GaussianMeasure& base() const noexcept { return base_; }
  const DesignVector& design() const noexcept { return design_; }
  WeightingMode mode() const noexcept { return mode_; }
  Eigen::Index size() const noexcept { return base_.size(); }

  /// Weighted precision W(design).
  const SymMatrix& precision() const noexcept { return precision_; }

  void set_design(DesignVector design);

 private:
  GaussianMeasure base_;
  DesignVector design_;
  WeightingMode mode_;
  SymMatrix precision_;
};

}  // namespace oedkit
