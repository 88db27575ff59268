#pragma once

#include "oedkit/design.hpp"

namespace oedkit {

/// Product of independent Bernoulli(theta_i) distributions over binary designs.
/// Every theta_i must lie strictly inside (0, 1).
class BernoulliPolicy {
 public:
  explicit BernoulliPolicy(Vector theta);

  Eigen::Index size() const noexcept { return theta_.size(); }
  const Vector& theta() const noexcept { return theta_; }

 private:
  Vector theta_;
};

/// Coordinate i is active when a uniform draw falls below theta_i.
DesignVector sample(const BernoulliPolicy& policy, Rng& rng);

double log_pmf(const BernoulliPolicy& policy, const DesignVector& d);

/// Score d_i / theta_i + (d_i - 1) / (1 - theta_i).
Vector log_pmf_gradient(const BernoulliPolicy& policy, const DesignVector& d);

}  // namespace oedkit
