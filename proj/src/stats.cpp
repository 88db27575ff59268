#include "oedkit/stats.hpp"

#include <cmath>

namespace oedkit {

BernoulliPolicy::BernoulliPolicy(Vector theta) : theta_(std::move(theta)) {
  require(theta_.size() >= 1, ErrorCode::InvalidArgument, "policy needs at least one coordinate");
  for (Eigen::Index i = 0; i < theta_.size(); ++i)
    require(theta_(i) > 0.0 && theta_(i) < 1.0, ErrorCode::InvalidArgument,
            "Bernoulli parameters must lie strictly inside (0, 1)");
}

DesignVector sample(const BernoulliPolicy& policy, Rng& rng) {
  Vector d(policy.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = rng.uniform() < policy.theta()(i) ? 1.0 : 0.0;
  return DesignVector(std::move(d));
}

namespace {
void check_binary(const BernoulliPolicy& policy, const DesignVector& d) {
  require(d.size() == policy.size(), ErrorCode::DimensionMismatch, "design/policy length mismatch");
  require(d.is_binary(), ErrorCode::NonBinaryDesign, "Bernoulli pmf needs a binary design");
}
}  // namespace

double log_pmf(const BernoulliPolicy& policy, const DesignVector& d) {
  check_binary(policy, d);
  double s = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double t = policy.theta()(i);
    s += d[i] == 1.0 ? std::log(t) : std::log1p(-t);
  }
  return s;
}

Vector log_pmf_gradient(const BernoulliPolicy& policy, const DesignVector& d) {
  check_binary(policy, d);
  Vector g(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double t = policy.theta()(i);
    g(i) = d[i] / t + (d[i] - 1.0) / (1.0 - t);
  }
  return g;
}

}  // namespace oedkit
