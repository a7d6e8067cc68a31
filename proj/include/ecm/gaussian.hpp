#pragma once

#include "ecm/core.hpp"

#include <cmath>
#include <string>

namespace ecm {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Cholesky-factored multivariate normal, cached for repeated evaluation.
class GaussianDensity {
 public:
  explicit GaussianDensity(const GaussianComponent& c) : mu_(c.mu) {
    if (c.sigma.rows() != c.mu.size() || c.sigma.cols() != c.mu.size())
      throw ValidationError("covariance shape does not match mean dimension");
    if (!c.sigma.allFinite() || !c.mu.allFinite())
      throw FitError("Gaussian parameters are not finite");
    llt_.compute(c.sigma);
    if (llt_.info() != Eigen::Success)
      throw FitError("covariance is not positive definite");
    const Eigen::VectorXd diag = llt_.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) throw FitError("covariance is not positive definite");
    log_det_ = 2.0 * diag.array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(mu_.size()) * kLog2Pi + log_det_);
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mu_.size()); }
  double log_det() const noexcept { return log_det_; }

  template <typename Derived>
  double logpdf(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != mu_.size()) throw ValidationError("feature dimension mismatch");
    const Eigen::VectorXd z = llt_.matrixL().solve((x - mu_).eval());
    return log_norm_ - 0.5 * z.squaredNorm();
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
};

inline double gaussian_logpdf(const Eigen::VectorXd& x, const GaussianComponent& c) {
  return GaussianDensity(c).logpdf(x);
}

// Throws when the component is not symmetric or not positive definite.
inline void check_component(const GaussianComponent& c, const std::string& name) {
  const auto d = c.mu.size();
  if (d == 0 || c.sigma.rows() != d || c.sigma.cols() != d)
    throw ValidationError(name + ": covariance shape does not match mean dimension");
  if ((c.sigma - c.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ValidationError(name + ": covariance is not symmetric");
  try {
    GaussianDensity check(c);
  } catch (const FitError&) {
    throw FitError(name + ": covariance is not positive definite");
  }
}

}  // namespace ecm
