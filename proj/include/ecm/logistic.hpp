#pragma once

#include "ecm/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace ecm {

struct LogisticModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double l2 = 0.0;
  std::size_t iterations = 0;
  bool converged = false;

  template <typename Derived>
  double linear(const Eigen::MatrixBase<Derived>& x) const {
    return w.dot(x) + b;
  }
};

struct LogisticOptions {
  double l2 = 1e-4;
  std::size_t max_iters = 100;
  double grad_tol = 1e-8;
  double initial_step = 1.0;  // first Newton step length tried
  double shrink = 0.5;        // step-halving factor
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Ridge-penalized negative log-likelihood; the penalty covers the intercept
// so that single-class labels still have a finite optimum.
inline double logistic_loss(const Eigen::MatrixXd& x, std::span<const int> y,
                            const Eigen::VectorXd& w, double b, double l2) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    loss += softplus(z[i]) - y[static_cast<std::size_t>(i)] * z[i];
  return loss + 0.5 * l2 * (w.squaredNorm() + b * b);
}

// Damped Newton with step halving from a zero start.
inline LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const int> y,
                                  const LogisticOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x.cols();
  if (n < 2) throw FitError("logistic regression needs at least 2 rows");
  if (static_cast<std::size_t>(n) != y.size()) throw ValidationError("logistic: label count mismatch");
  if (!(opt.l2 >= 0.0)) throw ValidationError("logistic: l2 must be >= 0");
  std::size_t positives = 0;
  for (int v : y) {
    if (!is_binary(v)) throw ValidationError("logistic: labels must be 0 or 1");
    positives += static_cast<std::size_t>(v);
  }
  if (opt.l2 == 0.0 && (positives == 0 || positives == y.size()))
    throw FitError("logistic: single-class labels need l2 > 0");

  Eigen::MatrixXd design(n, m + 1);
  design.leftCols(m) = x;
  design.col(m).setOnes();
  Eigen::VectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels[i] = y[static_cast<std::size_t>(i)];

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1);
  auto loss_at = [&](const Eigen::VectorXd& th) {
    return logistic_loss(x, y, th.head(m), th[m], opt.l2);
  };

  // Newton direction at theta. Converged means a small gradient *and* a
  // small step: under separation the gradient vanishes while the Hessian
  // degenerates, so the step stays large and the weights keep growing.
  auto newton = [&](Eigen::VectorXd& step) {
    const Eigen::VectorXd z = design * theta;
    Eigen::VectorXd p(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(z[i]);
      h[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd grad = design.transpose() * (p - labels) + opt.l2 * theta;
    Eigen::MatrixXd hess = design.transpose() * h.asDiagonal() * design;
    hess.diagonal().array() += opt.l2 + 1e-12;
    step = -hess.ldlt().solve(grad);
    return grad.lpNorm<Eigen::Infinity>() < opt.grad_tol &&
           step.lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, theta.lpNorm<Eigen::Infinity>());
  };

  LogisticModel model;
  model.l2 = opt.l2;
  double loss = loss_at(theta);
  Eigen::VectorXd step;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    if (newton(step)) {
      model.converged = true;
      break;
    }
    double alpha = opt.initial_step;
    bool improved = false;
    for (int k = 0; k < 60; ++k, alpha *= opt.shrink) {
      const Eigen::VectorXd cand = theta + alpha * step;
      const double cand_loss = loss_at(cand);
      if (std::isfinite(cand_loss) && cand_loss <= loss) {
        theta = cand;
        loss = cand_loss;
        improved = true;
        break;
      }
    }
    model.iterations = it + 1;
    if (!improved) break;
  }
  if (!model.converged) model.converged = newton(step);
  model.w = theta.head(m);
  model.b = theta[m];
  if (!model.w.allFinite() || !std::isfinite(model.b))
    throw FitError("logistic regression diverged");
  return model;
}

inline double predict_proba(const LogisticModel& model, const Eigen::VectorXd& x) {
  return sigmoid(model.linear(x));
}

}  // namespace ecm
