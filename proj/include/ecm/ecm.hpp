#pragma once

// Expectation-Causality-Maximization: EM for a four-population Gaussian
// mixture where every E-step is followed by a projection of each row's
// responsibilities onto the two populations compatible with its observed
// (treatment, outcome) pair.

#include "ecm/core.hpp"
#include "ecm/gaussian.hpp"
#include "ecm/log.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ecm {

struct EcmConfig {
  std::size_t max_iters = 200;
  double tol = 1e-6;       // absolute ELBO improvement
  double cov_reg = 1e-6;   // ridge added to every covariance diagonal
  double min_pi = 1e-8;    // mixing-weight floor
  IteMode ite_mode = IteMode::ModelConsistent;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(tol > 0.0)) throw ValidationError("tol must be > 0");
    if (!(cov_reg >= 0.0)) throw ValidationError("cov_reg must be >= 0");
    if (!(min_pi >= 0.0 && min_pi < 0.25)) throw ValidationError("min_pi must lie in [0, 0.25)");
  }
};

struct FitTrace {
  double initial_elbo = 0.0;
  std::vector<double> elbo;            // after each iteration's M-step
  std::vector<double> loglik;          // observed-data log-likelihood, same model
  std::vector<double> seconds;         // wall clock per iteration
  std::vector<std::size_t> fallback_rows;  // E-step rows with no finite weight
  std::vector<std::string> flags;

  std::size_t iterations() const noexcept { return elbo.size(); }
};

struct FitResult {
  MixtureModel model;
  Responsibilities q;
  FitTrace trace;
};

inline void validate_model(const MixtureModel& m) {
  if (!m.pi.allFinite() || (m.pi.array() < 0.0).any())
    throw ValidationError("mixing weights must be finite and non-negative");
  if (std::abs(m.pi.sum() - 1.0) > 1e-12) throw ValidationError("mixing weights must sum to 1");
  const auto d = m.components[0].mu.size();
  for (std::size_t k = 0; k < kNumGroups; ++k) {
    if (m.components[k].mu.size() != d)
      throw ValidationError("mixture components have different dimensions");
    check_component(m.components[k], std::string("group ") + group_code(group_at(k)));
  }
}

namespace detail {

inline double log_or_neg_inf(double v) {
  return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

// log pi_k + log f_k(x) for one model, with the factorizations cached.
class LogJoint {
 public:
  explicit LogJoint(const MixtureModel& m) {
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      try {
        densities_.emplace_back(m.components[k]);
      } catch (const FitError& e) {
        throw FitError(std::string("group ") + group_code(group_at(k)) + ": " + e.what());
      }
      log_pi_[k] = log_or_neg_inf(m.pi[static_cast<Eigen::Index>(k)]);
    }
  }

  std::size_t dim() const noexcept { return densities_.front().dim(); }

  template <typename Derived>
  GroupVector operator()(const Eigen::MatrixBase<Derived>& x) const {
    GroupVector out;
    for (std::size_t k = 0; k < kNumGroups; ++k)
      out[static_cast<Eigen::Index>(k)] = log_pi_[k] + densities_[k].logpdf(x);
    return out;
  }

  Responsibilities matrix(const Dataset& data) const {
    if (data.dim() != dim()) throw ValidationError("model and data dimensions differ");
    Responsibilities lj(static_cast<Eigen::Index>(data.size()), 4);
    const auto& x = data.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) lj.row(i) = (*this)(x.row(i).transpose()).transpose();
    return lj;
  }

 private:
  std::vector<GaussianDensity> densities_;
  std::array<double, kNumGroups> log_pi_{};
};

// Normalized exp of a log-weight row; false when no entry is finite.
inline bool softmax_row(const GroupVector& logw, GroupVector& out) {
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) return false;
  // Scalar exp: Eigen's packet exp clamps -inf to a denormal, not 0.
  out = (logw.array() - mx).unaryExpr([](double v) { return std::exp(v); });
  out /= out.sum();
  return true;
}

inline double logsumexp(const GroupVector& logw) {
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((logw.array() - mx).unaryExpr([](double v) { return std::exp(v); }).sum());
}

inline void uniform_admissible(Eigen::Ref<GroupVector> row, int t, int y) {
  row.setZero();
  const auto [a, b] = admissible_groups(t, y);
  row[static_cast<Eigen::Index>(index(a))] = 0.5;
  row[static_cast<Eigen::Index>(index(b))] = 0.5;
}

inline Responsibilities e_step_from_log_joint(const Dataset& data, const Responsibilities& lj,
                                              std::size_t* fallback_rows) {
  Responsibilities q(lj.rows(), 4);
  std::size_t fallbacks = 0;
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    GroupVector row;
    if (softmax_row(lj.row(i).transpose(), row)) {
      q.row(i) = row.transpose();
    } else {
      GroupVector u;
      uniform_admissible(u, data.t(static_cast<std::size_t>(i)), data.y(static_cast<std::size_t>(i)));
      q.row(i) = u.transpose();
      ++fallbacks;
    }
  }
  if (fallback_rows) *fallback_rows = fallbacks;
  return q;
}

inline double elbo_from_log_joint(const Responsibilities& q, const Responsibilities& lj) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index k = 0; k < 4; ++k) {
      const double qik = q(i, k);
      if (qik > 0.0) total += qik * (lj(i, k) - std::log(qik));
    }
  }
  return total;
}

inline double loglik_from_log_joint(const Responsibilities& lj) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < lj.rows(); ++i) total += logsumexp(lj.row(i).transpose());
  return total;
}

inline double arm_rate(const Dataset& data, int arm) {
  std::size_t n = 0, pos = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.t(i) != arm) continue;
    ++n;
    pos += static_cast<std::size_t>(data.y(i));
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                : static_cast<double>(pos) / static_cast<double>(n);
}

}  // namespace detail

// Unconstrained posterior over the four populations for every row.
inline Responsibilities e_step(const Dataset& data, const MixtureModel& model,
                               std::size_t* fallback_rows = nullptr) {
  const detail::LogJoint lj(model);
  return detail::e_step_from_log_joint(data, lj.matrix(data), fallback_rows);
}

// Zeroes the two populations ruled out by each row's (t, y) and renormalizes
// the remaining pair; a pair with no mass becomes (1/2, 1/2).
inline Responsibilities c_step(const Responsibilities& q, const Dataset& data) {
  if (static_cast<std::size_t>(q.rows()) != data.size())
    throw ValidationError("responsibilities and data have different row counts");
  Responsibilities out = Responsibilities::Zero(q.rows(), 4);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const auto [a, b] = admissible_groups(data.t(static_cast<std::size_t>(i)),
                                          data.y(static_cast<std::size_t>(i)));
    const auto ia = static_cast<Eigen::Index>(index(a));
    const auto ib = static_cast<Eigen::Index>(index(b));
    const double qa = std::max(q(i, ia), 0.0);
    const double qb = std::max(q(i, ib), 0.0);
    const double s = qa + qb;
    if (s > 0.0 && std::isfinite(s)) {
      out(i, ia) = qa / s;
      out(i, ib) = 1.0 - out(i, ia);
    } else {
      out(i, ia) = 0.5;
      out(i, ib) = 0.5;
    }
  }
  return out;
}

// Weighted maximum-likelihood update. Groups whose total responsibility falls
// below 1e-10 keep their parameters from `previous` (or take the pooled
// mean/covariance when there is none).
inline MixtureModel m_step(const Dataset& data, const Responsibilities& q, const EcmConfig& cfg,
                           const MixtureModel* previous = nullptr,
                           std::vector<std::string>* flags = nullptr) {
  cfg.validate();
  if (static_cast<std::size_t>(q.rows()) != data.size())
    throw ValidationError("responsibilities and data have different row counts");
  const auto& x = data.features();
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::MatrixXd ridge = cfg.cov_reg * Eigen::MatrixXd::Identity(d, d);

  MixtureModel m;
  GroupVector mass = q.colwise().sum().transpose();
  GroupVector pi = mass / static_cast<double>(n);
  pi = pi.cwiseMax(cfg.min_pi);
  m.pi = pi / pi.sum();

  for (std::size_t k = 0; k < kNumGroups; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (mass[kk] < 1e-10) {
      if (flags)
        flags->push_back(std::string("group ") + group_code(group_at(k)) +
                         " has no responsibility mass; parameters carried over");
      if (previous) {
        m.components[k] = previous->components[k];
      } else {
        const Eigen::VectorXd mean = x.colwise().mean().transpose();
        const Eigen::MatrixXd xc = x.rowwise() - mean.transpose();
        Eigen::MatrixXd cov = (xc.transpose() * xc) / static_cast<double>(n);
        m.components[k] = {mean, 0.5 * (cov + cov.transpose()) + ridge};
      }
      continue;
    }
    const Eigen::VectorXd w = q.col(kk);
    const Eigen::VectorXd mean = (x.transpose() * w) / mass[kk];
    const Eigen::MatrixXd xc = x.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = (xc.transpose() * w.asDiagonal() * xc) / mass[kk];
    m.components[k] = {mean, 0.5 * (cov + cov.transpose()) + ridge};
  }

  m.p1_hat = detail::arm_rate(data, 1);
  m.p0_hat = detail::arm_rate(data, 0);
  m.meta.seed = cfg.seed;
  m.meta.ite_mode = cfg.ite_mode;
  return m;
}

inline double log_likelihood(const Dataset& data, const MixtureModel& model) {
  return detail::loglik_from_log_joint(detail::LogJoint(model).matrix(data));
}

// Sum over rows and over groups with q > 0 of q (log pi + log f - log q).
inline double elbo(const Dataset& data, const Responsibilities& q, const MixtureModel& model) {
  if (static_cast<std::size_t>(q.rows()) != data.size())
    throw ValidationError("responsibilities and data have different row counts");
  return detail::elbo_from_log_joint(q, detail::LogJoint(model).matrix(data));
}

inline Responsibilities initial_responsibilities(const Dataset& data) {
  Responsibilities q(static_cast<Eigen::Index>(data.size()), 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    GroupVector row;
    detail::uniform_admissible(row, data.t(i), data.y(i));
    q.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return q;
}

inline FitResult fit(const Dataset& data, const EcmConfig& cfg = {}) {
  cfg.validate();
  if (data.size() < 8)
    log::warn("fitting ECM on fewer than 8 rows (" + std::to_string(data.size()) + ")");
  if (cfg.ite_mode == IteMode::LiteralEq1 &&
      (data.treated_count() == 0 || data.control_count() == 0))
    throw FitError("literal_eq1 mode needs both treated and control rows");

  using Clock = std::chrono::steady_clock;
  FitResult r;
  r.q = initial_responsibilities(data);
  r.model = m_step(data, r.q, cfg, nullptr, &r.trace.flags);
  Responsibilities lj = detail::LogJoint(r.model).matrix(data);
  double current = detail::elbo_from_log_joint(r.q, lj);
  r.trace.initial_elbo = current;

  bool converged = false;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const auto start = Clock::now();
    std::size_t fallbacks = 0;
    Responsibilities q = c_step(detail::e_step_from_log_joint(data, lj, &fallbacks), data);
    MixtureModel next = m_step(data, q, cfg, &r.model, &r.trace.flags);
    lj = detail::LogJoint(next).matrix(data);
    const double value = detail::elbo_from_log_joint(q, lj);

    r.trace.elbo.push_back(value);
    r.trace.loglik.push_back(detail::loglik_from_log_joint(lj));
    r.trace.fallback_rows.push_back(fallbacks);
    r.trace.seconds.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    if (fallbacks > 0)
      r.trace.flags.push_back("iteration " + std::to_string(it + 1) + ": " +
                              std::to_string(fallbacks) + " rows fell back to uniform");

    r.q = std::move(q);
    r.model = std::move(next);
    const double improvement = value - current;
    current = value;
    if (improvement < cfg.tol) {
      converged = true;
      break;
    }
  }

  r.model.meta.iters = r.trace.iterations();
  r.model.meta.elbo = current;
  r.model.meta.converged = converged;
  return r;
}

// Posterior membership and ITE evaluation with the model's factorizations
// computed once.
class MixturePosterior {
 public:
  explicit MixturePosterior(const MixtureModel& model) : model_(model), log_joint_(model) {}

  std::size_t dim() const noexcept { return log_joint_.dim(); }

  GroupVector membership(const Eigen::VectorXd& x) const {
    GroupVector out;
    if (!detail::softmax_row(log_joint_(x), out)) out = model_.pi;
    return out;
  }

  double ite(const Eigen::VectorXd& x, IteMode mode) const {
    const GroupVector l = membership(x);
    if (mode == IteMode::ModelConsistent) return l[0] - l[3];
    if (!std::isfinite(model_.p1_hat) || !std::isfinite(model_.p0_hat))
      throw FitError("literal_eq1 needs outcome rates from both arms");
    return (l[0] + l[2]) * model_.p1_hat - (l[2] + l[3]) * model_.p0_hat;
  }

  double ite(const Eigen::VectorXd& x) const { return ite(x, model_.meta.ite_mode); }

  // Most likely population among the two compatible with (t, y); ties go to
  // the lower canonical index.
  CausalGroup likely_group(const Individual& ind) const {
    const GroupVector l = membership(ind.x);
    const auto [a, b] = admissible_groups(ind.t, ind.y);
    return l[static_cast<Eigen::Index>(index(b))] > l[static_cast<Eigen::Index>(index(a))] ? b : a;
  }

  int counterfactual(const Individual& ind) const {
    const PotentialOutcomes po = potential_outcomes(likely_group(ind));
    return ind.t == 1 ? po.y0 : po.y1;
  }

 private:
  const MixtureModel& model_;
  detail::LogJoint log_joint_;
};

inline GroupVector posterior_membership(const Eigen::VectorXd& x, const MixtureModel& model) {
  return MixturePosterior(model).membership(x);
}

inline double estimate_ite(const Eigen::VectorXd& x, const MixtureModel& model, IteMode mode) {
  return MixturePosterior(model).ite(x, mode);
}

inline int predict_counterfactual(const Individual& ind, const MixtureModel& model) {
  return MixturePosterior(model).counterfactual(ind);
}

}  // namespace ecm
