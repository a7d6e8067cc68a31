#pragma once

// Logistic-regression uplift baselines:
//   LR1  treatment appended as an extra feature,
//   LR2  one classifier per arm,
//   LRZ  a single classifier on the class-variable transform z = [y == t].

#include "ecm/core.hpp"
#include "ecm/log.hpp"
#include "ecm/logistic.hpp"

#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecm {

enum class BaselineKind { LR1, LR2, LRZ };

inline std::string_view to_string(BaselineKind k) noexcept {
  switch (k) {
    case BaselineKind::LR1: return "lr1";
    case BaselineKind::LR2: return "lr2";
    case BaselineKind::LRZ: return "lrz";
  }
  return "?";
}

inline BaselineKind parse_baseline_kind(std::string_view s) {
  if (s == "lr1") return BaselineKind::LR1;
  if (s == "lr2") return BaselineKind::LR2;
  if (s == "lrz") return BaselineKind::LRZ;
  throw ValidationError("unknown baseline '" + std::string(s) + "' (expected lr1|lr2|lrz)");
}

constexpr int class_variable_transform(int t, int y) noexcept { return t == y ? 1 : 0; }

// Per-column affine map to mean 0 / variance 1, learned on training rows.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd xc = x.rowwise() - s.mean.transpose();
    s.scale = (xc.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
      if (!(s.scale[j] > 0.0)) s.scale[j] = 1.0;
    return s;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return (x - mean).cwiseQuotient(scale);
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

// Effect estimates on already-standardized features.

inline double ite_lr1(const Eigen::VectorXd& x, const LogisticModel& model) {
  const Eigen::Index d = x.size();
  if (model.w.size() != d + 1) throw ValidationError("lr1: model expects d+1 weights");
  const double base = model.w.head(d).dot(x) + model.b;
  return sigmoid(base + model.w[d]) - sigmoid(base);
}

inline double ite_lr2(const Eigen::VectorXd& x, const LogisticModel& treated,
                      const LogisticModel& control) {
  return predict_proba(treated, x) - predict_proba(control, x);
}

inline double ite_lrz(const Eigen::VectorXd& x, const LogisticModel& model) {
  return 2.0 * predict_proba(model, x) - 1.0;
}

struct BaselineModel {
  BaselineKind kind = BaselineKind::LR1;
  Standardizer standardizer;
  LogisticModel primary;                // LR1/LRZ model, or LR2 treated-arm model
  std::optional<LogisticModel> control; // LR2 only

  std::size_t dim() const noexcept { return static_cast<std::size_t>(standardizer.mean.size()); }

  double ite(const Eigen::VectorXd& raw_x) const {
    if (static_cast<std::size_t>(raw_x.size()) != dim())
      throw ValidationError("baseline: feature dimension mismatch");
    const Eigen::VectorXd x = standardizer.apply(raw_x);
    switch (kind) {
      case BaselineKind::LR1: return ite_lr1(x, primary);
      case BaselineKind::LR2: return ite_lr2(x, primary, control.value());
      case BaselineKind::LRZ: return ite_lrz(x, primary);
    }
    return 0.0;
  }
};

inline BaselineModel fit_baseline(BaselineKind kind, const Dataset& data,
                                  const LogisticOptions& opt = {}) {
  BaselineModel bm;
  bm.kind = kind;
  bm.standardizer = Standardizer::fit(data.features());
  const Eigen::MatrixXd xs = bm.standardizer.apply(data.features());
  const Eigen::Index n = xs.rows();
  const Eigen::Index d = xs.cols();

  switch (kind) {
    case BaselineKind::LR1: {
      Eigen::MatrixXd design(n, d + 1);
      design.leftCols(d) = xs;
      for (Eigen::Index i = 0; i < n; ++i) design(i, d) = data.t(static_cast<std::size_t>(i));
      bm.primary = fit_logistic(design, data.outcome(), opt);
      break;
    }
    case BaselineKind::LR2: {
      std::vector<Eigen::Index> rows[2];
      for (Eigen::Index i = 0; i < n; ++i) rows[data.t(static_cast<std::size_t>(i))].push_back(i);
      LogisticModel arm[2];
      for (int a = 0; a < 2; ++a) {
        if (rows[a].size() < 2)
          throw FitError(std::string("lr2: the ") + (a ? "treated" : "control") +
                         " arm has fewer than 2 rows");
        Eigen::MatrixXd xa(static_cast<Eigen::Index>(rows[a].size()), d);
        std::vector<int> ya;
        for (std::size_t r = 0; r < rows[a].size(); ++r) {
          xa.row(static_cast<Eigen::Index>(r)) = xs.row(rows[a][r]);
          ya.push_back(data.y(static_cast<std::size_t>(rows[a][r])));
        }
        arm[a] = fit_logistic(xa, ya, opt);
      }
      bm.primary = arm[1];
      bm.control = arm[0];
      break;
    }
    case BaselineKind::LRZ: {
      const auto nt = static_cast<double>(data.treated_count());
      const auto nc = static_cast<double>(data.control_count());
      if (std::abs(nt - nc) > 0.1 * static_cast<double>(n))
        log::warn("lrz: treatment arms are imbalanced (" + std::to_string(data.treated_count()) +
                  " treated vs " + std::to_string(data.control_count()) +
                  " control); the class-variable transform assumes equal arm sizes");
      std::vector<int> z(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = class_variable_transform(data.t(i), data.y(i));
      bm.primary = fit_logistic(xs, z, opt);
      break;
    }
  }
  return bm;
}

}  // namespace ecm
