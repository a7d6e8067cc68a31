#pragma once

// JSON model files. ECM models carry `kind: "ecm"`; baselines carry their
// own kind so one loader handles every method. Doubles are written in
// shortest round-trip form, so save/load is exact.

#include "ecm/baselines.hpp"
#include "ecm/core.hpp"
#include "ecm/ecm.hpp"
#include "ecm/gaussian.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace ecm::io {

using nlohmann::json;

namespace detail {

template <typename Derived>
json vec(const Eigen::MatrixBase<Derived>& v) {
  std::vector<double> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i];
  return out;
}

inline json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose().eval()));
  return rows;
}

inline json real_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double real_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Eigen::MatrixXd to_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) throw ValidationError("ragged matrix in model file");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

inline json logistic_json(const LogisticModel& m) {
  return {{"w", vec(m.w)}, {"b", m.b}, {"l2", m.l2},
          {"iterations", m.iterations}, {"converged", m.converged}};
}

inline LogisticModel logistic_from(const json& j) {
  LogisticModel m;
  m.w = to_vec(j.at("w"));
  m.b = j.at("b").get<double>();
  m.l2 = j.at("l2").get<double>();
  m.iterations = j.value("iterations", std::size_t{0});
  m.converged = j.value("converged", false);
  return m;
}

}  // namespace detail

inline json to_json(const MixtureModel& m) {
  json comps = json::array();
  for (const auto& c : m.components) comps.push_back({{"mu", detail::vec(c.mu)}, {"sigma", detail::mat(c.sigma)}});
  return {{"kind", "ecm"},
          {"pi", detail::vec(m.pi)},
          {"components", comps},
          {"p1_hat", detail::real_or_null(m.p1_hat)},
          {"p0_hat", detail::real_or_null(m.p0_hat)},
          {"meta",
           {{"iters", m.meta.iters},
            {"elbo", detail::real_or_null(m.meta.elbo)},
            {"converged", m.meta.converged},
            {"seed", m.meta.seed},
            {"ite_mode", std::string(to_string(m.meta.ite_mode))}}}};
}

inline MixtureModel mixture_from_json(const json& j) {
  MixtureModel m;
  try {
    const Eigen::VectorXd pi = detail::to_vec(j.at("pi"));
    if (pi.size() != 4) throw ValidationError("model: pi must have 4 entries");
    m.pi = pi;
    const auto& comps = j.at("components");
    if (!comps.is_array() || comps.size() != 4) throw ValidationError("model: expected 4 components");
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      m.components[k].mu = detail::to_vec(comps[k].at("mu"));
      m.components[k].sigma = detail::to_mat(comps[k].at("sigma"));
    }
    m.p1_hat = detail::real_from(j.at("p1_hat"));
    m.p0_hat = detail::real_from(j.at("p0_hat"));
    const auto& meta = j.at("meta");
    m.meta.iters = meta.at("iters").get<std::size_t>();
    m.meta.elbo = detail::real_from(meta.at("elbo"));
    m.meta.converged = meta.at("converged").get<bool>();
    m.meta.seed = meta.at("seed").get<std::uint64_t>();
    m.meta.ite_mode = parse_ite_mode(meta.at("ite_mode").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ECM model: ") + e.what());
  }
  validate_model(m);
  return m;
}

inline json to_json(const BaselineModel& m) {
  json j = {{"kind", std::string(to_string(m.kind))},
            {"standardizer", {{"mean", detail::vec(m.standardizer.mean)},
                              {"scale", detail::vec(m.standardizer.scale)}}}};
  if (m.kind == BaselineKind::LR2) {
    j["treated"] = detail::logistic_json(m.primary);
    j["control"] = detail::logistic_json(m.control.value());
  } else {
    j["model"] = detail::logistic_json(m.primary);
  }
  return j;
}

inline BaselineModel baseline_from_json(const json& j) {
  BaselineModel m;
  try {
    m.kind = parse_baseline_kind(j.at("kind").get<std::string>());
    m.standardizer.mean = detail::to_vec(j.at("standardizer").at("mean"));
    m.standardizer.scale = detail::to_vec(j.at("standardizer").at("scale"));
    if (m.kind == BaselineKind::LR2) {
      m.primary = detail::logistic_from(j.at("treated"));
      m.control = detail::logistic_from(j.at("control"));
    } else {
      m.primary = detail::logistic_from(j.at("model"));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed baseline model: ") + e.what());
  }
  const auto d = m.standardizer.mean.size();
  const auto expected = m.kind == BaselineKind::LR1 ? d + 1 : d;
  if (m.standardizer.scale.size() != d || m.primary.w.size() != expected ||
      (m.control && m.control->w.size() != d))
    throw ValidationError("baseline model: inconsistent dimensions");
  return m;
}

using AnyModel = std::variant<MixtureModel, BaselineModel>;

inline json to_json(const AnyModel& m) {
  return std::visit([](const auto& v) { return to_json(v); }, m);
}

inline AnyModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ValidationError("model file lacks a 'kind' field");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "ecm") return mixture_from_json(j);
  return baseline_from_json(j);
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FitError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw FitError("write failed for '" + path + "'");
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline AnyModel read_model(const std::string& path) { return model_from_json(read_json(path)); }

inline std::size_t model_dim(const AnyModel& m) {
  return std::visit([](const auto& v) { return v.dim(); }, m);
}

}  // namespace ecm::io
