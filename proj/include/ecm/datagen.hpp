#pragma once

// Synthetic four-population Gaussian data with analytic ground truth, and a
// loader for IHDP-layout semi-synthetic files.

#include "ecm/core.hpp"
#include "ecm/dataset_io.hpp"
#include "ecm/log.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ecm {

// Treatment probability sigmoid(intercept + coef . x); off unless set.
struct Confounding {
  double intercept = 0.0;
  Eigen::VectorXd coef;
};

struct SyntheticConfig {
  std::size_t n = 2000;
  std::size_t d = 2;
  std::array<Eigen::VectorXd, kNumGroups> group_means;
  std::array<Eigen::MatrixXd, kNumGroups> group_covs;
  GroupVector pi_true = GroupVector::Constant(0.25);
  double p_treat = 0.5;
  std::uint64_t seed = 0;
  std::optional<Confounding> confounding;

  // Corner means R=(+a,+a), D=(-a,+a), S=(-a,-a), A=(+a,-a) with covariance
  // sigma^2 I. The default a = 1.5, sigma = 1 puts adjacent corners 3 sigma
  // apart, so the populations overlap.
  static SyntheticConfig corners(double half_side = 1.5, double sigma = 1.0,
                                 std::size_t n = 2000, std::uint64_t seed = 0) {
    SyntheticConfig c;
    c.n = n;
    c.d = 2;
    c.seed = seed;
    const double s[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      c.group_means[k] = Eigen::Vector2d(s[k][0] * half_side, s[k][1] * half_side);
      c.group_covs[k] = sigma * sigma * Eigen::MatrixXd::Identity(2, 2);
    }
    return c;
  }

  // All four populations share one feature distribution.
  static SyntheticConfig identical(std::size_t n = 5000, std::uint64_t seed = 0, std::size_t d = 2) {
    SyntheticConfig c;
    c.n = n;
    c.d = d;
    c.seed = seed;
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      c.group_means[k] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      c.group_covs[k] = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    }
    return c;
  }

  void validate() const {
    if (n < 1) throw ValidationError("synthetic config: n must be >= 1");
    if (d < 1) throw ValidationError("synthetic config: d must be >= 1");
    const auto dd = static_cast<Eigen::Index>(d);
    if (!pi_true.allFinite() || (pi_true.array() < 0.0).any() || std::abs(pi_true.sum() - 1.0) > 1e-9)
      throw ValidationError("synthetic config: pi_true must be non-negative and sum to 1");
    if (!(p_treat > 0.0 && p_treat < 1.0))
      throw ValidationError("synthetic config: p_treat must lie in (0, 1)");
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      const std::string g = std::string("synthetic config: group ") + group_code(group_at(k));
      if (group_means[k].size() != dd || !group_means[k].allFinite())
        throw ValidationError(g + " mean must have d finite entries");
      const auto& s = group_covs[k];
      if (s.rows() != dd || s.cols() != dd || !s.allFinite())
        throw ValidationError(g + " covariance must be a finite d x d matrix");
      if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw ValidationError(g + " covariance must be symmetric");
      if (Eigen::LLT<Eigen::MatrixXd>(s).info() != Eigen::Success)
        throw ValidationError(g + " covariance must be positive definite");
    }
    if (confounding && confounding->coef.size() != dd)
      throw ValidationError("synthetic config: confounding coef must have d entries");
  }
};

// Ground-truth effect P(R | x) - P(A | x) under the generator's mixture.
class SyntheticOracle {
 public:
  explicit SyntheticOracle(const SyntheticConfig& cfg) : pi_(cfg.pi_true) {
    cfg.validate();
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      means_[k] = cfg.group_means[k];
      factors_[k].compute(cfg.group_covs[k]);
      const Eigen::MatrixXd l = factors_[k].matrixL();
      half_log_det_[k] = l.diagonal().array().log().sum();
    }
  }

  GroupVector posterior(const Eigen::VectorXd& x) const {
    GroupVector logw;
    for (std::size_t k = 0; k < kNumGroups; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (pi_[kk] <= 0.0) {
        logw[kk] = -std::numeric_limits<double>::infinity();
        continue;
      }
      // Shared normalizing constants cancel in the ratio.
      const Eigen::VectorXd z = factors_[k].matrixL().solve(x - means_[k]);
      logw[kk] = std::log(pi_[kk]) - half_log_det_[k] - 0.5 * z.squaredNorm();
    }
    const double mx = logw.maxCoeff();
    GroupVector w = (logw.array() - mx).unaryExpr([](double v) { return std::exp(v); });
    return w / w.sum();
  }

  double ite(const Eigen::VectorXd& x) const {
    const GroupVector p = posterior(x);
    return p[0] - p[3];
  }

 private:
  GroupVector pi_;
  std::array<Eigen::VectorXd, kNumGroups> means_;
  std::array<Eigen::LLT<Eigen::MatrixXd>, kNumGroups> factors_;
  std::array<double, kNumGroups> half_log_det_{};
};

inline double oracle_ite(const Eigen::VectorXd& x, const SyntheticConfig& cfg) {
  return SyntheticOracle(cfg).ite(x);
}

// Mixture model carrying the generator's true parameters.
inline MixtureModel oracle_model(const SyntheticConfig& cfg) {
  cfg.validate();
  MixtureModel m;
  m.pi = cfg.pi_true;
  for (std::size_t k = 0; k < kNumGroups; ++k) m.components[k] = {cfg.group_means[k], cfg.group_covs[k]};
  m.p1_hat = cfg.pi_true[0] + cfg.pi_true[2];
  m.p0_hat = cfg.pi_true[2] + cfg.pi_true[3];
  m.meta.seed = cfg.seed;
  return m;
}

inline Dataset generate(const SyntheticConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<Eigen::Index>(cfg.n);
  const auto d = static_cast<Eigen::Index>(cfg.d);
  std::mt19937_64 rng(cfg.seed);
  std::discrete_distribution<int> pick_group(cfg.pi_true.data(), cfg.pi_true.data() + 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::array<Eigen::MatrixXd, kNumGroups> chol;
  for (std::size_t k = 0; k < kNumGroups; ++k) chol[k] = Eigen::LLT<Eigen::MatrixXd>(cfg.group_covs[k]).matrixL();

  const SyntheticOracle truth(cfg);
  Eigen::MatrixXd x(n, d);
  std::vector<int> t(cfg.n), y(cfg.n);
  Oracle oracle;
  oracle.group.reserve(cfg.n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto g = static_cast<std::size_t>(pick_group(rng));
    Eigen::VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = normal(rng);
    const Eigen::VectorXd xi = cfg.group_means[g] + chol[g] * z;
    x.row(i) = xi.transpose();

    double p = cfg.p_treat;
    if (cfg.confounding) {
      const double s = cfg.confounding->intercept + cfg.confounding->coef.dot(xi);
      p = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
    }
    const auto row = static_cast<std::size_t>(i);
    t[row] = unif(rng) < p ? 1 : 0;

    const CausalGroup grp = group_at(g);
    const PotentialOutcomes po = potential_outcomes(grp);
    y[row] = t[row] == 1 ? po.y1 : po.y0;
    oracle.group.push_back(grp);
    oracle.y0.push_back(po.y0);
    oracle.y1.push_back(po.y1);
    oracle.tau.push_back(truth.ite(xi));
  }
  return Dataset(std::move(x), std::move(t), std::move(y), std::move(oracle));
}

// ---------------------------------------------------------------------------
// Config files (JSON). Every field is written explicitly.

inline nlohmann::json to_json(const SyntheticConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["d"] = c.d;
  j["seed"] = c.seed;
  j["p_treat"] = c.p_treat;
  j["pi_true"] = std::vector<double>(c.pi_true.data(), c.pi_true.data() + 4);
  nlohmann::json means = nlohmann::json::array(), covs = nlohmann::json::array();
  for (std::size_t k = 0; k < kNumGroups; ++k) {
    means.push_back(std::vector<double>(c.group_means[k].data(), c.group_means[k].data() + c.group_means[k].size()));
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.group_covs[k].rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(c.group_covs[k].cols()));
      for (Eigen::Index col = 0; col < c.group_covs[k].cols(); ++col) row[static_cast<std::size_t>(col)] = c.group_covs[k](r, col);
      rows.push_back(row);
    }
    covs.push_back(rows);
  }
  j["group_means"] = means;
  j["group_covs"] = covs;
  if (c.confounding) {
    j["confounding"] = {{"intercept", c.confounding->intercept},
                        {"coef", std::vector<double>(c.confounding->coef.data(),
                                                     c.confounding->coef.data() + c.confounding->coef.size())}};
  } else {
    j["confounding"] = nullptr;
  }
  return j;
}

namespace detail {
inline Eigen::VectorXd json_vector(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(what + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError(what + " must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Eigen::VectorXd row = json_vector(j[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) throw ValidationError(what + " rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}
}  // namespace detail

// Missing fields take the corner-layout defaults.
inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("synthetic config must be a JSON object");
  SyntheticConfig c = SyntheticConfig::corners();
  try {
    if (j.contains("n")) {
      const auto v = j.at("n").get<long long>();
      if (v < 1) throw ValidationError("synthetic config: n must be >= 1");
      c.n = static_cast<std::size_t>(v);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("p_treat")) c.p_treat = j.at("p_treat").get<double>();
    if (j.contains("pi_true")) {
      const Eigen::VectorXd p = detail::json_vector(j.at("pi_true"), "pi_true");
      if (p.size() != 4) throw ValidationError("pi_true must have 4 entries");
      c.pi_true = p;
    }
    if (j.contains("group_means")) {
      const auto& m = j.at("group_means");
      if (!m.is_array() || m.size() != 4) throw ValidationError("group_means must list 4 vectors");
      for (std::size_t k = 0; k < 4; ++k) c.group_means[k] = detail::json_vector(m[k], "group_means");
      c.d = static_cast<std::size_t>(c.group_means[0].size());
    }
    if (j.contains("d")) {
      const auto v = j.at("d").get<long long>();
      if (v < 1) throw ValidationError("synthetic config: d must be >= 1");
      c.d = static_cast<std::size_t>(v);
    }
    if (j.contains("sigma") && !j.contains("group_covs")) {
      const double s = j.at("sigma").get<double>();
      for (auto& cov : c.group_covs)
        cov = s * s * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(c.d), static_cast<Eigen::Index>(c.d));
    }
    if (j.contains("group_covs")) {
      const auto& m = j.at("group_covs");
      if (!m.is_array() || m.size() != 4) throw ValidationError("group_covs must list 4 matrices");
      for (std::size_t k = 0; k < 4; ++k) c.group_covs[k] = detail::json_matrix(m[k], "group_covs");
    }
    if (j.contains("confounding") && !j.at("confounding").is_null()) {
      Confounding conf;
      conf.intercept = j.at("confounding").value("intercept", 0.0);
      conf.coef = detail::json_vector(j.at("confounding").at("coef"), "confounding.coef");
      c.confounding = conf;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

inline SyntheticConfig read_synthetic_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return synthetic_config_from_json(j);
}

// ---------------------------------------------------------------------------
// IHDP-layout files: t, y_factual, y_cfactual, mu0, mu1, x1..xd. A header row
// is optional; without one the columns are taken positionally.

struct ThresholdPolicy {
  enum class Kind { Median, Fixed } kind = Kind::Median;
  double value = 0.0;  // used by Fixed

  static ThresholdPolicy median() { return {}; }
  static ThresholdPolicy fixed(double v) { return {Kind::Fixed, v}; }

  std::string describe() const {
    return kind == Kind::Median ? std::string("median") : "fixed:" + io::format_real(value);
  }
  static ThresholdPolicy parse(const std::string& s) {
    if (s == "median") return median();
    if (s.rfind("fixed:", 0) == 0) {
      double v = 0.0;
      if (!io::try_parse_real(s.substr(6), v) || !std::isfinite(v))
        throw ValidationError("bad fixed threshold '" + s + "'");
      return fixed(v);
    }
    throw ValidationError("unknown threshold policy '" + s + "' (expected median|fixed:<value>)");
  }
};

struct SemiSyntheticRecord {
  Eigen::VectorXd x;
  int t = 0;
  double y_factual = 0.0;
  double y_cfactual = 0.0;
  int y0 = 0;
  int y1 = 0;
};

struct IhdpData {
  std::vector<SemiSyntheticRecord> records;
  double threshold = 0.0;
  Dataset dataset;
};

inline IhdpData load_ihdp_records(std::istream& in, const ThresholdPolicy& policy = {}) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    rows.push_back(io::split_csv_line(line));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ValidationError("IHDP file is empty");

  double probe = 0.0;
  const bool has_header = !io::try_parse_real(rows[0][0], probe);
  std::size_t ct = 0, cyf = 1, cycf = 2;
  std::vector<std::size_t> xcols;
  std::size_t width = rows[0].size();
  if (has_header) {
    const auto& h = rows[0];
    auto find = [&](const std::string& name) -> std::optional<std::size_t> {
      for (std::size_t c = 0; c < h.size(); ++c)
        if (h[c] == name) return c;
      return std::nullopt;
    };
    for (const char* req : {"t", "y_factual", "y_cfactual", "mu0", "mu1"})
      if (!find(req)) throw ValidationError(std::string("line 1: missing column '") + req + "'");
    ct = *find("t");
    cyf = *find("y_factual");
    cycf = *find("y_cfactual");
    for (std::size_t j = 1;; ++j) {
      const auto c = find("x" + std::to_string(j));
      if (!c) break;
      xcols.push_back(*c);
    }
    if (xcols.empty()) throw ValidationError("line 1: missing covariate columns x1..xd");
  } else {
    if (width < 6) throw ValidationError("line 1: expected at least 6 columns (t, y_factual, y_cfactual, mu0, mu1, x1..)");
    for (std::size_t c = 5; c < width; ++c) xcols.push_back(c);
  }

  IhdpData out{{}, 0.0, Dataset(Eigen::MatrixXd::Zero(1, 1), {0}, {0})};
  std::vector<double> factual;
  for (std::size_t r = has_header ? 1 : 0; r < rows.size(); ++r) {
    const auto& f = rows[r];
    const std::size_t ln = line_numbers[r];
    if (f.size() != width)
      throw ValidationError("line " + std::to_string(ln) + ": expected " + std::to_string(width) +
                            " fields, got " + std::to_string(f.size()));
    SemiSyntheticRecord rec;
    double tv = io::parse_real(f[ct], ln, "t");
    if (tv != 0.0 && tv != 1.0)
      throw ValidationError("line " + std::to_string(ln) + ": t must be 0 or 1");
    rec.t = static_cast<int>(tv);
    rec.y_factual = io::parse_real(f[cyf], ln, "y_factual");
    rec.y_cfactual = io::parse_real(f[cycf], ln, "y_cfactual");
    rec.x.resize(static_cast<Eigen::Index>(xcols.size()));
    for (std::size_t j = 0; j < xcols.size(); ++j)
      rec.x[static_cast<Eigen::Index>(j)] = io::parse_real(f[xcols[j]], ln, "x" + std::to_string(j + 1));
    factual.push_back(rec.y_factual);
    out.records.push_back(std::move(rec));
  }
  if (out.records.empty()) throw ValidationError("IHDP file has no data rows");

  if (policy.kind == ThresholdPolicy::Kind::Median) {
    std::vector<double> s = factual;
    std::sort(s.begin(), s.end());
    const std::size_t m = s.size();
    out.threshold = m % 2 ? s[m / 2] : 0.5 * (s[m / 2 - 1] + s[m / 2]);
  } else {
    out.threshold = policy.value;
  }

  const std::size_t n = out.records.size();
  const std::size_t d = xcols.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<int> t(n), y(n);
  Oracle o;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = out.records[i];
    const int yf = rec.y_factual > out.threshold ? 1 : 0;
    const int ycf = rec.y_cfactual > out.threshold ? 1 : 0;
    rec.y1 = rec.t == 1 ? yf : ycf;
    rec.y0 = rec.t == 1 ? ycf : yf;
    x.row(static_cast<Eigen::Index>(i)) = rec.x.transpose();
    t[i] = rec.t;
    y[i] = yf;
    positives += static_cast<std::size_t>(yf);
    o.group.push_back(group_from_outcomes(rec.y0, rec.y1));
    o.y0.push_back(rec.y0);
    o.y1.push_back(rec.y1);
    o.tau.push_back(static_cast<double>(rec.y1 - rec.y0));
  }
  if (positives == 0 || positives == n)
    log::warn("IHDP binarization with threshold " + io::format_real(out.threshold) +
              " (" + policy.describe() + ") yields a single outcome class");
  out.dataset = Dataset(std::move(x), std::move(t), std::move(y), std::move(o));
  return out;
}

inline Dataset load_ihdp(const std::string& path, const ThresholdPolicy& policy = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open IHDP file '" + path + "'");
  return load_ihdp_records(in, policy).dataset;
}

}  // namespace ecm
