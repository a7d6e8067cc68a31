#pragma once

// Domain types shared by every part of the library: the four causal
// populations, the factual/potential-outcome bookkeeping, and the validated
// dataset container.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ecm {

inline constexpr std::string_view kVersion = "1.0.0";

// Invalid input: bad files, bad configs, dimension mismatches.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical or runtime failure during fitting/evaluation.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CausalGroup : std::uint8_t {
  Responder = 0,
  Doomed = 1,
  Survivor = 2,
  AntiResponder = 3,
};

inline constexpr std::size_t kNumGroups = 4;

inline constexpr std::array<CausalGroup, kNumGroups> kAllGroups = {
    CausalGroup::Responder, CausalGroup::Doomed, CausalGroup::Survivor,
    CausalGroup::AntiResponder};

constexpr std::size_t index(CausalGroup g) noexcept {
  return static_cast<std::size_t>(g);
}

constexpr CausalGroup group_at(std::size_t k) {
  if (k >= kNumGroups) throw std::out_of_range("causal group index");
  return static_cast<CausalGroup>(k);
}

constexpr char group_code(CausalGroup g) noexcept {
  switch (g) {
    case CausalGroup::Responder: return 'R';
    case CausalGroup::Doomed: return 'D';
    case CausalGroup::Survivor: return 'S';
    case CausalGroup::AntiResponder: return 'A';
  }
  return '?';
}

inline CausalGroup parse_group(std::string_view s) {
  if (s == "R") return CausalGroup::Responder;
  if (s == "D") return CausalGroup::Doomed;
  if (s == "S") return CausalGroup::Survivor;
  if (s == "A") return CausalGroup::AntiResponder;
  throw ValidationError("unknown causal group '" + std::string(s) +
                        "' (expected R|D|S|A)");
}

struct PotentialOutcomes {
  int y1;  // outcome under treatment
  int y0;  // outcome without treatment
  friend constexpr bool operator==(PotentialOutcomes, PotentialOutcomes) = default;
};

constexpr PotentialOutcomes potential_outcomes(CausalGroup g) noexcept {
  switch (g) {
    case CausalGroup::Responder: return {1, 0};
    case CausalGroup::Doomed: return {0, 0};
    case CausalGroup::Survivor: return {1, 1};
    case CausalGroup::AntiResponder: return {0, 1};
  }
  return {0, 0};
}

constexpr CausalGroup group_from_outcomes(int y0, int y1) noexcept {
  if (y1 == 1) return y0 == 1 ? CausalGroup::Survivor : CausalGroup::Responder;
  return y0 == 1 ? CausalGroup::AntiResponder : CausalGroup::Doomed;
}

constexpr bool is_binary(int v) noexcept { return v == 0 || v == 1; }

// The two populations compatible with an observed (treatment, outcome) pair,
// in canonical order. The other two are ruled out by causality.
constexpr std::pair<CausalGroup, CausalGroup> admissible_groups(int t, int y) noexcept {
  if (t == 0) {
    return y == 0 ? std::pair{CausalGroup::Responder, CausalGroup::Doomed}
                  : std::pair{CausalGroup::Survivor, CausalGroup::AntiResponder};
  }
  return y == 0 ? std::pair{CausalGroup::Doomed, CausalGroup::AntiResponder}
                : std::pair{CausalGroup::Responder, CausalGroup::Survivor};
}

constexpr bool is_admissible(CausalGroup g, int t, int y) noexcept {
  const auto [a, b] = admissible_groups(t, y);
  return g == a || g == b;
}

struct Individual {
  Eigen::VectorXd x;
  int t = 0;
  int y = 0;
};

// Ground truth carried by synthetic and semi-synthetic data.
struct Oracle {
  std::vector<CausalGroup> group;
  std::vector<int> y0;
  std::vector<int> y1;
  std::vector<double> tau;
};

// Row-major observational data: features, treatment and factual outcome per
// individual, plus optional ground truth. Validated on construction and
// immutable afterwards.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd features, std::vector<int> treatment,
          std::vector<int> outcome, std::optional<Oracle> oracle = std::nullopt)
      : x_(std::move(features)),
        t_(std::move(treatment)),
        y_(std::move(outcome)),
        oracle_(std::move(oracle)) {
    validate();
  }

  std::size_t size() const noexcept { return t_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  const Eigen::MatrixXd& features() const noexcept { return x_; }
  const std::vector<int>& treatment() const noexcept { return t_; }
  const std::vector<int>& outcome() const noexcept { return y_; }
  const std::optional<Oracle>& oracle() const noexcept { return oracle_; }
  bool has_oracle() const noexcept { return oracle_.has_value(); }

  Eigen::VectorXd x(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)).transpose(); }
  int t(std::size_t i) const { return t_[i]; }
  int y(std::size_t i) const { return y_[i]; }
  Individual individual(std::size_t i) const { return {x(i), t_[i], y_[i]}; }

  std::size_t treated_count() const noexcept {
    std::size_t n = 0;
    for (int v : t_) n += static_cast<std::size_t>(v);
    return n;
  }
  std::size_t control_count() const noexcept { return size() - treated_count(); }

  // Rows in the given order (duplicates allowed).
  Dataset subset(const std::vector<std::size_t>& rows) const {
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x_.cols());
    std::vector<int> ts, ys;
    ts.reserve(rows.size());
    ys.reserve(rows.size());
    std::optional<Oracle> os;
    if (oracle_) os.emplace();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t i = rows[r];
      if (i >= size()) throw std::out_of_range("dataset row index");
      xs.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(i));
      ts.push_back(t_[i]);
      ys.push_back(y_[i]);
      if (os) {
        os->group.push_back(oracle_->group[i]);
        os->y0.push_back(oracle_->y0[i]);
        os->y1.push_back(oracle_->y1[i]);
        os->tau.push_back(oracle_->tau[i]);
      }
    }
    return Dataset(std::move(xs), std::move(ts), std::move(ys), std::move(os));
  }

 private:
  void validate() const {
    const std::size_t n = t_.size();
    if (n == 0) throw ValidationError("dataset must contain at least one row");
    if (x_.cols() == 0) throw ValidationError("dataset must have at least one feature");
    if (static_cast<std::size_t>(x_.rows()) != n || y_.size() != n)
      throw ValidationError("dataset columns have inconsistent lengths");
    if (!x_.allFinite()) throw ValidationError("dataset features must be finite");
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_binary(t_[i]) || !is_binary(y_[i]))
        throw ValidationError("row " + std::to_string(i) + ": t and y must be 0 or 1");
    }
    if (!oracle_) return;
    const Oracle& o = *oracle_;
    if (o.group.size() != n || o.y0.size() != n || o.y1.size() != n || o.tau.size() != n)
      throw ValidationError("oracle columns have inconsistent lengths");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string where = "row " + std::to_string(i) + ": ";
      if (!is_binary(o.y0[i]) || !is_binary(o.y1[i]))
        throw ValidationError(where + "oracle y0/y1 must be 0 or 1");
      if (potential_outcomes(o.group[i]) != PotentialOutcomes{o.y1[i], o.y0[i]})
        throw ValidationError(where + "oracle group inconsistent with (y0, y1)");
      if (y_[i] != (t_[i] == 1 ? o.y1[i] : o.y0[i]))
        throw ValidationError(where + "factual outcome inconsistent with oracle");
      if (!(o.tau[i] >= -1.0 && o.tau[i] <= 1.0))
        throw ValidationError(where + "oracle tau must lie in [-1, 1]");
    }
  }

  Eigen::MatrixXd x_;
  std::vector<int> t_;
  std::vector<int> y_;
  std::optional<Oracle> oracle_;
};

// Latent distribution over the four populations, one row per individual,
// columns in canonical R, D, S, A order.
using Responsibilities = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;
using GroupVector = Eigen::Matrix<double, 4, 1>;

struct GaussianComponent {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

enum class IteMode { ModelConsistent, LiteralEq1 };

inline std::string_view to_string(IteMode m) noexcept {
  return m == IteMode::ModelConsistent ? "model_consistent" : "literal_eq1";
}

inline IteMode parse_ite_mode(std::string_view s) {
  if (s == "model_consistent") return IteMode::ModelConsistent;
  if (s == "literal_eq1") return IteMode::LiteralEq1;
  throw ValidationError("unknown ITE mode '" + std::string(s) +
                        "' (expected model_consistent|literal_eq1)");
}

struct FitMeta {
  std::size_t iters = 0;
  double elbo = 0.0;
  bool converged = false;
  std::uint64_t seed = 0;
  IteMode ite_mode = IteMode::ModelConsistent;
};

struct MixtureModel {
  GroupVector pi = GroupVector::Constant(0.25);
  std::array<GaussianComponent, kNumGroups> components;
  double p1_hat = 0.0;  // NaN when no treated rows were seen
  double p0_hat = 0.0;  // NaN when no control rows were seen
  FitMeta meta;

  std::size_t dim() const noexcept {
    return static_cast<std::size_t>(components[0].mu.size());
  }
};

}  // namespace ecm
