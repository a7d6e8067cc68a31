#pragma once

// Evaluation metrics: PEHE, the uplift curve and its area, and the paired
// Wilcoxon signed-rank test used to compare methods across trials.

#include "ecm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace ecm::metrics {

// Root-mean-squared difference between true and estimated effects.
inline double pehe(std::span<const double> tau_true, std::span<const double> tau_hat) {
  if (tau_true.size() != tau_hat.size())
    throw ValidationError("pehe: vectors have different lengths");
  if (tau_true.empty()) throw ValidationError("pehe: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < tau_true.size(); ++i) {
    const double e = tau_true[i] - tau_hat[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(tau_true.size()));
}

struct UpliftPoint {
  double fraction;
  double uplift;
};

struct UpliftCurve {
  std::vector<UpliftPoint> points;
  double auuc = 0.0;
};

// Individuals sorted by descending score (ties by original index). For every
// prefix of size k the uplift is (treated positive rate - control positive
// rate) * k; AUUC is the mean of those values over k = 1..N.
inline UpliftCurve uplift_curve(std::span<const double> scores, std::span<const int> t,
                                std::span<const int> y) {
  const std::size_t n = scores.size();
  if (t.size() != n || y.size() != n) throw ValidationError("uplift_curve: length mismatch");
  if (n == 0) throw ValidationError("uplift_curve: empty input");
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_binary(t[i]) || !is_binary(y[i]))
      throw ValidationError("uplift_curve: t and y must be 0 or 1");
    if (std::isnan(scores[i])) throw ValidationError("uplift_curve: NaN score");
    treated += static_cast<std::size_t>(t[i]);
  }
  if (treated == 0 || treated == n)
    throw ValidationError("uplift_curve: both treated and control rows are required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  UpliftCurve curve;
  curve.points.reserve(n);
  double n_t = 0, n_c = 0, r_t = 0, r_c = 0, area = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const std::size_t i = order[k - 1];
    if (t[i] == 1) {
      n_t += 1;
      r_t += y[i];
    } else {
      n_c += 1;
      r_c += y[i];
    }
    const double u = (r_t / std::max(1.0, n_t) - r_c / std::max(1.0, n_c)) * static_cast<double>(k);
    curve.points.push_back({static_cast<double>(k) / static_cast<double>(n), u});
    area += u;
  }
  curve.auuc = area / static_cast<double>(n);
  return curve;
}

inline double auuc(std::span<const double> scores, std::span<const int> t, std::span<const int> y) {
  return uplift_curve(scores, t, y).auuc;
}

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p = 1.0;
  bool significant = false;
  std::size_t n = 0;       // non-zero differences
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactMax = 12;

namespace detail {

// Average ranks of |d| (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& absd) {
  const std::size_t n = absd.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return absd[a] < absd[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && absd[order[j + 1]] == absd[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Two-sided exact p-value: distribution of W+ under random signs, built by
// dynamic programming over doubled (integer) ranks.
inline double exact_p(const std::vector<double>& ranks, double w_plus) {
  std::vector<std::int64_t> r2;
  std::int64_t total = 0;
  for (double r : ranks) {
    r2.push_back(std::llround(2.0 * r));
    total += r2.back();
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  std::int64_t reach = 0;
  for (auto r : r2) {
    for (std::int64_t s = reach; s >= 0; --s)
      count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
    reach += r;
  }
  const std::int64_t w2 = std::llround(2.0 * w_plus);
  double le = 0.0, ge = 0.0, all = 0.0;
  for (std::int64_t s = 0; s <= total; ++s) {
    const double c = count[static_cast<std::size_t>(s)];
    all += c;
    if (s <= w2) le += c;
    if (s >= w2) ge += c;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / all);
}

inline double normal_p(const std::vector<double>& ranks, const std::vector<double>& absd, double w_plus) {
  const double n = static_cast<double>(ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = absd;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double tie = static_cast<double>(j - i + 1);
    var -= (tie * tie * tie - tie) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
  const double p = std::erfc(z / std::sqrt(2.0));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

}  // namespace detail

// Two-sided paired signed-rank test on a - b. Exact null distribution for up
// to 12 non-zero differences, normal approximation with tie and continuity
// corrections above that.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                           double alpha = 0.05) {
  if (a.size() != b.size()) throw ValidationError("wilcoxon: vectors have different lengths");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (std::isnan(d)) throw ValidationError("wilcoxon: NaN difference");
    if (d != 0.0) diff.push_back(d);
  }
  WilcoxonResult r;
  r.n = diff.size();
  if (diff.empty()) return r;
  if (diff.size() < 5)
    throw ValidationError("wilcoxon: need at least 5 non-zero differences, got " +
                          std::to_string(diff.size()));

  std::vector<double> absd(diff.size());
  std::transform(diff.begin(), diff.end(), absd.begin(), [](double d) { return std::abs(d); });
  const std::vector<double> ranks = detail::average_ranks(absd);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? w_plus : w_minus) += ranks[i];

  r.statistic = std::min(w_plus, w_minus);
  r.exact = diff.size() <= kWilcoxonExactMax;
  r.p = r.exact ? detail::exact_p(ranks, w_plus) : detail::normal_p(ranks, absd, w_plus);
  r.significant = r.p < alpha;
  return r;
}

}  // namespace ecm::metrics
