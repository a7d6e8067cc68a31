#pragma once

// Test-only helpers: independent oracles and fixtures.

#include "ecm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace ecm::testing {

inline constexpr double kPi = 3.14159265358979323846;

// Scalar normal log-density written out directly.
inline double scalar_normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * kPi * var) - (x - mean) * (x - mean) / (2.0 * var);
}

// Multivariate normal log-density through an explicit inverse and
// determinant (no Cholesky), as a second route to the library's value.
inline double mvn_logpdf_direct(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& sigma) {
  const double d = static_cast<double>(x.size());
  const Eigen::VectorXd r = x - mu;
  const double quad = r.dot(sigma.inverse() * r);
  return -0.5 * (d * std::log(2.0 * kPi) + std::log(sigma.determinant()) + quad);
}

inline GroupVector uniform_admissible(int t, int y) {
  GroupVector u = GroupVector::Zero();
  const auto [a, b] = admissible_groups(t, y);
  u[static_cast<Eigen::Index>(index(a))] = 0.5;
  u[static_cast<Eigen::Index>(index(b))] = 0.5;
  return u;
}

// AUUC straight from the definition: the top-k set is every row whose
// (score, -index) pair beats at least N-k others, recounted for each k.
inline double brute_force_auuc(const std::vector<double>& s, const std::vector<int>& t,
                               const std::vector<int>& y) {
  const std::size_t n = s.size();
  double total = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    double nt = 0, nc = 0, rt = 0, rc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t ahead = 0;  // rows ranked before i
      for (std::size_t j = 0; j < n; ++j)
        if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++ahead;
      if (ahead >= k) continue;
      if (t[i]) {
        nt += 1;
        rt += y[i];
      } else {
        nc += 1;
        rc += y[i];
      }
    }
    total += (rt / (nt > 0 ? nt : 1.0) - rc / (nc > 0 ? nc : 1.0)) * static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

// Two-sided signed-rank p-value by walking all 2^n sign assignments.
inline double brute_force_wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs)
    if (d != 0.0) nz.push_back(d);
  const std::size_t n = nz.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(nz[j]) < std::abs(nz[i])) below += 1;
      if (std::abs(nz[j]) == std::abs(nz[i])) equal += 1;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) observed += rank[i];
  double le = 0, ge = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += rank[i];
    if (w <= observed + 1e-9) le += 1;
    if (w >= observed - 1e-9) ge += 1;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(total));
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("ecm_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Writes an IHDP-layout file (t, y_factual, y_cfactual, mu0, mu1, x1..x25):
// 6 continuous and 19 binary covariates, 139 treated rows out of 747, and a
// linear response surface with a constant treatment shift plus noise.
inline void write_ihdp_fixture(const std::string& path, std::size_t n = 747, std::uint64_t seed = 3,
                               bool header = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.4);
  std::ofstream out(path);
  if (header) {
    out << "t,y_factual,y_cfactual,mu0,mu1";
    for (int j = 1; j <= 25; ++j) out << ",x" << j;
    out << '\n';
  }
  const std::size_t treated = n * 139 / 747;
  for (std::size_t i = 0; i < n; ++i) {
    double x[25];
    for (int j = 0; j < 6; ++j) x[j] = normal(rng);
    for (int j = 6; j < 25; ++j) x[j] = coin(rng) ? 1.0 : 0.0;
    double mu0 = 0.0;
    for (int j = 0; j < 25; ++j) mu0 += (j % 3 == 0 ? 0.6 : -0.3) * x[j];
    const double mu1 = mu0 + 1.0 + 0.8 * x[0];
    const int t = i < treated ? 1 : 0;
    const double y0 = mu0 + normal(rng);
    const double y1 = mu1 + normal(rng);
    char buf[64];
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf;
    };
    out << t << ',';
    put(t ? y1 : y0);
    out << ',';
    put(t ? y0 : y1);
    out << ',';
    put(mu0);
    out << ',';
    put(mu1);
    for (double v : x) {
      out << ',';
      put(v);
    }
    out << '\n';
  }
}

}  // namespace ecm::testing
