#pragma once

// Multi-trial benchmark: per trial, draw (or resplit) data, fit every method
// on the training part, score PEHE/AUUC on the held-out part, and compare
// each method to ECM with a paired signed-rank test.

#include "ecm/baselines.hpp"
#include "ecm/core.hpp"
#include "ecm/datagen.hpp"
#include "ecm/dataset_io.hpp"
#include "ecm/ecm.hpp"
#include "ecm/metrics.hpp"
#include "ecm/model_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace ecm::bench {

using nlohmann::json;

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"ref", "lr1", "lr2", "lrz", "ecm"};
  return m;
}

struct FileSource {
  std::string path;
  std::string format = "ihdp";  // ihdp | csv
  ThresholdPolicy threshold;
};

struct BenchmarkSpec {
  std::vector<std::string> methods = known_methods();
  std::size_t trials = 20;
  double split = 0.7;
  std::uint64_t base_seed = 0;
  double alpha = 0.05;
  std::variant<SyntheticConfig, FileSource> source = SyntheticConfig::corners();
  EcmConfig ecm;
  double l2 = 1e-4;
  std::string report_path;
  std::string table_path;

  void validate() const {
    if (methods.empty()) throw ValidationError("benchmark: at least one method is required");
    for (const auto& m : methods)
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
        throw ValidationError("benchmark: unknown method '" + m + "'");
    if (trials < 1) throw ValidationError("benchmark: trials must be >= 1");
    if (!(split > 0.0 && split < 1.0)) throw ValidationError("benchmark: split must lie in (0, 1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("benchmark: alpha must lie in (0, 1)");
    if (!(l2 >= 0.0)) throw ValidationError("benchmark: l2 must be >= 0");
    ecm.validate();
    if (const auto* s = std::get_if<SyntheticConfig>(&source)) s->validate();
  }
};

inline json ecm_config_json(const EcmConfig& c) {
  return {{"max_iters", c.max_iters}, {"tol", c.tol}, {"cov_reg", c.cov_reg},
          {"min_pi", c.min_pi}, {"ite_mode", std::string(to_string(c.ite_mode))}, {"seed", c.seed}};
}

inline EcmConfig ecm_config_from_json(const json& j) {
  EcmConfig c;
  if (j.contains("max_iters")) {
    const auto v = j.at("max_iters").get<long long>();
    if (v < 1) throw ValidationError("max_iters must be >= 1");
    c.max_iters = static_cast<std::size_t>(v);
  }
  c.tol = j.value("tol", c.tol);
  c.cov_reg = j.value("cov_reg", c.cov_reg);
  c.min_pi = j.value("min_pi", c.min_pi);
  if (j.contains("ite_mode")) c.ite_mode = parse_ite_mode(j.at("ite_mode").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

inline json to_json(const BenchmarkSpec& s) {
  json j = {{"methods", s.methods}, {"trials", s.trials},   {"split", s.split},
            {"base_seed", s.base_seed}, {"alpha", s.alpha}, {"l2", s.l2},
            {"ecm", ecm_config_json(s.ecm)}};
  if (const auto* cfg = std::get_if<SyntheticConfig>(&s.source)) {
    j["data"] = {{"synthetic", ecm::to_json(*cfg)}};
  } else {
    const auto& f = std::get<FileSource>(s.source);
    j["data"] = {{"path", f.path}, {"format", f.format}, {"threshold", f.threshold.describe()}};
  }
  j["output"] = {{"report", s.report_path}, {"table", s.table_path}};
  return j;
}

// Relative paths are resolved against `base_dir`.
inline BenchmarkSpec spec_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ValidationError("benchmark spec must be a JSON object");
  BenchmarkSpec s;
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? p : (base_dir / path).string();
  };
  try {
    if (j.contains("methods")) s.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("trials")) {
      const auto v = j.at("trials").get<long long>();
      if (v < 1) throw ValidationError("benchmark: trials must be >= 1");
      s.trials = static_cast<std::size_t>(v);
    }
    s.split = j.value("split", s.split);
    s.base_seed = j.value("base_seed", s.base_seed);
    s.alpha = j.value("alpha", s.alpha);
    s.l2 = j.value("l2", s.l2);
    if (j.contains("ecm")) s.ecm = ecm_config_from_json(j.at("ecm"));
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("synthetic")) {
        s.source = synthetic_config_from_json(d.at("synthetic"));
      } else if (d.contains("path")) {
        FileSource f;
        f.path = resolve(d.at("path").get<std::string>());
        f.format = d.value("format", f.format);
        if (f.format != "ihdp" && f.format != "csv")
          throw ValidationError("benchmark: data.format must be ihdp or csv");
        f.threshold = ThresholdPolicy::parse(d.value("threshold", std::string("median")));
        s.source = f;
      } else {
        throw ValidationError("benchmark: data must contain 'synthetic' or 'path'");
      }
    }
    if (j.contains("output")) {
      s.report_path = resolve(j.at("output").value("report", std::string()));
      s.table_path = resolve(j.at("output").value("table", std::string()));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("benchmark spec: ") + e.what());
  }
  s.validate();
  return s;
}

struct Summary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // sample standard deviation
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<std::optional<double>>& values) {
  Summary s;
  double sum = 0.0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++s.n;
    }
  if (s.n == 0) return s;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (const auto& v : values)
    if (v) ss += (*v - s.mean) * (*v - s.mean);
  s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

struct MethodResults {
  std::string name;
  std::vector<std::optional<double>> pehe;
  std::vector<std::optional<double>> auuc;
  std::vector<std::optional<double>> counterfactual_accuracy;  // ECM only
  std::vector<std::string> errors;                             // per trial, empty on success
};

struct Comparison {
  std::string method;
  std::optional<metrics::WilcoxonResult> pehe;
  std::optional<metrics::WilcoxonResult> auuc;
  std::string pehe_error;
  std::string auuc_error;
};

struct BenchmarkReport {
  BenchmarkSpec spec;
  std::vector<std::uint64_t> seeds;
  std::vector<MethodResults> methods;  // canonical display order
  std::vector<Comparison> comparisons; // each method vs ECM
  std::vector<std::string> notes;
  std::vector<double> trial_seconds;
  double total_seconds = 0.0;

  const MethodResults* find(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return &m;
    return nullptr;
  }
  const Comparison* comparison(const std::string& name) const {
    for (const auto& c : comparisons)
      if (c.method == name) return &c;
    return nullptr;
  }
};

// Seeded shuffle; the first round(split * N) rows train, the rest test.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    std::size_t n, double split, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(n)));
  if (n_train < 2 || n_train >= n)
    throw ValidationError("train/test split leaves an empty part (N=" + std::to_string(n) + ")");
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return {train, test};
}

inline Dataset load_source(const FileSource& f) {
  if (f.format == "ihdp") return load_ihdp(f.path, f.threshold);
  return io::read_dataset(f.path);
}

namespace detail {

struct TrialOutput {
  std::optional<double> pehe, auuc, cf_acc;
};

inline TrialOutput score(const Dataset& test, const std::vector<double>& tau_hat) {
  TrialOutput out;
  if (test.has_oracle()) out.pehe = metrics::pehe(test.oracle()->tau, tau_hat);
  out.auuc = metrics::auuc(tau_hat, test.treatment(), test.outcome());
  return out;
}

inline TrialOutput run_method(const std::string& method, const BenchmarkSpec& spec,
                              const Dataset& train, const Dataset& test) {
  std::vector<double> tau(test.size());
  if (method == "ref") {
    if (!test.has_oracle()) throw FitError("ref needs oracle effects in the data");
    tau = test.oracle()->tau;
    return score(test, tau);
  }
  if (method == "ecm") {
    const FitResult r = fit(train, spec.ecm);
    const MixturePosterior post(r.model);
    for (std::size_t i = 0; i < test.size(); ++i) tau[i] = post.ite(test.x(i));
    TrialOutput out = score(test, tau);
    if (test.has_oracle()) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        const Individual ind = test.individual(i);
        const int truth = ind.t == 1 ? test.oracle()->y0[i] : test.oracle()->y1[i];
        hits += post.counterfactual(ind) == truth ? 1u : 0u;
      }
      out.cf_acc = static_cast<double>(hits) / static_cast<double>(test.size());
    }
    return out;
  }
  LogisticOptions opt;
  opt.l2 = spec.l2;
  const BaselineModel bm = fit_baseline(parse_baseline_kind(method), train, opt);
  for (std::size_t i = 0; i < test.size(); ++i) tau[i] = bm.ite(test.x(i));
  return score(test, tau);
}

inline void paired(const MethodResults& a, const MethodResults& b, bool use_pehe,
                   std::vector<double>& va, std::vector<double>& vb) {
  const auto& xa = use_pehe ? a.pehe : a.auuc;
  const auto& xb = use_pehe ? b.pehe : b.auuc;
  for (std::size_t i = 0; i < xa.size(); ++i)
    if (xa[i] && xb[i]) {
      va.push_back(*xa[i]);
      vb.push_back(*xb[i]);
    }
}

}  // namespace detail

inline BenchmarkReport run_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  BenchmarkReport rep;
  rep.spec = spec;
  for (const auto& name : known_methods())
    if (std::find(spec.methods.begin(), spec.methods.end(), name) != spec.methods.end()) {
      MethodResults m;
      m.name = name;
      rep.methods.push_back(std::move(m));
    }

  std::optional<Dataset> file_data;
  if (const auto* f = std::get_if<FileSource>(&spec.source)) file_data.emplace(load_source(*f));

  for (std::size_t trial = 0; trial < spec.trials; ++trial) {
    const auto trial_start = Clock::now();
    const std::uint64_t seed = spec.base_seed + trial;
    rep.seeds.push_back(seed);
    std::optional<Dataset> data;
    std::string data_error;
    try {
      if (const auto* cfg = std::get_if<SyntheticConfig>(&spec.source)) {
        SyntheticConfig c = *cfg;
        c.seed = seed;
        data.emplace(generate(c));
      } else {
        data.emplace(*file_data);
      }
    } catch (const std::exception& e) {
      data_error = e.what();
    }

    std::optional<Dataset> train, test;
    if (data) {
      try {
        auto [tr, te] = train_test_split(data->size(), spec.split, seed);
        train.emplace(data->subset(tr));
        test.emplace(data->subset(te));
      } catch (const std::exception& e) {
        data_error = e.what();
      }
    }

    for (auto& m : rep.methods) {
      detail::TrialOutput out;
      std::string err = data_error;
      if (err.empty()) {
        try {
          out = detail::run_method(m.name, spec, *train, *test);
        } catch (const std::exception& e) {
          err = e.what();
        }
      }
      m.pehe.push_back(out.pehe);
      m.auuc.push_back(out.auuc);
      m.counterfactual_accuracy.push_back(out.cf_acc);
      m.errors.push_back(err);
    }
    rep.trial_seconds.push_back(std::chrono::duration<double>(Clock::now() - trial_start).count());
  }

  if (const MethodResults* ecm_res = rep.find("ecm")) {
    for (const auto& m : rep.methods) {
      if (m.name == "ecm") continue;
      Comparison c;
      c.method = m.name;
      for (bool use_pehe : {true, false}) {
        std::vector<double> a, b;
        detail::paired(*ecm_res, m, use_pehe, a, b);
        try {
          if (a.empty()) throw ValidationError("no paired trials");
          auto w = metrics::wilcoxon_signed_rank(a, b, spec.alpha);
          (use_pehe ? c.pehe : c.auuc) = w;
        } catch (const std::exception& e) {
          (use_pehe ? c.pehe_error : c.auuc_error) = e.what();
        }
      }
      rep.comparisons.push_back(std::move(c));
    }
  }

  if (rep.find("lrz"))
    rep.notes.push_back("LRZ PEHE is computed here although the published comparison leaves it blank; treat it as non-comparable.");
  if (std::holds_alternative<FileSource>(spec.source) && rep.find("ref"))
    rep.notes.push_back("On file data, ref scores the binarized oracle effects y1 - y0 directly, so its PEHE is 0 by construction.");
  if (std::holds_alternative<SyntheticConfig>(spec.source) && rep.find("ref"))
    rep.notes.push_back("On synthetic data the true effect is the generator's P(R|x) - P(A|x), so ref PEHE is 0 by construction.");

  rep.total_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

namespace detail {
inline json opt_real(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}
inline json opt_array(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(opt_real(x));
  return a;
}
inline json summary_json(const Summary& s) {
  return {{"mean", std::isfinite(s.mean) ? json(s.mean) : json(nullptr)},
          {"std", std::isfinite(s.std) ? json(s.std) : json(nullptr)},
          {"n", s.n}};
}
inline json wilcoxon_json(const std::optional<metrics::WilcoxonResult>& w, const std::string& err) {
  if (!w) return {{"error", err}};
  return {{"statistic", w->statistic}, {"p", w->p}, {"significant", w->significant},
          {"n", w->n}, {"exact", w->exact}};
}
}  // namespace detail

// Wall-clock values live under "timing" only.
inline json to_json(const BenchmarkReport& r) {
  json methods = json::object();
  for (const auto& m : r.methods) {
    json mj = {{"pehe", detail::opt_array(m.pehe)},
               {"auuc", detail::opt_array(m.auuc)},
               {"errors", m.errors},
               {"summary", {{"pehe", detail::summary_json(summarize(m.pehe))},
                            {"auuc", detail::summary_json(summarize(m.auuc))}}}};
    if (m.name == "ecm") {
      mj["counterfactual_accuracy"] = detail::opt_array(m.counterfactual_accuracy);
      mj["summary"]["counterfactual_accuracy"] = detail::summary_json(summarize(m.counterfactual_accuracy));
    }
    methods[m.name] = mj;
  }
  json wil = json::object();
  for (const auto& c : r.comparisons)
    wil[c.method] = {{"pehe", detail::wilcoxon_json(c.pehe, c.pehe_error)},
                     {"auuc", detail::wilcoxon_json(c.auuc, c.auuc_error)}};
  json order = json::array();
  for (const auto& m : r.methods) order.push_back(m.name);
  return {{"version", std::string(kVersion)},
          {"spec", to_json(r.spec)},
          {"seeds", r.seeds},
          {"method_order", order},
          {"methods", methods},
          {"wilcoxon_vs_ecm", wil},
          {"notes", r.notes},
          {"timing", {{"total_seconds", r.total_seconds}, {"trial_seconds", r.trial_seconds}}}};
}

// Methods x {PEHE, AUUC} as mean +/- std; '*' marks a significant
// difference from ECM.
inline std::string render_table(const BenchmarkReport& r) {
  auto cell = [](const Summary& s, bool star) {
    if (s.n == 0) return std::string(".");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.3f +/- %.3f%s", s.mean, s.std, star ? " *" : "");
    return std::string(buf);
  };
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-24s %-24s\n", "method", "PEHE", "AUUC");
  os << line;
  for (const auto& m : r.methods) {
    const Comparison* c = r.comparison(m.name);
    const bool sp = c && c->pehe && c->pehe->significant;
    const bool sa = c && c->auuc && c->auuc->significant;
    std::snprintf(line, sizeof line, "%-8s %-24s %-24s\n", m.name.c_str(),
                  cell(summarize(m.pehe), sp).c_str(), cell(summarize(m.auuc), sa).c_str());
    os << line;
  }
  os << "\n" << r.spec.trials << " trials, split " << r.spec.split << ", base seed "
     << r.spec.base_seed << "; * = Wilcoxon signed-rank vs ecm, p < " << r.spec.alpha << "\n";
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  for (const auto& m : r.methods) {
    std::size_t failures = 0;
    for (const auto& e : m.errors) failures += e.empty() ? 0u : 1u;
    if (failures) os << "note: " << m.name << " failed in " << failures << " trial(s): " << [&] {
        for (const auto& e : m.errors) if (!e.empty()) return e;
        return std::string();
      }() << "\n";
  }
  return os.str();
}

}  // namespace ecm::bench
