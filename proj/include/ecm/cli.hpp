#pragma once

// Command-line front end: generate, fit, evaluate, predict, benchmark.
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include "ecm/baselines.hpp"
#include "ecm/benchmark.hpp"
#include "ecm/core.hpp"
#include "ecm/datagen.hpp"
#include "ecm/dataset_io.hpp"
#include "ecm/ecm.hpp"
#include "ecm/log.hpp"
#include "ecm/metrics.hpp"
#include "ecm/model_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ecm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  bool json_logs = false;
};

struct DataOptions {
  std::string path;
  std::string format = "csv";
  std::string threshold = "median";

  Dataset load() const {
    if (format == "ihdp") return load_ihdp(path, ThresholdPolicy::parse(threshold));
    if (format == "csv") return io::read_dataset(path);
    throw ValidationError("unknown data format '" + format + "' (expected csv|ihdp)");
  }
};

namespace detail {

inline void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "Dataset file")->required();
  cmd->add_option("--format", d.format, "Dataset layout: csv (x1..xd,t,y[,group,y0,y1,tau]) or ihdp")
      ->check(CLI::IsMember({"csv", "ihdp"}));
  cmd->add_option("--threshold", d.threshold, "IHDP outcome binarization: median or fixed:<value>");
}

inline nlohmann::json data_provenance(const DataOptions& d) {
  nlohmann::json j = {{"path", d.path}, {"format", d.format}};
  if (d.format == "ihdp") j["threshold"] = d.threshold;
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FitError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FitError("write failed for '" + path + "'");
}

inline std::vector<double> predict_ite(const io::AnyModel& model, const Dataset& data) {
  std::vector<double> tau(data.size());
  if (const auto* m = std::get_if<MixtureModel>(&model)) {
    const MixturePosterior post(*m);
    for (std::size_t i = 0; i < data.size(); ++i) tau[i] = post.ite(data.x(i));
  } else {
    const auto& b = std::get<BaselineModel>(model);
    for (std::size_t i = 0; i < data.size(); ++i) tau[i] = b.ite(data.x(i));
  }
  return tau;
}

inline void check_dims(const io::AnyModel& model, const Dataset& data) {
  if (io::model_dim(model) != data.dim())
    throw ValidationError("model dimension " + std::to_string(io::model_dim(model)) +
                          " does not match data dimension " + std::to_string(data.dim()));
}

}  // namespace detail

inline int cmd_generate(const GlobalOptions& g, const std::string& config_path, const std::string& out_path) {
  SyntheticConfig cfg = config_path.empty() ? SyntheticConfig::corners()
                                            : read_synthetic_config(config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  const Dataset data = generate(cfg);
  io::write_dataset(out_path, data);
  const nlohmann::json meta = {{"version", std::string(kVersion)},
                               {"generator", "synthetic"},
                               {"rows", data.size()},
                               {"seed", cfg.seed},
                               {"config", to_json(cfg)}};
  io::write_json(out_path + ".meta.json", meta);
  log::info("wrote " + std::to_string(data.size()) + " rows to " + out_path);
  return kExitOk;
}

struct FitOptions {
  DataOptions data;
  std::string method = "ecm";
  std::string out;
  std::string trace;
  EcmConfig ecm;
  std::string ite_mode = "model_consistent";
  double l2 = 1e-4;
};

inline int cmd_fit(const GlobalOptions& g, FitOptions o) {
  if (o.method != "ecm" && o.method != "lr1" && o.method != "lr2" && o.method != "lrz")
    throw ValidationError("unknown method '" + o.method + "' (expected ecm|lr1|lr2|lrz)");
  const Dataset data = o.data.load();
  nlohmann::json provenance = {{"version", std::string(kVersion)}, {"data", detail::data_provenance(o.data)}};

  if (o.method == "ecm") {
    o.ecm.ite_mode = parse_ite_mode(o.ite_mode);
    if (g.seed) o.ecm.seed = *g.seed;
    o.ecm.validate();
    const FitResult r = fit(data, o.ecm);
    for (const auto& f : r.trace.flags) log::warn(f);
    nlohmann::json j = io::to_json(r.model);
    provenance["config"] = bench::ecm_config_json(o.ecm);
    j["provenance"] = provenance;
    io::write_json(o.out, j);

    const std::string trace_path = o.trace.empty() ? o.out + ".trace.csv" : o.trace;
    std::ostringstream csv;
    csv << "iteration,elbo,loglik\n";
    for (std::size_t i = 0; i < r.trace.iterations(); ++i)
      csv << (i + 1) << ',' << io::format_real(r.trace.elbo[i]) << ',' << io::format_real(r.trace.loglik[i]) << '\n';
    detail::write_text(trace_path, csv.str());
    log::info("ecm: " + std::to_string(r.model.meta.iters) + " iterations, elbo " +
              io::format_real(r.model.meta.elbo) + (r.model.meta.converged ? ", converged" : ", not converged"));
    return kExitOk;
  }

  LogisticOptions lo;
  lo.l2 = o.l2;
  const BaselineModel bm = fit_baseline(parse_baseline_kind(o.method), data, lo);
  for (const LogisticModel* m : {&bm.primary, bm.control ? &*bm.control : nullptr})
    if (m && !m->converged) log::warn(o.method + ": logistic fit did not converge");
  nlohmann::json j = io::to_json(bm);
  provenance["config"] = {{"l2", o.l2}};
  j["provenance"] = provenance;
  io::write_json(o.out, j);
  log::info(o.method + ": model written to " + o.out);
  return kExitOk;
}

inline int cmd_evaluate(const DataOptions& d, const std::string& model_path,
                        const std::string& report_path, std::string curve_path) {
  const Dataset data = d.load();
  const io::AnyModel model = io::read_model(model_path);
  detail::check_dims(model, data);
  const std::vector<double> tau = detail::predict_ite(model, data);

  nlohmann::json rep = {{"version", std::string(kVersion)},
                        {"data", detail::data_provenance(d)},
                        {"model", model_path},
                        {"kind", io::to_json(model).at("kind")},
                        {"n", data.size()}};
  if (data.has_oracle()) rep["pehe"] = metrics::pehe(data.oracle()->tau, tau);

  const metrics::UpliftCurve curve = metrics::uplift_curve(tau, data.treatment(), data.outcome());
  rep["auuc"] = curve.auuc;
  if (curve_path.empty()) curve_path = report_path + ".curve.csv";
  std::ostringstream csv;
  csv << "fraction,uplift\n";
  for (const auto& p : curve.points) csv << io::format_real(p.fraction) << ',' << io::format_real(p.uplift) << '\n';
  detail::write_text(curve_path, csv.str());
  rep["curve"] = curve_path;

  if (const auto* m = std::get_if<MixtureModel>(&model); m && data.has_oracle()) {
    const MixturePosterior post(*m);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Individual ind = data.individual(i);
      const int truth = ind.t == 1 ? data.oracle()->y0[i] : data.oracle()->y1[i];
      hits += post.counterfactual(ind) == truth ? 1u : 0u;
    }
    rep["counterfactual_accuracy"] = static_cast<double>(hits) / static_cast<double>(data.size());
  }
  io::write_json(report_path, rep);
  log::info("evaluation written to " + report_path);
  return kExitOk;
}

inline int cmd_predict(const DataOptions& d, const std::string& model_path, const std::string& out_path) {
  const Dataset data = d.load();
  const io::AnyModel model = io::read_model(model_path);
  detail::check_dims(model, data);
  const std::vector<double> tau = detail::predict_ite(model, data);
  const auto* mix = std::get_if<MixtureModel>(&model);
  std::optional<MixturePosterior> post;
  if (mix) post.emplace(*mix);

  std::ostringstream csv;
  csv << "row,ite" << (mix ? ",counterfactual,group" : "") << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv << i << ',' << io::format_real(tau[i]);
    if (post) {
      const Individual ind = data.individual(i);
      csv << ',' << post->counterfactual(ind) << ',' << group_code(post->likely_group(ind));
    }
    csv << '\n';
  }
  detail::write_text(out_path, csv.str());
  log::info("predictions written to " + out_path);
  return kExitOk;
}

inline int cmd_benchmark(const GlobalOptions& g, const std::string& spec_path, const std::string& report_override,
                         const std::string& table_override, std::optional<std::size_t> trials) {
  const nlohmann::json j = io::read_json(spec_path);
  bench::BenchmarkSpec spec = bench::spec_from_json(j, std::filesystem::path(spec_path).parent_path());
  if (g.seed) spec.base_seed = *g.seed;
  if (trials) spec.trials = *trials;
  if (!report_override.empty()) spec.report_path = report_override;
  if (!table_override.empty()) spec.table_path = table_override;
  if (spec.report_path.empty()) spec.report_path = "benchmark_report.json";
  spec.validate();

  const bench::BenchmarkReport rep = bench::run_benchmark(spec);
  bool any_success = false;
  for (const auto& m : rep.methods) {
    bool ok = false;
    for (const auto& e : m.errors) ok = ok || e.empty();
    if (!ok) log::warn(m.name + ": every trial failed (" + m.errors.front() + ")");
    any_success = any_success || ok;
  }
  io::write_json(spec.report_path, bench::to_json(rep));
  const std::string table = bench::render_table(rep);
  if (!spec.table_path.empty()) detail::write_text(spec.table_path, table);
  log::info(table);
  return any_success ? kExitOk : kExitRuntime;
}

// Runs the CLI on `args` (args[0] is the program name). Log lines go to
// `sink`, filtered and formatted according to --quiet / --json-logs.
inline int run(std::vector<std::string> args, log::Sink sink = {}) {
  if (!sink) sink = [](log::Level lvl, std::string_view msg) {
    std::cerr << (lvl == log::Level::Warn ? "warning: " : "") << msg << '\n';
  };

  CLI::App app{"Causal population mixture models: ECM fitting, baselines and benchmarks", "ecm"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed override for data generation, fitting and benchmarks");
  app.add_flag("--quiet", g.quiet, "Only print warnings and errors");
  app.add_flag("--json-logs", g.json_logs, "Emit log lines as JSON objects");

  auto* gen = app.add_subcommand("generate", "Draw a synthetic dataset");
  std::string gen_config, gen_out;
  gen->add_option("--config", gen_config, "Synthetic config JSON (defaults when omitted)");
  gen->add_option("--out", gen_out, "Output dataset CSV")->required();

  auto* fitc = app.add_subcommand("fit", "Fit ECM or a baseline");
  FitOptions fo;
  detail::add_data_options(fitc, fo.data);
  fitc->add_option("--method", fo.method, "ecm|lr1|lr2|lrz")->check(CLI::IsMember({"ecm", "lr1", "lr2", "lrz"}));
  fitc->add_option("--out", fo.out, "Output model JSON")->required();
  fitc->add_option("--trace", fo.trace, "Fit-trace CSV (default: <out>.trace.csv)");
  fitc->add_option("--max-iters", fo.ecm.max_iters);
  fitc->add_option("--tol", fo.ecm.tol);
  fitc->add_option("--cov-reg", fo.ecm.cov_reg);
  fitc->add_option("--min-pi", fo.ecm.min_pi);
  fitc->add_option("--ite-mode", fo.ite_mode)->check(CLI::IsMember({"model_consistent", "literal_eq1"}));
  fitc->add_option("--l2", fo.l2, "Ridge strength for baselines");

  auto* eval = app.add_subcommand("evaluate", "Score a model on a dataset");
  DataOptions eval_data;
  std::string eval_model, eval_report, eval_curve;
  detail::add_data_options(eval, eval_data);
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--report", eval_report, "Output report JSON")->required();
  eval->add_option("--curve", eval_curve, "Uplift-curve CSV (default: <report>.curve.csv)");

  auto* pred = app.add_subcommand("predict", "Per-row ITE and counterfactual predictions");
  DataOptions pred_data;
  std::string pred_model, pred_out;
  detail::add_data_options(pred, pred_data);
  pred->add_option("--model", pred_model)->required();
  pred->add_option("--out", pred_out, "Output CSV")->required();

  auto* benchc = app.add_subcommand("benchmark", "Run a multi-trial benchmark");
  std::string spec_path, bench_report, bench_table;
  std::size_t trials_value = 0;
  benchc->add_option("--spec", spec_path, "Benchmark spec JSON")->required();
  benchc->add_option("--report", bench_report, "Override the report path");
  benchc->add_option("--table", bench_table, "Override the table path");
  auto* trials_opt = benchc->add_option("--trials", trials_value, "Override the trial count");

  for (auto* sub : {gen, fitc, eval, pred, benchc}) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  if (*seed_opt) g.seed = seed_value;

  log::ScopedSink scoped([&](log::Level lvl, std::string_view msg) {
    if (g.quiet && lvl == log::Level::Info) return;
    if (g.json_logs) {
      const nlohmann::json line = {{"level", lvl == log::Level::Warn ? "warn" : "info"}, {"msg", std::string(msg)}};
      sink(lvl, line.dump());
    } else {
      sink(lvl, msg);
    }
  });

  try {
    if (*gen) return cmd_generate(g, gen_config, gen_out);
    if (*fitc) return cmd_fit(g, fo);
    if (*eval) return cmd_evaluate(eval_data, eval_model, eval_report, eval_curve);
    if (*pred) return cmd_predict(pred_data, pred_model, pred_out);
    if (*benchc)
      return cmd_benchmark(g, spec_path, bench_report, bench_table,
                           *trials_opt ? std::optional<std::size_t>(trials_value) : std::nullopt);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ecm::cli
