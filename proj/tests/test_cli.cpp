#include "ecm/cli.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

namespace ecm {
namespace {

using nlohmann::json;

struct CliRun {
  int code = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> infos;
};

CliRun run_cli(std::vector<std::string> args) {
  CliRun r;
  args.insert(args.begin(), "ecm");
  r.code = cli::run(args, [&](log::Level lvl, std::string_view msg) {
    (lvl == log::Level::Warn ? r.warnings : r.infos).emplace_back(msg);
  });
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

json read(const std::string& path) { return json::parse(testing::slurp(path)); }

class CliTest : public ::testing::Test {
 protected:
  testing::TempDir dir;
  std::string f(const std::string& name) const { return dir.file(name); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(f(name)) << text;
  }
};

TEST_F(CliTest, GenerateIsDeterministic) {
  ASSERT_EQ(run_cli({"--seed", "42", "generate", "--out", f("a.csv")}).code, 0);
  ASSERT_EQ(run_cli({"--seed", "42", "generate", "--out", f("b.csv")}).code, 0);
  EXPECT_EQ(testing::slurp(f("a.csv")), testing::slurp(f("b.csv")));
  const auto rows = lines(testing::slurp(f("a.csv")));
  EXPECT_EQ(rows.size(), 2001u);
  EXPECT_EQ(rows[0], "x1,x2,t,y,group,y0,y1,tau");

  const json meta = read(f("a.csv.meta.json"));
  EXPECT_EQ(meta.at("seed"), 42);
  EXPECT_EQ(meta.at("rows"), 2000);
  // The sidecar config regenerates the same file.
  std::ofstream(f("cfg.json")) << meta.at("config").dump();
  ASSERT_EQ(run_cli({"generate", "--config", f("cfg.json"), "--out", f("c.csv")}).code, 0);
  EXPECT_EQ(testing::slurp(f("c.csv")), testing::slurp(f("a.csv")));
}

TEST_F(CliTest, GenerateUsesConfigFile) {
  ASSERT_EQ(run_cli({"generate", "--config", ECM_CONFIG_DIR "/synthetic_default.json", "--out", f("d.csv")}).code, 0);
  EXPECT_EQ(read(f("d.csv.meta.json")).at("seed"), 42);
  ASSERT_EQ(run_cli({"--seed", "42", "generate", "--out", f("e.csv")}).code, 0);
  EXPECT_EQ(testing::slurp(f("d.csv")), testing::slurp(f("e.csv")));
}

TEST_F(CliTest, GenerateRejectsZeroRows) {
  write("bad.json", R"({"n": 0})");
  EXPECT_EQ(run_cli({"generate", "--config", f("bad.json"), "--out", f("x.csv")}).code, 2);
  write("broken.json", "{");
  EXPECT_EQ(run_cli({"generate", "--config", f("broken.json"), "--out", f("x.csv")}).code, 2);
}

TEST_F(CliTest, FitWritesMonotoneTrace) {
  ASSERT_EQ(run_cli({"--seed", "3", "generate", "--out", f("d.csv")}).code, 0);
  const CliRun r = run_cli({"fit", "--data", f("d.csv"), "--method", "ecm", "--out", f("m.json")});
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(testing::slurp(f("m.json.trace.csv")));
  ASSERT_GT(rows.size(), 2u);
  EXPECT_EQ(rows[0], "iteration,elbo,loglik");
  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto fields = io::split_csv_line(rows[i]);
    const double v = std::stod(fields[1]);
    EXPECT_GE(v, previous - 1e-8);
    previous = v;
  }
  const json model = read(f("m.json"));
  EXPECT_EQ(model.at("kind"), "ecm");
  EXPECT_EQ(model.at("provenance").at("data").at("path"), f("d.csv"));
  EXPECT_EQ(model.at("meta").at("seed"), 0);
}

TEST_F(CliTest, LrzWarnsOnImbalance) {
  write("cfg.json", R"({"n": 1000, "p_treat": 0.9, "seed": 4})");
  ASSERT_EQ(run_cli({"generate", "--config", f("cfg.json"), "--out", f("d.csv")}).code, 0);
  const CliRun r = run_cli({"fit", "--data", f("d.csv"), "--method", "lrz", "--out", f("m.json")});
  EXPECT_EQ(r.code, 0);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("imbalanced"), std::string::npos);
}

TEST_F(CliTest, UnknownMethodIsUsageError) {
  ASSERT_EQ(run_cli({"generate", "--out", f("d.csv")}).code, 0);
  EXPECT_EQ(run_cli({"fit", "--data", f("d.csv"), "--method", "svm", "--out", f("m.json")}).code, 2);
  EXPECT_EQ(run_cli({"fit", "--data", f("d.csv")}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
}

TEST_F(CliTest, EvaluateOracleModel) {
  write("cfg.json", R"({"n": 5000, "seed": 5})");
  ASSERT_EQ(run_cli({"generate", "--config", f("cfg.json"), "--out", f("d.csv")}).code, 0);
  io::write_json(f("oracle.json"), io::to_json(oracle_model(SyntheticConfig::corners())));
  ASSERT_EQ(run_cli({"evaluate", "--data", f("d.csv"), "--model", f("oracle.json"), "--report", f("r.json")}).code, 0);
  const json rep = read(f("r.json"));
  EXPECT_LT(rep.at("pehe").get<double>(), 0.05);
  EXPECT_TRUE(rep.at("auuc").is_number());
  EXPECT_TRUE(rep.contains("counterfactual_accuracy"));
  const auto curve = lines(testing::slurp(f("r.json.curve.csv")));
  EXPECT_EQ(curve[0], "fraction,uplift");
  EXPECT_EQ(curve.size(), 5001u);
}

TEST_F(CliTest, EvaluateWithoutOracleOmitsPehe) {
  ASSERT_EQ(run_cli({"generate", "--out", f("d.csv")}).code, 0);
  ASSERT_EQ(run_cli({"fit", "--data", f("d.csv"), "--out", f("m.json")}).code, 0);
  // Strip the oracle columns.
  std::ostringstream stripped;
  for (const auto& l : lines(testing::slurp(f("d.csv")))) {
    const auto fields = io::split_csv_line(l);
    stripped << fields[0] << ',' << fields[1] << ',' << fields[2] << ',' << fields[3] << '\n';
  }
  write("plain.csv", stripped.str());
  ASSERT_EQ(run_cli({"evaluate", "--data", f("plain.csv"), "--model", f("m.json"), "--report", f("r.json")}).code, 0);
  const json rep = read(f("r.json"));
  EXPECT_FALSE(rep.contains("pehe"));
  EXPECT_FALSE(rep.contains("counterfactual_accuracy"));
  EXPECT_TRUE(rep.contains("auuc"));
}

TEST_F(CliTest, DimensionMismatchIsUsageError) {
  ASSERT_EQ(run_cli({"generate", "--out", f("d.csv")}).code, 0);
  ASSERT_EQ(run_cli({"fit", "--data", f("d.csv"), "--out", f("m.json")}).code, 0);
  testing::write_ihdp_fixture(f("ihdp.csv"));
  EXPECT_EQ(run_cli({"evaluate", "--data", f("ihdp.csv"), "--format", "ihdp", "--model", f("m.json"),
                     "--report", f("r.json")}).code,
            2);
  EXPECT_EQ(run_cli({"predict", "--data", f("ihdp.csv"), "--format", "ihdp", "--model", f("m.json"),
                     "--out", f("p.csv")}).code,
            2);
}

TEST_F(CliTest, PredictWritesRows) {
  ASSERT_EQ(run_cli({"generate", "--out", f("d.csv")}).code, 0);
  ASSERT_EQ(run_cli({"fit", "--data", f("d.csv"), "--out", f("m.json")}).code, 0);
  ASSERT_EQ(run_cli({"predict", "--data", f("d.csv"), "--model", f("m.json"), "--out", f("p.csv")}).code, 0);
  const auto rows = lines(testing::slurp(f("p.csv")));
  EXPECT_EQ(rows[0], "row,ite,counterfactual,group");
  EXPECT_EQ(rows.size(), 2001u);
  ASSERT_EQ(run_cli({"fit", "--data", f("d.csv"), "--method", "lr2", "--out", f("b.json")}).code, 0);
  ASSERT_EQ(run_cli({"predict", "--data", f("d.csv"), "--model", f("b.json"), "--out", f("q.csv")}).code, 0);
  EXPECT_EQ(lines(testing::slurp(f("q.csv")))[0], "row,ite");
}

TEST_F(CliTest, MissingFileIsUsageError) {
  EXPECT_EQ(run_cli({"fit", "--data", f("nope.csv"), "--out", f("m.json")}).code, 2);
}

TEST_F(CliTest, QuietAndJsonLogs) {
  const CliRun quiet = run_cli({"--quiet", "generate", "--out", f("d.csv")});
  EXPECT_TRUE(quiet.infos.empty());
  const CliRun js = run_cli({"--json-logs", "generate", "--out", f("d.csv")});
  ASSERT_FALSE(js.infos.empty());
  const json line = json::parse(js.infos[0]);
  EXPECT_EQ(line.at("level"), "info");
}

json strip_run_specific(json j) {
  j.erase("timing");
  j["spec"].erase("output");
  return j;
}

TEST_F(CliTest, BenchmarkShapeAndDeterminism) {
  const std::string spec = ECM_CONFIG_DIR "/benchmark_synthetic.json";
  ASSERT_EQ(run_cli({"--quiet", "benchmark", "--spec", spec, "--trials", "6", "--report", f("a.json"), "--table",
                     f("a.txt")}).code,
            0);
  ASSERT_EQ(run_cli({"--quiet", "benchmark", "--spec", spec, "--trials", "6", "--report", f("b.json"), "--table",
                     f("b.txt")}).code,
            0);
  const json a = read(f("a.json"));
  EXPECT_EQ(strip_run_specific(a), strip_run_specific(read(f("b.json"))));
  EXPECT_EQ(testing::slurp(f("a.txt")), testing::slurp(f("b.txt")));

  EXPECT_EQ(a.at("method_order"), json({"ref", "lr1", "lr2", "lrz", "ecm"}));
  EXPECT_EQ(a.at("methods").size(), 5u);
  EXPECT_EQ(a.at("seeds"), json({1, 2, 3, 4, 5, 6}));
  for (const char* other : {"ref", "lr1", "lr2", "lrz"}) {
    const json& w = a.at("wilcoxon_vs_ecm").at(other);
    EXPECT_TRUE(w.at("pehe").contains("p")) << other;
    EXPECT_TRUE(w.at("auuc").contains("p")) << other;
  }
  // Summaries are recomputable from the raw values.
  for (const auto& [name, m] : a.at("methods").items()) {
    const auto raw = m.at("pehe").get<std::vector<double>>();
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(raw.size());
    EXPECT_NEAR(m.at("summary").at("pehe").at("mean").get<double>(), mean, 1e-15) << name;
  }
  const std::string table = testing::slurp(f("a.txt"));
  EXPECT_NE(table.find("ecm"), std::string::npos);
  EXPECT_NE(table.find("PEHE"), std::string::npos);
  EXPECT_EQ(a.at("spec").at("trials"), 6);
}

TEST_F(CliTest, BenchmarkRejectsBadSpec) {
  write("spec.json", R"({"methods": ["ecm", "forest"]})");
  EXPECT_EQ(run_cli({"benchmark", "--spec", f("spec.json"), "--report", f("r.json")}).code, 2);
  write("spec2.json", R"({"trials": 0})");
  EXPECT_EQ(run_cli({"benchmark", "--spec", f("spec2.json"), "--report", f("r.json")}).code, 2);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string exe = ECM_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status(exe + " --help"), 0);
  EXPECT_EQ(status(exe + " fit --data x --method svm --out y"), 2);
  EXPECT_EQ(status(exe + " generate --out " + f("d.csv")), 0);
  write("not_a_model.json", R"({"kind": "ecm"})");
  EXPECT_EQ(status(exe + " evaluate --data " + f("d.csv") + " --model " + f("not_a_model.json") + " --report " +
                   f("r.json")),
            2);
  // Writing into a missing directory is a runtime failure.
  EXPECT_EQ(status(exe + " generate --out " + f("missing/dir/d.csv")), 1);
}

}  // namespace
}  // namespace ecm
