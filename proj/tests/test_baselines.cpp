#include "ecm/baselines.hpp"
#include "ecm/datagen.hpp"
#include "ecm/model_io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace ecm {
namespace {

LogisticModel constant_model(std::size_t m, double b, double w_last = 0.0) {
  LogisticModel model;
  model.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  if (m > 0) model.w[static_cast<Eigen::Index>(m) - 1] = w_last;
  model.b = b;
  return model;
}

TEST(Logistic, NoSignalShrinksToBaseRate) {
  Eigen::MatrixXd x(6, 1);
  x << -2, -1, 0, 0, 1, 2;
  const std::vector<int> ones(6, 1);
  LogisticOptions opt;
  opt.l2 = 0.1;
  const LogisticModel m = fit_logistic(x, ones, opt);
  EXPECT_TRUE(m.converged);
  // Stationarity in b alone (w = 0): n (1 - sigmoid(b)) = l2 b.
  EXPECT_NEAR(m.w[0], 0.0, 1e-8);
  EXPECT_NEAR(6.0 * (1.0 - sigmoid(m.b)), opt.l2 * m.b, 1e-8);
  EXPECT_NEAR(predict_proba(m, x.row(0).transpose()), predict_proba(m, x.row(5).transpose()), 1e-8);
}

TEST(Logistic, SymmetricDataHasZeroIntercept) {
  Eigen::MatrixXd x(4, 1);
  x << -1, 1, -1, 1;
  const LogisticModel m = fit_logistic(x, std::vector<int>{0, 1, 0, 1});
  EXPECT_TRUE(m.converged);
  EXPECT_NEAR(m.b, 0.0, 1e-10);
  EXPECT_GT(m.w[0], 0.0);
}

TEST(Logistic, GridOracleCertifiesOptimum) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd x(20, 2);
  std::vector<int> y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    x(i, 0) = normal(rng);
    x(i, 1) = normal(rng);
    y[static_cast<std::size_t>(i)] = coin(rng);
  }
  LogisticOptions opt;
  opt.l2 = 0.01;
  const LogisticModel m = fit_logistic(x, y, opt);
  ASSERT_TRUE(m.converged);
  const double best = logistic_loss(x, y, m.w, m.b, opt.l2);
  const double h = 0.02;
  double grid_min = std::numeric_limits<double>::infinity();
  for (int i = -20; i <= 20; ++i)
    for (int j = -20; j <= 20; ++j)
      for (int k = -20; k <= 20; ++k) {
        const Eigen::Vector2d w = m.w + h * Eigen::Vector2d(i, j);
        grid_min = std::min(grid_min, logistic_loss(x, y, w, m.b + h * k, opt.l2));
      }
  EXPECT_LE(best, grid_min + 1e-12);
}

TEST(Logistic, DampingScheduleDoesNotMatter) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(200, 3);
  std::vector<int> y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = normal(rng);
    y[static_cast<std::size_t>(i)] = x(i, 0) - 0.5 * x(i, 2) + normal(rng) > 0;
  }
  LogisticOptions a;
  LogisticOptions b;
  b.initial_step = 0.3;
  b.shrink = 0.7;
  b.max_iters = 500;
  const LogisticModel ma = fit_logistic(x, y, a);
  const LogisticModel mb = fit_logistic(x, y, b);
  EXPECT_LT((ma.w - mb.w).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(ma.b, mb.b, 1e-6);
}

TEST(Logistic, SeparationWithoutPenaltyIsFlagged) {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  LogisticOptions opt;
  opt.l2 = 0.0;
  const LogisticModel m = fit_logistic(x, std::vector<int>{0, 0, 0, 1, 1, 1}, opt);
  EXPECT_FALSE(m.converged);
}

TEST(Logistic, RejectsBadInput) {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 2;
  LogisticOptions opt;
  opt.l2 = 0.0;
  EXPECT_THROW(fit_logistic(x, std::vector<int>{1, 1, 1}, opt), FitError);
  EXPECT_THROW(fit_logistic(x, std::vector<int>{1, 2, 0}), ValidationError);
  EXPECT_THROW(fit_logistic(x.topRows(1), std::vector<int>{1}), FitError);
}

TEST(IteLr1, Examples) {
  const Eigen::Vector2d x(0.7, -1.3);
  LogisticModel m = constant_model(3, 0.0, 0.0);
  m.w[0] = 0.4;
  m.w[1] = -2.0;
  EXPECT_EQ(ite_lr1(x, m), 0.0);
  m = constant_model(3, 0.0, 40.0);
  EXPECT_NEAR(ite_lr1(x, m), 0.5, 1e-12);
  m = constant_model(3, 0.0, 1.0);
  EXPECT_NEAR(ite_lr1(x, m), 1.0 / (1.0 + std::exp(-1.0)) - 0.5, 1e-15);
  EXPECT_NEAR(ite_lr1(x, m), 0.231059, 1e-6);
}

TEST(IteLr2, Examples) {
  const Eigen::Vector2d x(0.2, 0.1);
  LogisticModel a = constant_model(2, 0.3, 0.8);
  EXPECT_EQ(ite_lr2(x, a, a), 0.0);
  EXPECT_GT(ite_lr2(x, constant_model(2, 30.0), constant_model(2, -30.0)), 1.0 - 1e-12);
  LogisticModel b = constant_model(2, -0.4, 0.1);
  b.w[0] = 1.5;
  const double p1 = 1.0 / (1.0 + std::exp(-(0.8 * 0.1 + 0.3)));
  const double p0 = 1.0 / (1.0 + std::exp(-(1.5 * 0.2 + 0.1 * 0.1 - 0.4)));
  EXPECT_NEAR(ite_lr2(x, a, b), p1 - p0, 1e-15);
}

TEST(ClassVariableTransform, Definition) {
  EXPECT_EQ(class_variable_transform(1, 1), 1);
  EXPECT_EQ(class_variable_transform(0, 0), 1);
  EXPECT_EQ(class_variable_transform(1, 0), 0);
  EXPECT_EQ(class_variable_transform(0, 1), 0);
  for (int t : {0, 1})
    for (int y : {0, 1}) EXPECT_EQ(class_variable_transform(t, y), class_variable_transform(1 - t, 1 - y));
}

TEST(IteLrz, Examples) {
  const Eigen::Vector2d x(1.0, 2.0);
  EXPECT_EQ(ite_lrz(x, constant_model(2, 0.0)), 0.0);
  EXPECT_NEAR(ite_lrz(x, constant_model(2, 50.0)), 1.0, 1e-12);
}

TEST(IteLrz, NullDataAveragesToZero) {
  SyntheticConfig cfg = SyntheticConfig::corners(1.5, 1.0, 5000, 21);
  cfg.pi_true = GroupVector(0.0, 0.5, 0.5, 0.0);
  const Dataset data = generate(cfg);
  const BaselineModel m = fit_baseline(BaselineKind::LRZ, data);
  double mean = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) mean += m.ite(data.x(i));
  mean /= static_cast<double>(data.size());
  EXPECT_LT(std::abs(mean), 0.05);
}

TEST(Baselines, OutputsStayInsideOpenInterval) {
  const Dataset data = generate(SyntheticConfig::corners(1.5, 1.0, 1000, 22));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 4.0);
  for (auto kind : {BaselineKind::LR1, BaselineKind::LR2, BaselineKind::LRZ}) {
    const BaselineModel m = fit_baseline(kind, data);
    for (int i = 0; i < 200; ++i) {
      const double v = m.ite(Eigen::Vector2d(normal(rng), normal(rng)));
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Baselines, StandardizerUsesTrainingMoments) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 10, 3, 10, 5, 10, 7, 10;
  const Standardizer s = Standardizer::fit(x);
  EXPECT_NEAR(s.mean[0], 4.0, 1e-15);
  EXPECT_NEAR(s.scale[0], std::sqrt(5.0), 1e-15);
  EXPECT_EQ(s.scale[1], 1.0);  // constant column left unscaled
  const Eigen::MatrixXd z = s.apply(x);
  EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(z.col(0).squaredNorm() / 4.0, 1.0, 1e-14);
}

TEST(Baselines, LrzWarnsOnImbalancedArms) {
  SyntheticConfig cfg = SyntheticConfig::corners(1.5, 1.0, 1000, 23);
  cfg.p_treat = 0.9;
  const Dataset data = generate(cfg);
  std::vector<std::string> warnings;
  log::ScopedSink sink([&](log::Level lvl, std::string_view msg) {
    if (lvl == log::Level::Warn) warnings.emplace_back(msg);
  });
  fit_baseline(BaselineKind::LRZ, data);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("imbalanced"), std::string::npos);
  warnings.clear();
  fit_baseline(BaselineKind::LR1, data);
  EXPECT_TRUE(warnings.empty());
}

TEST(Baselines, Lr2NeedsTwoRowsPerArm) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const Dataset data(x, {1, 0, 0, 0}, {1, 0, 1, 0});
  EXPECT_THROW(fit_baseline(BaselineKind::LR2, data), FitError);
}

TEST(Baselines, JsonRoundTripIsExact) {
  const Dataset data = generate(SyntheticConfig::corners(1.5, 1.0, 500, 24));
  for (auto kind : {BaselineKind::LR1, BaselineKind::LR2, BaselineKind::LRZ}) {
    const BaselineModel m = fit_baseline(kind, data);
    const std::string text = io::to_json(m).dump();
    const auto back = std::get<BaselineModel>(io::model_from_json(nlohmann::json::parse(text)));
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(io::to_json(back).dump(), text);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(back.ite(data.x(i)), m.ite(data.x(i)));
  }
  EXPECT_THROW(parse_baseline_kind("lr3"), ValidationError);
}

}  // namespace
}  // namespace ecm
