#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "cvxreg/cap.hpp"
#include "cvxreg/cv.hpp"
#include "cvxreg/generators.hpp"
#include "cvxreg/lse.hpp"
#include "cvxreg/mb.hpp"
#include "oracle.hpp"

using namespace cvxreg;

namespace {

Dataset line_data(std::size_t n) {
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = 2.0 * x[i] + 1.0;
  }
  return Dataset(1, x, y);
}

Dataset abs_grid(std::size_t n = 101) {
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = std::abs(x[i]);
  }
  return Dataset(1, x, y);
}

double abs_test_rmse(const MaxAffineModel& m) {
  double ss = 0.0;
  const int N = 2001;
  for (int i = 0; i < N; ++i) {
    const double x = -1.0 + 2.0 * i / (N - 1);
    const double r = m(std::vector<double>{x}) - std::abs(x);
    ss += r * r;
  }
  return std::sqrt(ss / N);
}

double ols_mse(const Dataset& d) {
  FitConfig cfg;
  return mean_squared_error(fit_mb_fixed_k(d, 1, cfg), d);
}

}  // namespace

// ---------------------------------------------------------------------------
// Cross-validation

TEST(KFold, FoldsPartitionTheIndices) {
  for (std::size_t n : {5u, 17u, 100u}) {
    const auto f = assign_folds(n, 5, 99);
    ASSERT_EQ(f.size(), n);
    std::vector<std::size_t> count(5, 0);
    for (std::size_t v : f) {
      ASSERT_LT(v, 5u);
      ++count[v];
    }
    for (std::size_t c : count) EXPECT_GE(c, n / 5);
  }
  EXPECT_EQ(assign_folds(40, 5, 1), assign_folds(40, 5, 1));
  EXPECT_NE(assign_folds(40, 5, 1), assign_folds(40, 5, 2));
}

TEST(KFold, ConstantDataHasZeroCvError) {
  const Dataset d(1, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, std::vector<double>(10, 4.25));
  const double cv = kfold_cv(d, 5, 3, [](const Dataset& train) { return fit_mb_fixed_k(train, 1, FitConfig{}); });
  EXPECT_NEAR(cv, 0.0, 1e-20);
}

TEST(KFold, TooFewObservationsThrows) {
  const Dataset d(1, std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 2});
  EXPECT_THROW(assign_folds(3, 5, 0), DataError);
  EXPECT_THROW(kfold_cv(d, 5, 0, [](const Dataset& t) { return fit_mb_fixed_k(t, 1, FitConfig{}); }), DataError);
}

TEST(KFold, TwoPiecesBeatOneOnAbsData) {
  const Dataset d = abs_grid();
  FitConfig cfg;
  const double cv1 = kfold_cv(d, 5, 7, [&](const Dataset& t) { return fit_mb_fixed_k(t, 1, cfg); });
  const double cv2 = kfold_cv(d, 5, 7, [&](const Dataset& t) { return fit_mb_fixed_k(t, 2, cfg); });
  EXPECT_GT(cv1, cv2);
}

TEST(FitConfigTest, Validation) {
  FitConfig cfg;
  cfg.min_cell = 2;
  EXPECT_THROW(cfg.validate(2), DataError);
  cfg.min_cell = 0;
  cfg.cv_folds = 1;
  EXPECT_THROW(cfg.validate(2), DataError);
  FitConfig d;
  EXPECT_EQ(d.resolved_k_max(500), 12u);  // ceil(7.94) + 4
  EXPECT_EQ(d.resolved_k_max(1000), 14u);
  EXPECT_EQ(d.resolved_min_cell(5), 12u);
}

// ---------------------------------------------------------------------------
// CAP

TEST(Cap, ExactLineIsFitExactly) {
  const Dataset d = line_data(50);
  const MaxAffineModel m = fit_cap(d, FitConfig{});
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(m(d.row(i)), d.y(i), 1e-9);
}

TEST(Cap, AbsGridHasSmallTestError) {
  const Dataset d = abs_grid();
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < d.size(); ++i) pts.emplace_back(d.x(i, 0), d.y(i));
  ASSERT_LT(oracle::best_two_piece_sse(pts), 1e-20);
  EXPECT_LE(abs_test_rmse(fit_cap(d, FitConfig{})), 0.02);
}

TEST(Cap, TooFewObservationsThrows) {
  const Dataset d(1, std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 2});
  EXPECT_THROW(fit_cap(d, FitConfig{}), DataError);
}

TEST(Cap, IsAPureFunctionOfItsInputs) {
  const Dataset d = gen::gen_syn(300, 4);
  FitConfig cfg;
  cfg.seed = 10;
  const MaxAffineModel a = fit_cap(d, cfg), b = fit_cap(d, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.hyperplanes()[k].alpha, b.hyperplanes()[k].alpha);
    EXPECT_EQ(a.hyperplanes()[k].beta, b.hyperplanes()[k].beta);
  }
}

TEST(Cap, TrainingErrorNeverIncreasesAndKRespectsLimit) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset d = gen::gen_syn(400, seed);
    FitConfig cfg;
    cfg.seed = seed;
    CapTrace trace;
    const MaxAffineModel m = fit_cap(d, cfg, SplitDirections::cardinal(), &trace);
    EXPECT_LE(m.size(), cfg.resolved_k_max(d.size()));
    ASSERT_FALSE(trace.train_mse.empty());
    for (std::size_t i = 1; i < trace.train_mse.size(); ++i) EXPECT_LE(trace.train_mse[i], trace.train_mse[i - 1]);
    EXPECT_LE(mean_squared_error(m, d), ols_mse(d) * (1 + 1e-12));
  }
}

TEST(Cap, RandomDirectionsMustBeUnit) {
  EXPECT_THROW(SplitDirections::fixed({{1.0, 1.0}}), DataError);
  EXPECT_NO_THROW(SplitDirections::fixed({{0.6, 0.8}}));
  const Dataset d = gen::gen_syn(200, 3);
  const MaxAffineModel m = fit_cap(d, FitConfig{}, SplitDirections::random(5, 9));
  EXPECT_EQ(m.dim(), 5u);
}

TEST(Cap, RespectsExplicitKMax) {
  const Dataset d = gen::gen_syn(500, 8);
  FitConfig cfg;
  cfg.k_max = 3;
  EXPECT_LE(fit_cap(d, cfg).size(), 3u);
}

// ---------------------------------------------------------------------------
// MB

TEST(Mb, ExactLineSelectsOnePiece) {
  const Dataset d = line_data(50);
  const MbFit fit = fit_mb_detailed(d, FitConfig{});
  EXPECT_EQ(fit.k_selected, 1u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(fit.model(d.row(i)), d.y(i), 1e-9);
}

TEST(Mb, TwoPiecesRecoverAbs) {
  const Dataset d = abs_grid();
  const MaxAffineModel m = fit_mb_fixed_k(d, 2, FitConfig{});
  EXPECT_LE(mean_squared_error(m, d), 1e-6);
}

TEST(Mb, BestTrainingErrorIsNonIncreasing) {
  const Dataset d = gen::gen_syn(300, 12);
  FitConfig cfg;
  cfg.seed = 4;
  MbTrace trace;
  fit_mb_fixed_k(d, 6, cfg, &trace);
  ASSERT_GT(trace.best_train_mse.size(), 1u);
  for (std::size_t i = 1; i < trace.best_train_mse.size(); ++i) {
    EXPECT_LE(trace.best_train_mse[i], trace.best_train_mse[i - 1]);
  }
}

TEST(Mb, SeedReproducible) {
  const Dataset d = gen::gen_syn(250, 6);
  FitConfig cfg;
  cfg.seed = 77;
  const MaxAffineModel a = fit_mb(d, cfg), b = fit_mb(d, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.hyperplanes()[k].alpha, b.hyperplanes()[k].alpha);
    EXPECT_EQ(a.hyperplanes()[k].beta, b.hyperplanes()[k].beta);
  }
}

TEST(Mb, NeverWorseThanSinglePlane) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const Dataset d = gen::gen_syn(200, seed);
    FitConfig cfg;
    cfg.seed = seed;
    EXPECT_LE(mean_squared_error(fit_mb(d, cfg), d), ols_mse(d) * (1 + 1e-12));
  }
}

TEST(Mb, TooFewObservationsThrows) {
  const Dataset d(2, std::vector<double>{0, 1, 2, 3, 4, 5}, std::vector<double>{0, 1, 2});
  EXPECT_THROW(fit_mb(d, FitConfig{}), DataError);
}

TEST(Mb, RankDeficientCellsDoNotAbort) {
  // Duplicate covariates make many cells singular.
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(static_cast<double>(i % 3));
    x.push_back(static_cast<double>(i % 3));
    y.push_back(static_cast<double>((i % 3) * (i % 3)));
  }
  const Dataset d(2, x, y);
  EXPECT_NO_THROW(fit_mb(d, FitConfig{}));
  EXPECT_NO_THROW(fit_cap(d, FitConfig{}));
}

// ---------------------------------------------------------------------------
// LSE

TEST(Lse, ThreePointExample) {
  const Dataset d(1, std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 1});
  const LseFit fit = fit_lse_detailed(d);
  const double expect[3] = {1.0 / 6.0, 2.0 / 3.0, 7.0 / 6.0};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(fit.model.anchors()[i].yhat, expect[i], 1e-8);
  // Projection onto {y1 - 2 y2 + y3 >= 0}: residual (1, -2, 1)/6, objective 1/6.
  EXPECT_NEAR(fit.objective, 1.0 / 6.0, 1e-9);
}

TEST(Lse, ConvexDataIsReproduced) {
  Rng rng(3);
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    x.push_back(a);
    x.push_back(b);
    y.push_back(a * a + 0.5 * b * b + a * b * 0.2);
  }
  const LseFit fit = fit_lse_detailed(Dataset(2, x, y));
  EXPECT_LE(fit.objective, 1e-8);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(fit.model.anchors()[i].yhat, y[i], 1e-4);
}

TEST(Lse, ConstraintsHoldOnAllPairs) {
  const Dataset d = gen::gen_opt(60, 5);
  const LseFit fit = fit_lse_detailed(d);
  EXPECT_LE(fit.model.max_violation(), 1e-6);
  EXPECT_LE(fit.kkt_residual, 1e-6);
}

TEST(Lse, MatchesFrozenQpSolutions) {
  const auto instances = oracle::load_lse_instances(CVXREG_TEST_DATA "/lse_oracle.txt");
  ASSERT_EQ(instances.size(), 100u);
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& inst = instances[k];
    const LseFit fit = fit_lse_detailed(Dataset(inst.p, inst.x, inst.y));
    EXPECT_NEAR(fit.objective, inst.objective, 1e-6 * inst.objective) << "instance " << k;
    EXPECT_LE(fit.model.max_violation(), 1e-6) << "instance " << k;
  }
}

TEST(Lse, NonConvergenceCarriesBestIterate) {
  const Dataset d = gen::gen_opt(40, 9);
  LseOptions opt;
  opt.max_iters = 2;
  try {
    fit_lse_detailed(d, opt);
    FAIL() << "expected LseConvergenceError";
  } catch (const LseConvergenceError& e) {
    EXPECT_EQ(e.yhat.size(), 40u);
    EXPECT_EQ(e.g.size(), 40u);
    EXPECT_GT(e.kkt_residual, 0.0);
  }
}

TEST(Lse, NeedsTwoPoints) {
  const Dataset d(1, std::vector<double>{0}, std::vector<double>{1});
  EXPECT_THROW(fit_lse(d), DataError);
}

TEST(Lse, NeverWorseThanSinglePlane) {
  const Dataset d = gen::gen_syn(80, 2);
  const LseFit fit = fit_lse_detailed(d);
  EXPECT_LE(fit.objective / 80.0, ols_mse(d) * (1 + 1e-9));
}
