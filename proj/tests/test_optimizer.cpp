#include <gtest/gtest.h>

#include <cmath>

#include "cvxreg/ensemble.hpp"
#include "cvxreg/generators.hpp"
#include "cvxreg/lse.hpp"
#include "cvxreg/optimizer.hpp"
#include "oracle.hpp"

using namespace cvxreg;
using Planes = std::vector<Hyperplane>;
using Members = std::vector<MaxAffineModel>;

namespace {

oracle::Group to_group(const MaxAffineModel& m) {
  oracle::Group g;
  for (const auto& h : m.hyperplanes()) g.push_back({h.alpha, h.beta});
  return g;
}

MaxAffineModel random_planes(Rng& rng, std::size_t K, std::size_t p, double slope) {
  std::vector<Hyperplane> h(K);
  for (auto& plane : h) {
    plane.alpha = rng.uniform(-1, 1);
    for (std::size_t j = 0; j < p; ++j) plane.beta.push_back(rng.uniform(-slope, slope));
  }
  return MaxAffineModel(std::move(h));
}

void expect_consistent(const MaxAffineModel& m, const Box& box, const SolveResult& r) {
  ASSERT_EQ(r.status, SolveStatus::optimal);
  for (std::size_t j = 0; j < box.dim(); ++j) {
    EXPECT_GE(r.x_star[j], box.lower[j] - 1e-9);
    EXPECT_LE(r.x_star[j], box.upper[j] + 1e-9);
  }
  EXPECT_NEAR(r.value, m(r.x_star), 1e-7);
}

const Box kSquare{{-1.0, -1.0}, {1.0, 1.0}};

}  // namespace

TEST(Minimize, AbsoluteValue) {
  const MaxAffineModel m(Planes{{0.0, {1.0}}, {0.0, {-1.0}}});
  const SolveResult r = minimize(m, Box{{-1.0}, {1.0}});
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.x_star[0], 0.0, 1e-12);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
}

TEST(Minimize, LinearObjectiveAttainsVertex) {
  const MaxAffineModel m(Planes{{0.0, {1.0, 1.0}}});
  const SolveResult r = minimize(m, kSquare);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_EQ(r.x_star, (std::vector<double>{-1.0, -1.0}));
  EXPECT_NEAR(r.value, -2.0, 1e-12);
}

TEST(Minimize, EmptyBoxIsInfeasible) {
  const MaxAffineModel m(Planes{{0.0, {1.0, 1.0}}});
  EXPECT_EQ(minimize(m, Box{{0.0, 1.0}, {1.0, 0.5}}).status, SolveStatus::infeasible);
}

TEST(Minimize, DimensionAndBoundErrors) {
  const MaxAffineModel m(Planes{{0.0, {1.0, 1.0}}});
  EXPECT_THROW(minimize(m, Box{{0.0}, {1.0}}), DataError);
  EXPECT_THROW(minimize(m, Box{{0.0, 0.0}, {1.0}}), DataError);
  EXPECT_THROW(minimize(m, Box{{0.0, -INFINITY}, {1.0, 1.0}}), DataError);
}

TEST(Minimize, FlatModelReturnsBoxCenter) {
  const MaxAffineModel m(Planes{{1.0, {0.5, 0.0}}, {2.0, {0.5, 0.0}}});
  const SolveResult r = minimize(m, Box{{-1.0, 2.0}, {3.0, 6.0}});
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.x_star[0], -1.0, 1e-12);
  EXPECT_EQ(r.x_star[1], 4.0);
  EXPECT_NEAR(r.value, 1.5, 1e-12);
  const MaxAffineModel flat(Planes{{1.0, {0.0, 0.0}}});
  const SolveResult c = minimize(flat, Box{{-1.0, 2.0}, {3.0, 6.0}});
  EXPECT_EQ(c.x_star, (std::vector<double>{1.0, 4.0}));
}

TEST(Minimize, DegenerateBoxCoordinate) {
  const MaxAffineModel m(Planes{{0.0, {1.0, -1.0}}, {0.0, {-1.0, 2.0}}});
  const SolveResult r = minimize(m, Box{{0.25, -1.0}, {0.25, 1.0}});
  expect_consistent(m, Box{{0.25, -1.0}, {0.25, 1.0}}, r);
  EXPECT_EQ(r.x_star[0], 0.25);
}

TEST(Minimize, RandomInstancesMatchGridAndVertexOracles) {
  // Slopes in [-0.4, 0.4] keep |beta|_1 <= 0.8, so the 401 x 401 grid is
  // itself within spacing/2 * 0.8 = 2e-3 of the true minimum.
  Rng rng(2024);
  for (int t = 0; t < 100; ++t) {
    const std::size_t K = 1 + rng.index(10);
    const MaxAffineModel m = random_planes(rng, K, 2, 0.4);
    const SolveResult r = minimize(m, kSquare);
    expect_consistent(m, kSquare, r);
    const std::vector<oracle::Group> groups = {to_group(m)};
    const double grid = oracle::grid_min_2d(groups, -1.0, 1.0, 400);
    EXPECT_LE(r.value, grid + 1e-12) << "instance " << t;
    EXPECT_NEAR(r.value, grid, 2e-3) << "instance " << t;
    EXPECT_NEAR(r.value, oracle::vertex_enum_min(groups, {-1.0, -1.0}, {1.0, 1.0}), 1e-7) << "instance " << t;
  }
}

TEST(Minimize, SteepInstancesMatchVertexEnumeration) {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const MaxAffineModel m = random_planes(rng, 1 + rng.index(10), 2, 5.0);
    const SolveResult r = minimize(m, kSquare);
    expect_consistent(m, kSquare, r);
    const std::vector<oracle::Group> groups = {to_group(m)};
    EXPECT_NEAR(r.value, oracle::vertex_enum_min(groups, {-1.0, -1.0}, {1.0, 1.0}), 1e-7) << "instance " << t;
    EXPECT_LE(r.value, oracle::grid_min_2d(groups, -1.0, 1.0, 200) + 1e-12) << "instance " << t;
  }
}

TEST(Minimize, EnsembleMatchesVertexEnumeration) {
  Rng rng(77);
  for (int t = 0; t < 30; ++t) {
    std::vector<MaxAffineModel> members;
    std::vector<oracle::Group> groups;
    for (int m = 0; m < 3; ++m) {
      members.push_back(random_planes(rng, 1 + rng.index(3), 2, 1.0));
      groups.push_back(to_group(members.back()));
    }
    const EnsembleModel ens(members);
    const SolveResult r = minimize(ens, kSquare);
    ASSERT_EQ(r.status, SolveStatus::optimal);
    EXPECT_NEAR(r.value, ens(r.x_star), 1e-7);
    EXPECT_NEAR(r.value, oracle::vertex_enum_min(groups, {-1.0, -1.0}, {1.0, 1.0}), 1e-7) << "instance " << t;
    EXPECT_LE(r.value, oracle::grid_min_2d(groups, -1.0, 1.0, 100) + 1e-12);
  }
}

TEST(Minimize, FittedSurrogatesAreConsistent) {
  const Dataset d = gen::gen_opt(100, 4);
  EnsembleConfig e;
  e.members = 20;
  const EnsembleModel ens = smear_fixed(d, BaseMethod::cap, FitConfig{}, e);
  const SolveResult r = minimize(ens, gen::opt_box());
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.value, ens(r.x_star), 1e-7);
  EXPECT_NEAR(r.lp_objective, r.value, 1e-7);
  EXPECT_LE(r.value, oracle::grid_min_2d([&] {
    std::vector<oracle::Group> g;
    for (const auto& m : ens.members()) g.push_back(to_group(m));
    return g;
  }(), -1.0, 1.0, 100) + 1e-12);

  const LseModel lse = fit_lse(gen::gen_opt(60, 5));
  const SolveResult s = minimize(lse, gen::opt_box());
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.value, lse(s.x_star), 1e-7);
}

TEST(Minimize, HigherDimensionalBoxes) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const std::size_t p = 3 + rng.index(4);
    const MaxAffineModel m = random_planes(rng, 2 + rng.index(15), p, 2.0);
    Box box;
    for (std::size_t j = 0; j < p; ++j) {
      const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
      box.lower.push_back(std::min(a, b));
      box.upper.push_back(std::max(a, b));
    }
    const SolveResult r = minimize(m, box);
    expect_consistent(m, box, r);
    // No random box point beats the LP optimum.
    for (int s = 0; s < 2000; ++s) {
      std::vector<double> x(p);
      for (std::size_t j = 0; j < p; ++j) x[j] = rng.uniform(box.lower[j], box.upper[j]);
      EXPECT_GE(m(x), r.value - 1e-9);
    }
  }
}

TEST(Minimize, Deterministic) {
  Rng rng(9);
  const MaxAffineModel m = random_planes(rng, 8, 2, 1.0);
  const SolveResult a = minimize(m, kSquare), b = minimize(m, kSquare);
  EXPECT_EQ(a.x_star, b.x_star);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.pivots, b.pivots);
}
