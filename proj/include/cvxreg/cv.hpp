#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cvxreg/core.hpp"
#include "cvxreg/rng.hpp"

namespace cvxreg {

/// Knobs shared by the partitioning estimators. Zero means "use the
/// data-dependent default".
struct FitConfig {
  std::size_t k_max = 0;            // default ceil(n^(1/3)) + 4
  std::size_t min_cell = 0;         // default 2(p+1)
  std::size_t max_refit_iters = 10;
  std::size_t cv_folds = 5;
  std::uint64_t seed = 0;
  std::size_t split_knots = 9;
  std::size_t max_lloyd_iters = 50;
  std::size_t mb_restarts = 1;

  std::size_t resolved_k_max(std::size_t n) const {
    if (k_max != 0) return k_max;
    return static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9)) + 4;
  }
  std::size_t resolved_min_cell(std::size_t p) const {
    return min_cell != 0 ? min_cell : 2 * (p + 1);
  }

  void validate(std::size_t p) const {
    if (min_cell != 0 && min_cell < p + 1) {
      throw DataError("min_cell must be at least p+1 = " + std::to_string(p + 1));
    }
    if (cv_folds < 2) throw DataError("cv_folds must be at least 2");
    if (split_knots < 1) throw DataError("split_knots must be at least 1");
    if (mb_restarts < 1) throw DataError("mb_restarts must be at least 1");
    if (max_lloyd_iters < 1) throw DataError("max_lloyd_iters must be at least 1");
  }
};

/// Fold label for each of n indices: a seeded shuffle dealt round-robin.
inline std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least 2 folds");
  if (n < folds) {
    throw DataError("cannot split " + std::to_string(n) + " observations into " +
                    std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::size_t> label(n);
  for (std::size_t k = 0; k < n; ++k) label[order[k]] = k % folds;
  return label;
}

/// Mean over folds of held-out MSE. fit_fn maps a training Dataset to any
/// callable model taking a span of covariates.
template <class FitFn>
double kfold_cv(const Dataset& data, std::size_t folds, std::uint64_t seed, FitFn&& fit_fn) {
  const auto label = assign_folds(data.size(), folds, seed);
  double total = 0.0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (std::size_t f = 0; f < folds; ++f) {
    train.clear();
    test.clear();
    for (std::size_t i = 0; i < data.size(); ++i) (label[i] == f ? test : train).push_back(i);
    const auto model = fit_fn(data.subset(train));
    double sse = 0.0;
    for (std::size_t i : test) {
      const double r = data.y(i) - model(data.row(i));
      sse += r * r;
    }
    total += sse / static_cast<double>(test.size());
  }
  return total / static_cast<double>(folds);
}

}  // namespace cvxreg
