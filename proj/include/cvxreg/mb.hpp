#pragma once

// Lloyd-style max-affine fitting: alternate per-cell least squares with
// reassignment of every point to its maximal hyperplane. The iteration is
// not guaranteed to converge, so the best iterate seen is returned and the
// loop stops at a fixed point, on a repeated assignment, or after
// max_lloyd_iters passes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "cvxreg/core.hpp"
#include "cvxreg/cv.hpp"
#include "cvxreg/linalg.hpp"
#include "cvxreg/rng.hpp"

namespace cvxreg {

/// Best training MSE recorded after each Lloyd pass of the final fit.
struct MbTrace {
  std::vector<double> best_train_mse;
};

struct MbFit {
  MaxAffineModel model;
  std::size_t k_selected = 1;
  std::vector<double> cv_mse;  // cv_mse[K-1] for K = 1..k_max
};

namespace detail {

struct LloydResult {
  std::vector<double> theta;  // K' rows of d
  double sse = std::numeric_limits<double>::infinity();
};

class LloydFitter {
 public:
  LloydFitter(const Dataset& data, const FitConfig& cfg)
      : cfg_(cfg),
        stdz_(linalg::Standardizer::fit(data)),
        design_(data, stdz_),
        n_(data.size()),
        p_(data.dim()),
        d_(p_ + 1),
        s_(design_.stat_size()),
        solver_(p_) {}

  LloydResult run(std::size_t K, std::uint64_t seed, MbTrace* trace) {
    K = std::max<std::size_t>(1, std::min(K, n_));
    LloydResult best = single_plane();
    if (K == 1) {
      if (trace) trace->best_train_mse.push_back(best.sse / static_cast<double>(n_));
      return best;
    }
    for (std::size_t r = 0; r < cfg_.mb_restarts; ++r) {
      Rng rng(mix_seed(seed, r));
      LloydResult cand = lloyd(initial_assignment(K, rng), best.sse, trace);
      if (cand.sse < best.sse) best = std::move(cand);
    }
    return best;
  }

  MaxAffineModel to_model(const LloydResult& res) const {
    std::vector<Hyperplane> planes;
    for (std::size_t k = 0; k * d_ < res.theta.size(); ++k) {
      planes.push_back(stdz_.to_original({&res.theta[k * d_], d_}));
    }
    return MaxAffineModel(std::move(planes));
  }

 private:
  LloydResult single_plane() {
    std::vector<double> stats(s_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) design_.accumulate(i, stats.data());
    LloydResult res;
    res.theta.resize(d_);
    if (!solver_.solve(stats.data(), res.theta.data())) {
      throw NumericalError("least-squares fit failed");
    }
    res.sse = sse(res.theta);
    return res;
  }

  // Voronoi cells around K distinct randomly chosen observations.
  std::vector<std::size_t> initial_assignment(std::size_t K, Rng& rng) const {
    std::vector<std::size_t> idx(n_);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < K; ++k) std::swap(idx[k], idx[k + rng.index(n_ - k)]);
    std::vector<std::size_t> label(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      const double* a = design_.aug(i);
      for (std::size_t k = 0; k < K; ++k) {
        const double* b = design_.aug(idx[k]);
        double dist = 0.0;
        for (std::size_t j = 1; j < d_; ++j) dist += (a[j] - b[j]) * (a[j] - b[j]);
        if (dist < best) {
          best = dist;
          arg = k;
        }
      }
      label[i] = arg;
    }
    return label;
  }

  double sse(const std::vector<double>& theta) const {
    const std::size_t K = theta.size() / d_;
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) best = std::max(best, design_.plane_value(&theta[k * d_], i));
      const double r = design_.y(i) - best;
      total += r * r;
    }
    return total;
  }

  // Per-cell least squares; empty cells are dropped.
  std::vector<double> fit_cells(const std::vector<std::size_t>& label, std::size_t K) {
    std::vector<double> stats(K * s_, 0.0);
    std::vector<std::size_t> count(K, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      design_.accumulate(i, &stats[label[i] * s_]);
      ++count[label[i]];
    }
    std::vector<double> theta;
    std::vector<double> th(d_);
    for (std::size_t k = 0; k < K; ++k) {
      if (count[k] == 0) continue;
      if (solver_.solve(&stats[k * s_], th.data())) theta.insert(theta.end(), th.begin(), th.end());
    }
    return theta;
  }

  static std::uint64_t hash_labels(const std::vector<std::size_t>& label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t v : label) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  LloydResult lloyd(std::vector<std::size_t> label, double floor_sse, MbTrace* trace) {
    LloydResult best;
    double running = floor_sse;
    std::unordered_set<std::uint64_t> seen{hash_labels(label)};
    for (std::size_t it = 0; it < cfg_.max_lloyd_iters; ++it) {
      const std::size_t K = *std::max_element(label.begin(), label.end()) + 1;
      auto theta = fit_cells(label, K);
      if (theta.empty()) break;

      // One pass gives both the training SSE and the argmax reassignment.
      const std::size_t planes = theta.size() / d_;
      design_.plane_values(theta, values_);
      std::vector<std::size_t> next(n_);
      double cur = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        const double* row = values_.data() + i * planes;
        for (std::size_t k = 0; k < planes; ++k) {
          const double v = row[k];
          if (v > top) {
            top = v;
            arg = k;
          }
        }
        next[i] = arg;
        const double r = design_.y(i) - top;
        cur += r * r;
      }
      if (cur < best.sse) {
        best.sse = cur;
        best.theta = theta;
      }
      running = std::min(running, cur);
      if (trace) trace->best_train_mse.push_back(running / static_cast<double>(n_));

      // Relabel densely so empty planes vanish from the next pass.
      std::vector<std::size_t> remap(planes, planes);
      std::size_t used = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (remap[next[i]] == planes) remap[next[i]] = used++;
        next[i] = remap[next[i]];
      }
      if (next == label) break;
      if (!seen.insert(hash_labels(next)).second) break;
      label = std::move(next);
    }
    return best;
  }

  const FitConfig& cfg_;
  linalg::Standardizer stdz_;
  linalg::Design design_;
  std::size_t n_, p_, d_, s_;
  linalg::OlsSolver solver_;
  linalg::Design::RowMat values_;
};

}  // namespace detail

/// Lloyd fit with the number of hyperplanes fixed at K (the single-plane
/// least-squares fit always competes, so the result is never worse than it).
inline MaxAffineModel fit_mb_fixed_k(const Dataset& data, std::size_t K, const FitConfig& cfg,
                                     MbTrace* trace = nullptr) {
  cfg.validate(data.dim());
  if (K == 0) throw DataError("number of hyperplanes must be positive");
  detail::LloydFitter fitter(data, cfg);
  return fitter.to_model(fitter.run(K, cfg.seed, trace));
}

/// Lloyd fitting with K in 1..k_max chosen by k-fold cross-validation.
inline MbFit fit_mb_detailed(const Dataset& data, const FitConfig& cfg, MbTrace* trace = nullptr) {
  cfg.validate(data.dim());
  const std::size_t n = data.size();
  const std::size_t min_cell = cfg.resolved_min_cell(data.dim());
  if (n < min_cell) {
    throw DataError("MB fitting needs at least min_cell = " + std::to_string(min_cell) +
                    " observations, got " + std::to_string(n));
  }
  if (n < cfg.cv_folds) throw DataError("MB fitting needs at least cv_folds observations");

  const std::size_t k_max = cfg.resolved_k_max(n);
  const std::uint64_t fold_seed = mix_seed(cfg.seed, 0xB0);
  MbFit out;
  out.cv_mse.reserve(k_max);
  for (std::size_t K = 1; K <= k_max; ++K) {
    FitConfig sub = cfg;
    sub.seed = mix_seed(cfg.seed, K);
    out.cv_mse.push_back(kfold_cv(data, cfg.cv_folds, fold_seed, [&](const Dataset& train) {
      detail::LloydFitter fitter(train, sub);
      return fitter.to_model(fitter.run(K, sub.seed, nullptr));
    }));
  }

  double var = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += data.y(i);
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) var += (data.y(i) - mean) * (data.y(i) - mean);
  var /= static_cast<double>(n);
  const double best = *std::min_element(out.cv_mse.begin(), out.cv_mse.end());
  const double tol = 1e-9 * best + 1e-12 * var;
  for (std::size_t K = 1; K <= k_max; ++K) {
    if (out.cv_mse[K - 1] <= best + tol) {
      out.k_selected = K;
      break;
    }
  }
  FitConfig fin = cfg;
  fin.seed = mix_seed(cfg.seed, 0xF1);
  out.model = fit_mb_fixed_k(data, out.k_selected, fin, trace);
  return out;
}

inline MaxAffineModel fit_mb(const Dataset& data, const FitConfig& cfg) {
  return fit_mb_detailed(data, cfg).model;
}

}  // namespace cvxreg
