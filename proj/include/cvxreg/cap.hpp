#pragma once

// Convex adaptive partitioning.
//
// The model is the max over one least-squares hyperplane per cell of a
// partition of the training points. Starting from a single cell, each round
// proposes every (cell, direction, knot) split, scores the resulting
// max-affine model by k-fold cross-validated MSE and accepts the best
// proposal that improves on the current partition. After each accepted
// split the cells are redefined by the maximal hyperplanes (reassign to the
// argmax, refit) for as long as training MSE does not increase.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>
#include <vector>

#include "cvxreg/core.hpp"
#include "cvxreg/cv.hpp"
#include "cvxreg/linalg.hpp"
#include "cvxreg/rng.hpp"

namespace cvxreg {

enum class SplitMode { cardinal, random };

/// Where CAP looks for splits. Cardinal mode uses the coordinate axes;
/// random mode either uses a fixed list of unit directions or draws
/// `per_round` fresh uniform directions every refinement round.
struct SplitDirections {
  SplitMode mode = SplitMode::cardinal;
  std::vector<std::vector<double>> directions;
  std::size_t per_round = 0;  // 0 -> p
  std::uint64_t seed = 0;

  static SplitDirections cardinal() { return {}; }

  static SplitDirections random(std::size_t per_round, std::uint64_t seed) {
    SplitDirections d;
    d.mode = SplitMode::random;
    d.per_round = per_round;
    d.seed = seed;
    return d;
  }

  static SplitDirections fixed(std::vector<std::vector<double>> dirs) {
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      double n2 = 0.0;
      for (double v : dirs[k]) n2 += v * v;
      if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) {
        throw DataError("split direction " + std::to_string(k) + " is not a unit vector");
      }
    }
    SplitDirections d;
    d.mode = SplitMode::random;
    d.directions = std::move(dirs);
    return d;
  }
};

/// Training and CV MSE after every accepted refinement step.
struct CapTrace {
  std::vector<double> train_mse;
  std::vector<double> cv_mse;
};

namespace detail {

class CapFitter {
 public:
  CapFitter(const Dataset& data, const FitConfig& cfg, const SplitDirections& dirs)
      : cfg_(cfg),
        dirs_(dirs),
        stdz_(linalg::Standardizer::fit(data)),
        design_(data, stdz_),
        n_(data.size()),
        p_(data.dim()),
        d_(p_ + 1),
        s_(design_.stat_size()),
        folds_(cfg.cv_folds),
        label_(assign_folds(n_, folds_, mix_seed(cfg.seed, 0xCA9))),
        solver_(p_),
        dir_rng_(dirs.seed) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n_; ++i) mean += design_.y(i);
    mean /= static_cast<double>(n_);
    double ss = 0.0;
    for (std::size_t i = 0; i < n_; ++i) ss += (design_.y(i) - mean) * (design_.y(i) - mean);
    improve_tol_ = 1e-12 * ss;
    min_cell_ = cfg.resolved_min_cell(p_);
    k_max_ = cfg.resolved_k_max(n_);
  }

  MaxAffineModel run(CapTrace* trace) {
    cells_.assign(1, std::vector<std::size_t>(n_));
    std::iota(cells_[0].begin(), cells_[0].end(), std::size_t{0});

    for (;;) {
      build_cell_planes();
      const double base_sse = fold_baseline();
      if (trace && trace->cv_mse.empty()) {
        trace->cv_mse.push_back(base_sse / static_cast<double>(n_));
        trace->train_mse.push_back(train_sse(full_theta_) / static_cast<double>(n_));
      }
      if (cells_.size() >= k_max_) break;

      draw_round_directions();
      std::set<std::tuple<std::size_t, std::size_t, std::size_t>> banned;
      bool accepted = false;
      for (;;) {
        Proposal best = search(base_sse - improve_tol_, banned);
        if (!best.valid) break;
        if (try_accept(best)) {
          accepted = true;
          if (trace) {
            trace->cv_mse.push_back(best.sse / static_cast<double>(n_));
          }
          break;
        }
        banned.insert({best.cell, best.dir, best.pos});
      }
      if (!accepted) break;
      refit();
      if (trace) {
        build_cell_planes();
        trace->train_mse.push_back(train_sse(full_theta_) / static_cast<double>(n_));
      }
    }

    build_cell_planes();
    std::vector<Hyperplane> planes;
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (full_valid_[c]) planes.push_back(stdz_.to_original({&full_theta_[c * d_], d_}));
    }
    return MaxAffineModel(std::move(planes));
  }

 private:
  struct Proposal {
    bool valid = false;
    std::size_t cell = 0, dir = 0, pos = 0;
    double sse = std::numeric_limits<double>::infinity();
  };

  // Full-data and per-fold training hyperplanes for every current cell.
  void build_cell_planes() {
    const std::size_t K = cells_.size();
    cell_full_.assign(K * s_, 0.0);
    cell_fold_.assign(K * folds_ * s_, 0.0);
    full_theta_.assign(K * d_, 0.0);
    full_valid_.assign(K, 0);
    fold_theta_.assign(K * folds_ * d_, 0.0);
    fold_valid_.assign(K * folds_, 0);
    std::vector<double> train(s_);
    for (std::size_t c = 0; c < K; ++c) {
      double* full = &cell_full_[c * s_];
      for (std::size_t i : cells_[c]) {
        design_.accumulate(i, full);
        design_.accumulate(i, &cell_fold_[(c * folds_ + label_[i]) * s_]);
      }
      full_valid_[c] = solver_.solve(full, &full_theta_[c * d_]);
      for (std::size_t f = 0; f < folds_; ++f) {
        const double* held = &cell_fold_[(c * folds_ + f) * s_];
        for (std::size_t t = 0; t < s_; ++t) train[t] = full[t] - held[t];
        fold_valid_[c * folds_ + f] =
            solver_.solve(train.data(), &fold_theta_[(c * folds_ + f) * d_]);
      }
    }
  }

  // Held-out SSE of the current partition; caches the best and second-best
  // fold-model values at every point so a split of cell c can be scored
  // without touching the other cells.
  double fold_baseline() {
    const double ninf = -std::numeric_limits<double>::infinity();
    top1_.assign(n_, ninf);
    top2_.assign(n_, ninf);
    top1_cell_.assign(n_, 0);
    double sse = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t f = label_[i];
      for (std::size_t c = 0; c < cells_.size(); ++c) {
        if (!fold_valid_[c * folds_ + f]) continue;
        const double v = design_.plane_value(&fold_theta_[(c * folds_ + f) * d_], i);
        if (v > top1_[i]) {
          top2_[i] = top1_[i];
          top1_[i] = v;
          top1_cell_[i] = c;
        } else if (v > top2_[i]) {
          top2_[i] = v;
        }
      }
      const double r = design_.y(i) - top1_[i];
      sse += r * r;
    }
    return std::isfinite(sse) ? sse : std::numeric_limits<double>::max();
  }

  double train_sse(const std::vector<double>& theta) const {
    double sse = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < cells_.size(); ++c) {
        if (!full_valid_[c]) continue;
        best = std::max(best, design_.plane_value(&theta[c * d_], i));
      }
      const double r = design_.y(i) - best;
      sse += r * r;
    }
    return sse;
  }

  void draw_round_directions() {
    round_dirs_.clear();
    if (dirs_.mode == SplitMode::cardinal) {
      for (std::size_t j = 0; j < p_; ++j) {
        std::vector<double> e(p_, 0.0);
        e[j] = 1.0;
        round_dirs_.push_back(std::move(e));
      }
    } else if (!dirs_.directions.empty()) {
      for (const auto& u : dirs_.directions) {
        if (u.size() != p_) throw DataError("split direction dimension does not match data");
      }
      round_dirs_ = dirs_.directions;
    } else {
      const std::size_t count = dirs_.per_round != 0 ? dirs_.per_round : p_;
      for (std::size_t k = 0; k < count; ++k) round_dirs_.push_back(dir_rng_.unit_vector(p_));
    }
  }

  // Cell members ordered by projection onto direction u, index as tiebreak.
  std::vector<std::size_t> sorted_members(std::size_t c, const std::vector<double>& u) const {
    const auto& members = cells_[c];
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(members.size());
    for (std::size_t i : members) {
      const double* a = design_.aug(i);
      double proj = 0.0;
      for (std::size_t j = 0; j < p_; ++j) proj += u[j] * a[j + 1];
      keyed.emplace_back(proj, i);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> out;
    out.reserve(keyed.size());
    for (const auto& kv : keyed) out.push_back(kv.second);
    return out;
  }

  std::vector<std::size_t> knot_positions(std::size_t m) const {
    std::vector<std::size_t> pos;
    const std::size_t q = cfg_.split_knots;
    for (std::size_t j = 1; j <= q; ++j) {
      const std::size_t k = j * m / (q + 1);
      if (k < min_cell_ || m - k < min_cell_) continue;
      if (!pos.empty() && pos.back() == k) continue;
      pos.push_back(k);
    }
    return pos;
  }

  Proposal search(double threshold,
                  const std::set<std::tuple<std::size_t, std::size_t, std::size_t>>& banned) {
    Proposal best;
    double bound = threshold;
    std::vector<double> left_fold(folds_ * s_);
    std::vector<double> left_full(s_), train(s_);
    std::vector<double> theta_l(folds_ * d_), theta_r(folds_ * d_);
    std::vector<char> valid_l(folds_), valid_r(folds_);

    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const std::size_t m = cells_[c].size();
      if (m < 2 * min_cell_) continue;
      const auto knots = knot_positions(m);
      if (knots.empty()) continue;
      const double* cell_full = &cell_full_[c * s_];
      const double* cell_fold = &cell_fold_[c * folds_ * s_];

      for (std::size_t dir = 0; dir < round_dirs_.size(); ++dir) {
        const auto order = sorted_members(c, round_dirs_[dir]);
        std::fill(left_fold.begin(), left_fold.end(), 0.0);
        std::size_t filled = 0;
        for (std::size_t pos : knots) {
          for (; filled < pos; ++filled) {
            const std::size_t i = order[filled];
            design_.accumulate(i, &left_fold[label_[i] * s_]);
          }
          if (banned.count({c, dir, pos})) continue;

          std::fill(left_full.begin(), left_full.end(), 0.0);
          for (std::size_t f = 0; f < folds_; ++f)
            for (std::size_t t = 0; t < s_; ++t) left_full[t] += left_fold[f * s_ + t];
          for (std::size_t f = 0; f < folds_; ++f) {
            const double* lf = &left_fold[f * s_];
            const double* cf = &cell_fold[f * s_];
            for (std::size_t t = 0; t < s_; ++t) train[t] = left_full[t] - lf[t];
            valid_l[f] = solver_.solve(train.data(), &theta_l[f * d_]);
            for (std::size_t t = 0; t < s_; ++t)
              train[t] = (cell_full[t] - left_full[t]) - (cf[t] - lf[t]);
            valid_r[f] = solver_.solve(train.data(), &theta_r[f * d_]);
          }

          const double sse = score(c, theta_l, valid_l, theta_r, valid_r, bound);
          if (sse < bound) {
            bound = sse;
            best = Proposal{true, c, dir, pos, sse};
          }
        }
      }
    }
    return best;
  }

  // Held-out SSE with cell c replaced by the two fold-fitted halves;
  // returns as soon as the running sum reaches `bound`.
  double score(std::size_t c, const std::vector<double>& theta_l, const std::vector<char>& valid_l,
               const std::vector<double>& theta_r, const std::vector<char>& valid_r,
               double bound) const {
    double sse = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t f = label_[i];
      double v = top1_cell_[i] == c ? top2_[i] : top1_[i];
      if (valid_l[f]) v = std::max(v, design_.plane_value(&theta_l[f * d_], i));
      if (valid_r[f]) v = std::max(v, design_.plane_value(&theta_r[f * d_], i));
      const double r = design_.y(i) - v;
      sse += r * r;
      if (!(sse < bound)) return std::numeric_limits<double>::infinity();
    }
    return sse;
  }

  bool try_accept(const Proposal& prop) {
    const auto order = sorted_members(prop.cell, round_dirs_[prop.dir]);
    std::vector<std::size_t> left(order.begin(), order.begin() + prop.pos);
    std::vector<std::size_t> right(order.begin() + prop.pos, order.end());
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());

    auto old_cells = cells_;
    const double old_sse = train_sse(full_theta_);
    cells_[prop.cell] = std::move(left);
    cells_.push_back(std::move(right));
    build_full_planes();
    const double new_sse = train_sse(full_theta_);
    if (new_sse > old_sse * (1.0 + 1e-12) + 1e-300) {
      cells_ = std::move(old_cells);
      build_full_planes();
      return false;
    }
    return true;
  }

  void build_full_planes() {
    const std::size_t K = cells_.size();
    full_theta_.assign(K * d_, 0.0);
    full_valid_.assign(K, 0);
    std::vector<double> stats(s_);
    for (std::size_t c = 0; c < K; ++c) {
      std::fill(stats.begin(), stats.end(), 0.0);
      for (std::size_t i : cells_[c]) design_.accumulate(i, stats.data());
      full_valid_[c] = solver_.solve(stats.data(), &full_theta_[c * d_]);
    }
  }

  void refit() {
    build_full_planes();
    double cur = train_sse(full_theta_);
    for (std::size_t it = 0; it < cfg_.max_refit_iters; ++it) {
      std::vector<std::vector<std::size_t>> next(cells_.size());
      for (std::size_t i = 0; i < n_; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t c = 0; c < cells_.size(); ++c) {
          if (!full_valid_[c]) continue;
          const double v = design_.plane_value(&full_theta_[c * d_], i);
          if (v > best) {
            best = v;
            arg = c;
          }
        }
        next[arg].push_back(i);
      }
      next.erase(std::remove_if(next.begin(), next.end(), [](const auto& v) { return v.empty(); }),
                 next.end());
      if (next == cells_) break;
      auto prev = std::move(cells_);
      auto prev_theta = full_theta_;
      auto prev_valid = full_valid_;
      cells_ = std::move(next);
      build_full_planes();
      const double sse = train_sse(full_theta_);
      if (sse > cur * (1.0 + 1e-12) + 1e-300) {
        cells_ = std::move(prev);
        full_theta_ = std::move(prev_theta);
        full_valid_ = std::move(prev_valid);
        break;
      }
      cur = sse;
    }
  }

  const FitConfig& cfg_;
  const SplitDirections& dirs_;
  linalg::Standardizer stdz_;
  linalg::Design design_;
  std::size_t n_, p_, d_, s_, folds_;
  std::vector<std::size_t> label_;
  linalg::OlsSolver solver_;
  Rng dir_rng_;
  double improve_tol_ = 0.0;
  std::size_t min_cell_ = 0, k_max_ = 0;

  std::vector<std::vector<std::size_t>> cells_;
  std::vector<std::vector<double>> round_dirs_;
  std::vector<double> cell_full_, cell_fold_;
  std::vector<double> full_theta_, fold_theta_;
  std::vector<char> full_valid_, fold_valid_;
  std::vector<double> top1_, top2_;
  std::vector<std::size_t> top1_cell_;
};

}  // namespace detail

/// Fit a max-affine model by convex adaptive partitioning. Deterministic
/// in (data, cfg, dirs).
inline MaxAffineModel fit_cap(const Dataset& data, const FitConfig& cfg,
                              const SplitDirections& dirs = SplitDirections::cardinal(),
                              CapTrace* trace = nullptr) {
  cfg.validate(data.dim());
  const std::size_t min_cell = cfg.resolved_min_cell(data.dim());
  if (data.size() < min_cell) {
    throw DataError("CAP needs at least min_cell = " + std::to_string(min_cell) +
                    " observations, got " + std::to_string(data.size()));
  }
  if (data.size() < cfg.cv_folds) {
    throw DataError("CAP needs at least cv_folds observations");
  }
  detail::CapFitter fitter(data, cfg, dirs);
  return fitter.run(trace);
}

}  // namespace cvxreg
