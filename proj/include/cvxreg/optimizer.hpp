#pragma once

// Box-constrained minimization of a max-affine model or an ensemble of
// them, through the epigraph linear program
//
//   min (1/M) sum_m t_m
//   s.t. t_m >= alpha_mk + beta_mk' x   for every member m and plane k
//        lower <= x <= upper
//
// solved with a bounded-variable primal simplex on a compact tableau. Each
// t_m is boxed between max_k min_box(plane) and max_k max_box(plane), so the
// all-slack basis with x at its lower bounds and t at its upper bounds is
// feasible from the start and no phase one is needed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cvxreg/core.hpp"

namespace cvxreg {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  bool empty() const {
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (lower[j] > upper[j]) return true;
    return false;
  }
};

enum class SolveStatus { optimal, infeasible, numerical_failure };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct SolveResult {
  std::vector<double> x_star;
  double value = std::numeric_limits<double>::quiet_NaN();
  SolveStatus status = SolveStatus::numerical_failure;
  double lp_objective = std::numeric_limits<double>::quiet_NaN();
  std::size_t pivots = 0;
};

namespace detail {

class EpigraphSimplex {
 public:
  EpigraphSimplex(std::vector<const MaxAffineModel*> groups, const Box& box, double tol)
      : groups_(std::move(groups)), box_(box), tol_(tol), p_(box.dim()) {}

  SolveResult solve() {
    SolveResult res;
    fixed_x_.assign(p_, 0.0);
    active_.clear();
    for (std::size_t j = 0; j < p_; ++j) {
      bool moves = false;
      for (const auto* g : groups_)
        for (const auto& h : g->hyperplanes()) moves = moves || h.beta[j] != 0.0;
      if (moves && box_.lower[j] < box_.upper[j]) {
        active_.push_back(j);
      } else {
        fixed_x_[j] = 0.5 * (box_.lower[j] + box_.upper[j]);
      }
    }
    if (active_.empty()) return finish(fixed_x_, std::numeric_limits<double>::quiet_NaN(), 0);

    build();
    const std::size_t max_pivots = 100 * (rows_ + cols_) + 1000;
    std::size_t pivots = 0;
    std::size_t since_refactor = 0;
    std::size_t degenerate_run = 0;
    bool bland = false;

    for (;;) {
      std::size_t q = choose_entering(bland);
      if (q == npos || since_refactor >= kRefactorEvery) {
        if (!refactor()) return failure(pivots);
        since_refactor = 0;
        q = choose_entering(bland);
        if (q == npos) break;
      }
      if (++pivots > max_pivots) return failure(pivots);
      ++since_refactor;

      const double dir = reduced_[q] < 0.0 ? 1.0 : -1.0;
      const std::size_t nq = nonbasic_[q];
      const double flip = hi_[nq] - lo_[nq];
      const auto [leave, step] = bland ? ratio_test_bland(q, dir) : ratio_test_harris(q, dir);
      const bool bound_flip = leave == npos || flip <= step;
      const double theta = bound_flip ? flip : step;
      if (!std::isfinite(theta)) return failure(pivots);

      for (std::size_t r = 0; r < rows_; ++r) val_[basic_[r]] += tab_[r * cols_ + q] * dir * theta;
      if (bound_flip) {
        val_[nq] = dir > 0.0 ? hi_[nq] : lo_[nq];
      } else {
        val_[nq] += dir * theta;
        const std::size_t b = basic_[leave];
        val_[b] = tab_[leave * cols_ + q] * dir < 0.0 ? lo_[b] : hi_[b];
        pivot(leave, q);
      }

      if (theta <= 1e-12) {
        if (++degenerate_run > 50) bland = true;
      } else {
        degenerate_run = 0;
      }
    }

    std::vector<double> x = fixed_x_;
    for (std::size_t a = 0; a < active_.size(); ++a) {
      x[active_[a]] = std::clamp(val_[a], box_.lower[active_[a]], box_.upper[active_[a]]);
    }
    double lp = 0.0;
    for (std::size_t m = 0; m < groups_.size(); ++m) lp += val_[active_.size() + m];
    lp /= static_cast<double>(groups_.size());
    return finish(x, lp, pivots);
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kFeasTol = 1e-9;
  static constexpr std::size_t kRefactorEvery = 100;

  static SolveResult failure(std::size_t pivots) {
    SolveResult res;
    res.status = SolveStatus::numerical_failure;
    res.pivots = pivots;
    return res;
  }

  // Distance the basic variable in row r may travel at unit rate before it
  // hits a bound, or infinity.
  double room(std::size_t r, double rate) const {
    const std::size_t b = basic_[r];
    if (rate < 0.0) return std::max(val_[b] - lo_[b], 0.0);
    return std::isfinite(hi_[b]) ? std::max(hi_[b] - val_[b], 0.0) : std::numeric_limits<double>::infinity();
  }

  // Two passes: bound the step with every bound relaxed by kFeasTol, then
  // take the largest pivot among rows blocking within that step.
  std::pair<std::size_t, double> ratio_test_harris(std::size_t q, double dir) const {
    double relaxed = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows_; ++r) {
      const double rate = tab_[r * cols_ + q] * dir;
      if (std::abs(rate) <= kPivotTol) continue;
      relaxed = std::min(relaxed, (room(r, rate) + kFeasTol) / std::abs(rate));
    }
    std::size_t leave = npos;
    double best = 0.0, step = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows_; ++r) {
      const double rate = tab_[r * cols_ + q] * dir;
      if (std::abs(rate) <= kPivotTol) continue;
      const double exact = room(r, rate) / std::abs(rate);
      if (exact <= relaxed && std::abs(rate) > best) {
        best = std::abs(rate);
        leave = r;
        step = exact;
      }
    }
    return {leave, step};
  }

  // Textbook minimum ratio, ties to the smallest variable index.
  std::pair<std::size_t, double> ratio_test_bland(std::size_t q, double dir) const {
    std::size_t leave = npos;
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows_; ++r) {
      const double rate = tab_[r * cols_ + q] * dir;
      if (std::abs(rate) <= kPivotTol) continue;
      const double exact = room(r, rate) / std::abs(rate);
      if (exact < step - 1e-15 || (exact <= step + 1e-15 && leave != npos && basic_[r] < basic_[leave])) {
        step = std::min(step, exact);
        leave = r;
      }
    }
    return {leave, step};
  }

  // Rebuild values, tableau and reduced costs from the original rows. The
  // nonbasic slacks mark active planes; together with the nonbasic
  // structural variables they determine the basic structural ones.
  bool refactor() {
    std::vector<std::size_t> sb, sn_rows;
    std::vector<std::size_t> row_of_basic(cols_ + rows_, npos);
    for (std::size_t r = 0; r < rows_; ++r) {
      row_of_basic[basic_[r]] = r;
      if (basic_[r] < cols_) sb.push_back(basic_[r]);
    }
    for (std::size_t q = 0; q < cols_; ++q) {
      const std::size_t v = nonbasic_[q];
      if (v >= cols_) {
        sn_rows.push_back(v - cols_);
        val_[v] = 0.0;
      } else {
        val_[v] = std::abs(val_[v] - lo_[v]) <= std::abs(val_[v] - hi_[v]) ? lo_[v] : hi_[v];
      }
    }
    const std::size_t k = sb.size();
    if (sn_rows.size() != k) return false;

    auto a0 = [&](std::size_t row, std::size_t var) { return tab0_[row * cols_ + var]; };
    Eigen::MatrixXd E(k, k);
    Eigen::VectorXd rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t row = sn_rows[i];
      for (std::size_t c = 0; c < k; ++c) E(i, c) = a0(row, sb[c]);
      double v = offset_[row];
      for (std::size_t q = 0; q < cols_; ++q) {
        if (nonbasic_[q] < cols_) v -= a0(row, nonbasic_[q]) * val_[nonbasic_[q]];
      }
      rhs(i) = v;
    }

    // G(c, q) = d(basic structural c) / d(nonbasic q).
    Eigen::MatrixXd G(k, cols_);
    if (k > 0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(E);
      if (lu.rank() < static_cast<Eigen::Index>(k)) return false;
      const Eigen::VectorXd zb = lu.solve(rhs);
      for (std::size_t c = 0; c < k; ++c) val_[sb[c]] = zb(c);
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(k, cols_);
      for (std::size_t q = 0; q < cols_; ++q) {
        const std::size_t v = nonbasic_[q];
        if (v < cols_) {
          for (std::size_t i = 0; i < k; ++i) B(i, q) = -a0(sn_rows[i], v);
        } else {
          B(static_cast<Eigen::Index>(std::find(sn_rows.begin(), sn_rows.end(), v - cols_) - sn_rows.begin()), q) = 1.0;
        }
      }
      G = lu.solve(B);
    }

    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t r = row_of_basic[sb[c]];
      for (std::size_t q = 0; q < cols_; ++q) tab_[r * cols_ + q] = G(c, q);
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::size_t b = basic_[r];
      if (b < cols_) continue;
      const std::size_t row = b - cols_;
      double s = -offset_[row];
      for (std::size_t v = 0; v < cols_; ++v) s += a0(row, v) * val_[v];
      val_[b] = s;
      for (std::size_t q = 0; q < cols_; ++q) {
        const std::size_t v = nonbasic_[q];
        double t = v < cols_ ? a0(row, v) : 0.0;
        for (std::size_t c = 0; c < k; ++c) t += a0(row, sb[c]) * G(c, q);
        tab_[r * cols_ + q] = t;
      }
    }

    for (std::size_t q = 0; q < cols_; ++q) {
      double d = cost_[nonbasic_[q]];
      for (std::size_t c = 0; c < k; ++c) d += cost_[sb[c]] * G(c, q);
      reduced_[q] = d;
    }
    return true;
  }

  // Variables: active x coordinates, then t_m, then one slack per plane.
  void build() {
    const std::size_t nx = active_.size();
    const std::size_t M = groups_.size();
    rows_ = 0;
    for (const auto* g : groups_) rows_ += g->size();
    cols_ = nx + M;
    const std::size_t nvar = cols_ + rows_;
    lo_.assign(nvar, 0.0);
    hi_.assign(nvar, std::numeric_limits<double>::infinity());
    val_.assign(nvar, 0.0);
    cost_.assign(nvar, 0.0);
    for (std::size_t a = 0; a < nx; ++a) {
      lo_[a] = box_.lower[active_[a]];
      hi_[a] = box_.upper[active_[a]];
      val_[a] = lo_[a];
    }

    tab_.assign(rows_ * cols_, 0.0);
    basic_.resize(rows_);
    nonbasic_.resize(cols_);
    for (std::size_t q = 0; q < cols_; ++q) nonbasic_[q] = q;

    std::size_t r = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t tm = nx + m;
      double t_lo = -std::numeric_limits<double>::infinity();
      double t_hi = -std::numeric_limits<double>::infinity();
      const std::size_t first_row = r;
      for (const auto& h : groups_[m]->hyperplanes()) {
        double offset = h.alpha;
        for (std::size_t j = 0; j < p_; ++j) {
          if (std::find(active_.begin(), active_.end(), j) == active_.end()) offset += h.beta[j] * fixed_x_[j];
        }
        double pmin = offset, pmax = offset;
        for (std::size_t a = 0; a < nx; ++a) {
          const double b = h.beta[active_[a]];
          pmin += std::min(b * lo_[a], b * hi_[a]);
          pmax += std::max(b * lo_[a], b * hi_[a]);
          tab_[r * cols_ + a] = -b;
        }
        tab_[r * cols_ + tm] = 1.0;
        offset_.push_back(offset);
        t_lo = std::max(t_lo, pmin);
        t_hi = std::max(t_hi, pmax);
        basic_[r] = cols_ + r;
        ++r;
      }
      lo_[tm] = t_lo;
      hi_[tm] = t_hi;
      val_[tm] = t_hi;
      cost_[tm] = 1.0 / static_cast<double>(M);
      for (std::size_t k = first_row; k < r; ++k) {
        double s = val_[tm] - offset_[k];
        for (std::size_t a = 0; a < nx; ++a) s += tab_[k * cols_ + a] * val_[a];
        val_[cols_ + k] = std::max(s, 0.0);
      }
    }
    tab0_ = tab_;
    reduced_.assign(cols_, 0.0);
    for (std::size_t q = 0; q < cols_; ++q) reduced_[q] = cost_[nonbasic_[q]];
  }

  std::size_t choose_entering(bool bland) const {
    std::size_t best = npos;
    double best_score = 0.0;
    const double dtol = 1e-3 * tol_ / static_cast<double>(groups_.size());
    for (std::size_t q = 0; q < cols_; ++q) {
      const std::size_t v = nonbasic_[q];
      if (!(hi_[v] > lo_[v])) continue;
      const double d = reduced_[q];
      const bool can_up = d < -dtol && val_[v] < hi_[v];
      const bool can_down = d > dtol && val_[v] > lo_[v];
      if (!can_up && !can_down) continue;
      if (bland) {
        if (best == npos || v < nonbasic_[best]) best = q;
      } else if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = q;
      }
    }
    return best;
  }

  // tab_ holds d(basic_r)/d(nonbasic_q); swap basic row r with column q.
  void pivot(std::size_t r, std::size_t q) {
    double* prow = &tab_[r * cols_];
    const double a = prow[q];
    for (std::size_t c = 0; c < cols_; ++c) prow[c] = c == q ? 1.0 / a : -prow[c] / a;
    for (std::size_t i = 0; i < rows_; ++i) {
      if (i == r) continue;
      double* row = &tab_[i * cols_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < cols_; ++c) row[c] = c == q ? f * prow[q] : row[c] + f * prow[c];
    }
    const double dq = reduced_[q];
    for (std::size_t c = 0; c < cols_; ++c) {
      reduced_[c] = c == q ? dq * prow[q] : reduced_[c] + dq * prow[c];
    }
    std::swap(basic_[r], nonbasic_[q]);
  }

  SolveResult finish(const std::vector<double>& x, double lp, std::size_t pivots) const {
    SolveResult res;
    res.x_star = x;
    res.pivots = pivots;
    double total = 0.0;
    for (const auto* g : groups_) total += g->value_unchecked(x.data());
    res.value = total / static_cast<double>(groups_.size());
    res.lp_objective = std::isnan(lp) ? res.value : lp;
    const double consistency = std::max(tol_, 1e-7) * (1.0 + std::abs(res.value));
    res.status = std::abs(res.lp_objective - res.value) <= consistency ? SolveStatus::optimal
                                                                       : SolveStatus::numerical_failure;
    return res;
  }

  std::vector<const MaxAffineModel*> groups_;
  const Box& box_;
  double tol_;
  std::size_t p_;
  std::vector<std::size_t> active_;
  std::vector<double> fixed_x_;

  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> tab_, tab0_;  // current tableau, original rows
  std::vector<double> lo_, hi_, val_, cost_, reduced_, offset_;
  std::vector<std::size_t> basic_, nonbasic_;
};

inline SolveResult minimize_groups(std::vector<const MaxAffineModel*> groups, std::size_t p,
                                   const Box& box, double tol) {
  if (box.lower.size() != box.upper.size()) throw DataError("box bounds have different lengths");
  if (box.dim() != p) {
    throw DataError("box dimension " + std::to_string(box.dim()) + " does not match model dimension " +
                    std::to_string(p));
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (!std::isfinite(box.lower[j]) || !std::isfinite(box.upper[j])) {
      throw DataError("box bounds must be finite");
    }
  }
  if (box.empty()) {
    SolveResult res;
    res.status = SolveStatus::infeasible;
    return res;
  }
  EpigraphSimplex lp(std::move(groups), box, tol);
  return lp.solve();
}

}  // namespace detail

inline SolveResult minimize(const MaxAffineModel& model, const Box& box, double tol = 1e-9) {
  return detail::minimize_groups({&model}, model.dim(), box, tol);
}

inline SolveResult minimize(const EnsembleModel& model, const Box& box, double tol = 1e-9) {
  std::vector<const MaxAffineModel*> groups;
  for (const auto& m : model.members()) groups.push_back(&m);
  return detail::minimize_groups(std::move(groups), model.dim(), box, tol);
}

inline SolveResult minimize(const LseModel& model, const Box& box, double tol = 1e-9) {
  return minimize(model.as_max_affine(), box, tol);
}

inline SolveResult minimize(const AnyModel& model, const Box& box, double tol = 1e-9) {
  return std::visit([&](const auto& m) { return minimize(m, box, tol); }, model);
}

}  // namespace cvxreg
