#pragma once

// Full least-squares convex regression:
//
//   min sum_i (y_i - yhat_i)^2
//   s.t. yhat_j >= yhat_i + g_i'(x_j - x_i)   for all i != j
//
// over fitted values yhat and subgradients g. Solved by a Mehrotra
// predictor-corrector interior-point method. The normal matrix has a dense
// n x n block for yhat and a block-diagonal p x p block per g_i, so each
// Newton step eliminates the g blocks and factors an n x n Schur complement.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cvxreg/core.hpp"

namespace cvxreg {

struct LseOptions {
  double tol_feas = 1e-6;
  double tol_obj = 1e-8;
  double tol_kkt = 1e-6;
  std::size_t max_iters = 100;
};

struct LseFit {
  LseModel model;
  double objective = 0.0;      // sum of squared residuals, original units
  double max_violation = 0.0;  // worst constraint violation, original units
  double kkt_residual = 0.0;   // scaled problem, infinity norm
  double rel_gap = 0.0;
  std::size_t iterations = 0;
};

/// Thrown when the solver stops short of its tolerances; carries the best
/// iterate and its residuals.
class LseConvergenceError : public NumericalError {
 public:
  LseConvergenceError(const std::string& what, std::vector<double> yhat,
                      std::vector<std::vector<double>> g, double kkt, double gap, double viol)
      : NumericalError(what), yhat(std::move(yhat)), g(std::move(g)), kkt_residual(kkt),
        rel_gap(gap), max_violation(viol) {}

  std::vector<double> yhat;
  std::vector<std::vector<double>> g;
  double kkt_residual, rel_gap, max_violation;
};

namespace detail {

class LseSolver {
 public:
  LseSolver(const Dataset& data, const LseOptions& opt)
      : opt_(opt), n_(data.size()), p_(data.dim()), m_(n_ * (n_ - 1)) {
    xs_.resize(n_ * p_);
    mean_.assign(p_, 0.0);
    scale_.assign(p_, 1.0);
    for (std::size_t j = 0; j < p_; ++j) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n_; ++i) mu += data.x(i, j);
      mu /= static_cast<double>(n_);
      double v = 0.0;
      for (std::size_t i = 0; i < n_; ++i) v += (data.x(i, j) - mu) * (data.x(i, j) - mu);
      v /= static_cast<double>(n_);
      mean_[j] = mu;
      scale_[j] = v > 0.0 ? std::sqrt(v) : 1.0;
      for (std::size_t i = 0; i < n_; ++i) xs_[i * p_ + j] = (data.x(i, j) - mu) / scale_[j];
    }
    double ymu = 0.0;
    for (std::size_t i = 0; i < n_; ++i) ymu += data.y(i);
    ymu /= static_cast<double>(n_);
    double yv = 0.0;
    for (std::size_t i = 0; i < n_; ++i) yv += (data.y(i) - ymu) * (data.y(i) - ymu);
    yv /= static_cast<double>(n_);
    yshift_ = ymu;
    yscale_ = yv > 0.0 ? std::sqrt(yv) : 1.0;
    ys_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) ys_[i] = (data.y(i) - yshift_) / yscale_;
    x_orig_ = &data;
  }

  LseFit solve() {
    const std::size_t N = n_ * (1 + p_);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(N);
    for (std::size_t i = 0; i < n_; ++i) z(i) = ys_[i];
    Eigen::VectorXd s = Eigen::VectorXd::Ones(m_);
    Eigen::VectorXd lam = Eigen::VectorXd::Ones(m_);

    double yy = 0.0, yscale_inf = 1.0;
    for (double v : ys_) {
      yy += v * v;
      yscale_inf = std::max(yscale_inf, 2.0 * std::abs(v));
    }

    Eigen::VectorXd best_z = z;
    double best_merit = std::numeric_limits<double>::infinity();
    double kkt = 0.0, gap = 0.0;

    for (std::size_t it = 0; it < opt_.max_iters; ++it) {
      const Eigen::VectorXd rd = dual_residual(z, lam);
      const Eigen::VectorXd rp = apply_a(z) - s;
      const double mu = s.dot(lam) / static_cast<double>(m_);
      const double obj = objective(z, yy);
      kkt = std::max({rd.lpNorm<Eigen::Infinity>(), rp.lpNorm<Eigen::Infinity>(),
                      (s.array() * lam.array()).maxCoeff()});
      gap = s.dot(lam) / (1.0 + std::abs(obj));
      const double merit = std::max(kkt, gap);
      if (merit < best_merit) {
        best_merit = merit;
        best_z = z;
      }
      if (rd.lpNorm<Eigen::Infinity>() <= 1e-8 * yscale_inf && rp.lpNorm<Eigen::Infinity>() <= 1e-9 &&
          gap <= 0.1 * opt_.tol_obj && kkt <= opt_.tol_kkt) {
        return finish(z, kkt, gap, it);
      }

      factor(s, lam);

      // Predictor.
      Eigen::VectorXd rc = -(s.array() * lam.array()).matrix();
      Eigen::VectorXd dz, ds, dl;
      newton(rd, rp, rc, s, lam, dz, ds, dl);
      const double ap = step_to_boundary(s, ds);
      const double ad = step_to_boundary(lam, dl);
      const double mu_aff =
          (s + ap * ds).dot(lam + ad * dl) / static_cast<double>(m_);
      const double sigma = std::pow(mu_aff / mu, 3);

      // Corrector.
      rc = (-(s.array() * lam.array()) - ds.array() * dl.array() + sigma * mu).matrix();
      newton(rd, rp, rc, s, lam, dz, ds, dl);
      const double alpha =
          std::min(1.0, 0.995 * std::min(step_to_boundary(s, ds), step_to_boundary(lam, dl)));
      z += alpha * dz;
      s += alpha * ds;
      lam += alpha * dl;
      s = s.cwiseMax(1e-300);
      lam = lam.cwiseMax(1e-300);
    }

    auto [yhat, g] = unscale(best_z);
    throw LseConvergenceError("LSE solver did not converge within " +
                                  std::to_string(opt_.max_iters) + " iterations",
                              std::move(yhat), std::move(g), kkt, gap, violation_of(best_z));
  }

 private:
  const double* xs(std::size_t i) const { return &xs_[i * p_]; }

  // Constraint rows are enumerated (i, j), j != i, row-major in i.
  Eigen::VectorXd apply_a(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(m_);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double* gi = z.data() + n_ + i * p_;
      const double* xi = xs(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j == i) continue;
        const double* xj = xs(j);
        double v = z(j) - z(i);
        for (std::size_t k = 0; k < p_; ++k) v -= gi[k] * (xj[k] - xi[k]);
        out(r++) = v;
      }
    }
    return out;
  }

  Eigen::VectorXd apply_at(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_ * (1 + p_));
    std::size_t r = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      double* gi = out.data() + n_ + i * p_;
      const double* xi = xs(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j == i) continue;
        const double w = v(r++);
        const double* xj = xs(j);
        out(j) += w;
        out(i) -= w;
        for (std::size_t k = 0; k < p_; ++k) gi[k] -= w * (xj[k] - xi[k]);
      }
    }
    return out;
  }

  double objective(const Eigen::VectorXd& z, double yy) const {
    double obj = yy;
    for (std::size_t i = 0; i < n_; ++i) obj += z(i) * z(i) - 2.0 * ys_[i] * z(i);
    return obj;
  }

  // H z + q - A' lam, H = 2I on yhat, q = -2y.
  Eigen::VectorXd dual_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& lam) const {
    Eigen::VectorXd r = -apply_at(lam);
    for (std::size_t i = 0; i < n_; ++i) r(i) += 2.0 * z(i) - 2.0 * ys_[i];
    return r;
  }

  static double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (dv(k) < 0.0) a = std::min(a, -v(k) / dv(k));
    }
    return std::min(a, 1.0);
  }

  // Builds the Schur complement of H + A' D A onto the yhat block.
  void factor(const Eigen::VectorXd& s, const Eigen::VectorXd& lam) {
    weights_ = lam.cwiseQuotient(s);
    const Eigen::VectorXd& w = weights_;
    schur_ = Eigen::MatrixXd::Zero(n_, n_);
    schur_.diagonal().setConstant(2.0);
    cblocks_.assign(n_, Eigen::MatrixXd());
    gfactors_.assign(n_, Eigen::LLT<Eigen::MatrixXd>());
    Eigen::MatrixXd gi(p_, p_);
    Eigen::VectorXd delta(p_);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      Eigen::MatrixXd ci = Eigen::MatrixXd::Zero(n_, p_);
      gi.setZero();
      const double* xi = xs(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j == i) continue;
        const double wr = w(r++);
        const double* xj = xs(j);
        for (std::size_t k = 0; k < p_; ++k) delta(k) = xj[k] - xi[k];
        schur_(j, j) += wr;
        schur_(i, i) += wr;
        schur_(i, j) -= wr;
        schur_(j, i) -= wr;
        ci.row(j) -= wr * delta.transpose();
        ci.row(i) += wr * delta.transpose();
        gi.noalias() += wr * delta * delta.transpose();
      }
      gi.diagonal().array() += 1e-13 * std::max(gi.trace(), 1e-300);
      gfactors_[i].compute(gi);
      const Eigen::MatrixXd x = gfactors_[i].solve(ci.transpose());
      schur_.noalias() -= ci * x;
      cblocks_[i] = std::move(ci);
    }
    schur_llt_.compute(schur_);
    if (schur_llt_.info() != Eigen::Success) {
      schur_.diagonal().array() += 1e-12 * schur_.diagonal().cwiseAbs().maxCoeff();
      schur_llt_.compute(schur_);
    }
  }

  void newton(const Eigen::VectorXd& rd, const Eigen::VectorXd& rp, const Eigen::VectorXd& rc,
              const Eigen::VectorXd& s, const Eigen::VectorXd& lam, Eigen::VectorXd& dz,
              Eigen::VectorXd& ds, Eigen::VectorXd& dl) const {
    // (H + A' D A) dz = -rd + A' S^-1 (rc - Lam rp)
    const Eigen::VectorXd t = (rc.array() - lam.array() * rp.array()).matrix().cwiseQuotient(s);
    const Eigen::VectorXd rhs = -rd + apply_at(t);
    dz = reduced_solve(rhs);
    // One round of iterative refinement against the unreduced matrix.
    Eigen::VectorXd kdz = apply_at(weights_.cwiseProduct(apply_a(dz)));
    kdz.head(n_) += 2.0 * dz.head(n_);
    dz += reduced_solve(rhs - kdz);
    ds = apply_a(dz) + rp;
    dl = (rc - lam.cwiseProduct(ds)).cwiseQuotient(s);
  }

  // Solves (H + A' D A) v = rhs through the yhat Schur complement.
  Eigen::VectorXd reduced_solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd ry = rhs.head(n_);
    std::vector<Eigen::VectorXd> ginv_rg(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      ginv_rg[i] = gfactors_[i].solve(rhs.segment(n_ + i * p_, p_));
      ry.noalias() -= cblocks_[i] * ginv_rg[i];
    }
    Eigen::VectorXd v(n_ * (1 + p_));
    v.head(n_) = schur_llt_.solve(ry);
    for (std::size_t i = 0; i < n_; ++i) {
      v.segment(n_ + i * p_, p_) =
          ginv_rg[i] - gfactors_[i].solve(cblocks_[i].transpose() * v.head(n_));
    }
    return v;
  }

  std::pair<std::vector<double>, std::vector<std::vector<double>>> unscale(
      const Eigen::VectorXd& z) const {
    std::vector<double> yhat(n_);
    std::vector<std::vector<double>> g(n_, std::vector<double>(p_));
    for (std::size_t i = 0; i < n_; ++i) {
      yhat[i] = z(i) * yscale_ + yshift_;
      for (std::size_t k = 0; k < p_; ++k) g[i][k] = z(n_ + i * p_ + k) * yscale_ / scale_[k];
    }
    return {std::move(yhat), std::move(g)};
  }

  double violation_of(const Eigen::VectorXd& z) const {
    auto [yhat, g] = unscale(z);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        double rhs = yhat[i];
        for (std::size_t k = 0; k < p_; ++k) rhs += g[i][k] * (x_orig_->x(j, k) - x_orig_->x(i, k));
        worst = std::max(worst, rhs - yhat[j]);
      }
    }
    return worst;
  }

  LseFit finish(const Eigen::VectorXd& z, double kkt, double gap, std::size_t iters) const {
    auto [yhat, g] = unscale(z);
    const double viol = violation_of(z);
    if (viol > opt_.tol_feas) {
      throw LseConvergenceError("LSE solution violates constraints by " + std::to_string(viol),
                                std::move(yhat), std::move(g), kkt, gap, viol);
    }
    LseFit fit;
    fit.objective = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double r = x_orig_->y(i) - yhat[i];
      fit.objective += r * r;
    }
    std::vector<Anchor> anchors;
    anchors.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = x_orig_->row(i);
      anchors.push_back(Anchor{std::vector<double>(row.begin(), row.end()), yhat[i], std::move(g[i])});
    }
    fit.model = LseModel(std::move(anchors));
    fit.max_violation = viol;
    fit.kkt_residual = kkt;
    fit.rel_gap = gap;
    fit.iterations = iters;
    return fit;
  }

  LseOptions opt_;
  std::size_t n_, p_, m_;
  std::vector<double> xs_, mean_, scale_, ys_;
  double yshift_ = 0.0, yscale_ = 1.0;
  const Dataset* x_orig_ = nullptr;

  Eigen::VectorXd weights_;
  Eigen::MatrixXd schur_;
  Eigen::LLT<Eigen::MatrixXd> schur_llt_;
  std::vector<Eigen::MatrixXd> cblocks_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> gfactors_;
};

}  // namespace detail

inline LseFit fit_lse_detailed(const Dataset& data, const LseOptions& opt = {}) {
  if (data.size() < 2) throw DataError("LSE needs at least 2 observations");
  detail::LseSolver solver(data, opt);
  return solver.solve();
}

inline LseModel fit_lse(const Dataset& data, double tol_feas = 1e-6, double tol_obj = 1e-8,
                        std::size_t max_iters = 100) {
  LseOptions opt;
  opt.tol_feas = tol_feas;
  opt.tol_obj = tol_obj;
  opt.max_iters = max_iters;
  return fit_lse_detailed(data, opt).model;
}

}  // namespace cvxreg
