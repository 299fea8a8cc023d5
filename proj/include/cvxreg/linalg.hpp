#pragma once

// Least-squares building blocks shared by the partitioning estimators.
//
// Every observation is lifted to w = [1, z_1..z_p, y] and its packed outer
// product (upper triangle, row-major) is precomputed once. Sufficient
// statistics of any subset are then plain sums of those packed rows, and
// a cell's hyperplane comes from solving the normal equations they contain.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cvxreg/core.hpp"

namespace cvxreg::linalg {

/// Per-column centering and scaling; fits run on the standardized design
/// and hyperplanes are mapped back afterwards.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& data) {
    const std::size_t n = data.size();
    const std::size_t p = data.dim();
    Standardizer s{std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)};
    for (std::size_t j = 0; j < p; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += data.x(i, j);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += (data.x(i, j) - m) * (data.x(i, j) - m);
      v = n > 1 ? v / static_cast<double>(n - 1) : 0.0;
      s.mean[j] = m;
      s.scale[j] = v > 0.0 ? std::sqrt(v) : 1.0;
    }
    return s;
  }

  /// theta = [intercept, slopes...] in standardized coordinates.
  Hyperplane to_original(std::span<const double> theta) const {
    Hyperplane h;
    h.alpha = theta[0];
    h.beta.resize(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) {
      h.beta[j] = theta[j + 1] / scale[j];
      h.alpha -= h.beta[j] * mean[j];
    }
    return h;
  }
};

inline std::size_t packed_size(std::size_t p) {
  const std::size_t m = p + 2;
  return m * (m + 1) / 2;
}

/// Standardized design with intercept column and packed outer products.
class Design {
 public:
  Design(const Dataset& data, const Standardizer& std_)
      : n_(data.size()), p_(data.dim()), d_(p_ + 1), s_(packed_size(p_)) {
    aug_.resize(n_ * d_);
    y_ = data.responses();
    outer_.resize(n_ * s_);
    std::vector<double> w(d_ + 1);
    for (std::size_t i = 0; i < n_; ++i) {
      double* a = &aug_[i * d_];
      a[0] = 1.0;
      for (std::size_t j = 0; j < p_; ++j) a[j + 1] = (data.x(i, j) - std_.mean[j]) / std_.scale[j];
      std::copy(a, a + d_, w.begin());
      w[d_] = y_[i];
      double* o = &outer_[i * s_];
      std::size_t t = 0;
      for (std::size_t r = 0; r <= d_; ++r)
        for (std::size_t c = r; c <= d_; ++c) o[t++] = w[r] * w[c];
    }
  }

  std::size_t size() const { return n_; }
  std::size_t dim() const { return p_; }
  std::size_t aug_dim() const { return d_; }
  std::size_t stat_size() const { return s_; }

  const double* aug(std::size_t i) const { return &aug_[i * d_]; }
  const double* outer(std::size_t i) const { return &outer_[i * s_]; }
  double y(std::size_t i) const { return y_[i]; }

  void accumulate(std::size_t i, double* stats) const {
    const double* o = outer(i);
    for (std::size_t t = 0; t < s_; ++t) stats[t] += o[t];
  }

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// values(i, k) = plane k of theta (K rows of aug_dim) at observation i.
  void plane_values(const std::vector<double>& theta, RowMat& values) const {
    const Eigen::Index K = static_cast<Eigen::Index>(theta.size() / d_);
    const Eigen::Map<const RowMat> A(aug_.data(), static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(d_));
    const Eigen::Map<const RowMat> T(theta.data(), K, static_cast<Eigen::Index>(d_));
    values.noalias() = A * T.transpose();
  }

  double plane_value(const double* theta, std::size_t i) const {
    const double* a = aug(i);
    double v = 0.0;
    for (std::size_t j = 0; j < d_; ++j) v += theta[j] * a[j];
    return v;
  }

 private:
  std::size_t n_, p_, d_, s_;
  std::vector<double> aug_;
  std::vector<double> y_;
  std::vector<double> outer_;
};

/// Solves the normal equations held in packed statistics. Undersized or
/// singular systems get a ridge of 1e-8 * trace(G) / p on the diagonal.
class OlsSolver {
 public:
  explicit OlsSolver(std::size_t p)
      : p_(p), d_(p + 1), gram_(d_, d_), rhs_(d_), theta_(d_), ldlt_(d_) {}

  /// Returns false when the statistics describe an empty set.
  bool solve(const double* stats, double* theta) {
    const double count = stats[0];
    if (count < 0.5) return false;
    std::size_t t = 0;
    for (std::size_t r = 0; r <= d_; ++r) {
      for (std::size_t c = r; c <= d_; ++c, ++t) {
        if (c < d_) {
          gram_(r, c) = stats[t];
          gram_(c, r) = stats[t];
        } else if (r < d_) {
          rhs_(r) = stats[t];
        }
      }
    }
    const bool undersized = count < static_cast<double>(d_) - 0.5;
    if (!undersized) {
      ldlt_.compute(gram_);
      if (well_conditioned()) {
        theta_ = ldlt_.solve(rhs_);
        if (theta_.allFinite()) {
          std::copy(theta_.data(), theta_.data() + d_, theta);
          return true;
        }
      }
    }
    const double lambda = 1e-8 * gram_.trace() / static_cast<double>(p_);
    gram_.diagonal().array() += lambda > 0.0 ? lambda : 1e-12;
    ldlt_.compute(gram_);
    theta_ = ldlt_.solve(rhs_);
    if (!theta_.allFinite()) return false;
    std::copy(theta_.data(), theta_.data() + d_, theta);
    return true;
  }

 private:
  bool well_conditioned() const {
    if (ldlt_.info() != Eigen::Success) return false;
    const auto& dvec = ldlt_.vectorD();
    const double dmax = dvec.cwiseAbs().maxCoeff();
    const double dmin = dvec.minCoeff();
    return dmax > 0.0 && dmin > 1e-12 * dmax;
  }

  std::size_t p_, d_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd theta_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

}  // namespace cvxreg::linalg
