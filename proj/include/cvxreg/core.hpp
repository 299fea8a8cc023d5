#pragma once

// Domain types shared by every estimator: datasets, max-affine models,
// equal-weight ensembles of them, and the anchored least-squares model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cvxreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: wrong shape, non-finite values, out-of-domain entries.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent serialized model document.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A solver or fit failed to reach its numerical contract.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_point(std::span<const double> x, std::size_t p) {
  if (x.size() != p) {
    throw DataError("dimension mismatch: expected " + std::to_string(p) +
                    " coordinates, got " + std::to_string(x.size()));
  }
  for (std::size_t j = 0; j < p; ++j) {
    if (!std::isfinite(x[j])) {
      throw DataError("non-finite coordinate at index " + std::to_string(j));
    }
  }
}

}  // namespace detail

/// n observations of a p-dimensional covariate with scalar response.
/// Covariates are stored row-major so each observation is contiguous.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::size_t p, std::vector<double> x, std::vector<double> y)
      : p_(p), x_(std::move(x)), y_(std::move(y)) {
    if (p_ == 0) throw DataError("dataset needs at least one covariate");
    if (y_.empty()) throw DataError("dataset needs at least one observation");
    if (x_.size() != p_ * y_.size()) {
      throw DataError("covariate block has " + std::to_string(x_.size()) +
                      " entries, expected " + std::to_string(p_ * y_.size()));
    }
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (!std::isfinite(y_[i])) {
        throw DataError("non-finite response at row " + std::to_string(i));
      }
      for (std::size_t j = 0; j < p_; ++j) {
        if (!std::isfinite(x_[i * p_ + j])) {
          throw DataError("non-finite covariate at row " + std::to_string(i) +
                          ", column " + std::to_string(j));
        }
      }
    }
  }

  /// Build from a list of rows; every row must have the same length.
  static Dataset from_rows(const std::vector<std::vector<double>>& rows,
                           std::vector<double> y) {
    if (rows.empty()) throw DataError("dataset needs at least one observation");
    const std::size_t p = rows.front().size();
    std::vector<double> flat;
    flat.reserve(p * rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != p) {
        throw DataError("row " + std::to_string(i) + " has " +
                        std::to_string(rows[i].size()) + " covariates, expected " +
                        std::to_string(p));
      }
      flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    if (y.size() != rows.size()) {
      throw DataError("row count and response count differ");
    }
    return Dataset(p, std::move(flat), std::move(y));
  }

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return p_; }

  std::span<const double> row(std::size_t i) const {
    return {x_.data() + i * p_, p_};
  }
  double x(std::size_t i, std::size_t j) const { return x_[i * p_ + j]; }
  double y(std::size_t i) const { return y_[i]; }

  const std::vector<double>& covariates() const { return x_; }
  const std::vector<double>& responses() const { return y_; }

  /// Same covariates, different responses (used by smearing).
  Dataset with_responses(std::vector<double> y) const {
    return Dataset(p_, x_, std::move(y));
  }

  /// Rows selected by index, in the given order; repeats allowed.
  Dataset subset(std::span<const std::size_t> idx) const {
    std::vector<double> x;
    std::vector<double> y;
    x.reserve(idx.size() * p_);
    y.reserve(idx.size());
    for (std::size_t i : idx) {
      auto r = row(i);
      x.insert(x.end(), r.begin(), r.end());
      y.push_back(y_[i]);
    }
    return Dataset(p_, std::move(x), std::move(y));
  }

 private:
  std::size_t p_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

struct Hyperplane {
  double alpha = 0.0;
  std::vector<double> beta;

  double operator()(std::span<const double> x) const {
    double v = alpha;
    for (std::size_t j = 0; j < beta.size(); ++j) v += beta[j] * x[j];
    return v;
  }
};

/// f(x) = max_k alpha_k + beta_k' x. Immutable once built.
class MaxAffineModel {
 public:
  MaxAffineModel() = default;

  explicit MaxAffineModel(std::vector<Hyperplane> planes) : planes_(std::move(planes)) {
    if (planes_.empty()) throw DataError("max-affine model needs at least one hyperplane");
    p_ = planes_.front().beta.size();
    if (p_ == 0) throw DataError("hyperplane slope vector is empty");
    coef_.reserve(planes_.size() * (p_ + 1));
    for (std::size_t k = 0; k < planes_.size(); ++k) {
      const auto& h = planes_[k];
      if (h.beta.size() != p_) {
        throw DataError("hyperplane " + std::to_string(k) + " has dimension " +
                        std::to_string(h.beta.size()) + ", expected " + std::to_string(p_));
      }
      if (!std::isfinite(h.alpha) ||
          !std::all_of(h.beta.begin(), h.beta.end(), [](double b) { return std::isfinite(b); })) {
        throw DataError("hyperplane " + std::to_string(k) + " has a non-finite coefficient");
      }
      coef_.push_back(h.alpha);
      coef_.insert(coef_.end(), h.beta.begin(), h.beta.end());
    }
  }

  std::size_t dim() const { return p_; }
  std::size_t size() const { return planes_.size(); }
  const std::vector<Hyperplane>& hyperplanes() const { return planes_; }

  double operator()(std::span<const double> x) const {
    detail::require_point(x, p_);
    return value_unchecked(x.data());
  }

  /// Index of the maximal hyperplane; ties go to the lowest index.
  std::size_t argmax(std::span<const double> x) const {
    detail::require_point(x, p_);
    return argmax_unchecked(x.data());
  }

  std::vector<double> subgradient(std::span<const double> x) const {
    return planes_[argmax(x)].beta;
  }

  double value_unchecked(const double* x) const {
    double best = -std::numeric_limits<double>::infinity();
    const double* c = coef_.data();
    for (std::size_t k = 0; k < planes_.size(); ++k, c += p_ + 1) {
      double v = c[0];
      for (std::size_t j = 0; j < p_; ++j) v += c[j + 1] * x[j];
      if (v > best) best = v;
    }
    return best;
  }

  std::size_t argmax_unchecked(const double* x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    const double* c = coef_.data();
    for (std::size_t k = 0; k < planes_.size(); ++k, c += p_ + 1) {
      double v = c[0];
      for (std::size_t j = 0; j < p_; ++j) v += c[j + 1] * x[j];
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    return arg;
  }

 private:
  std::size_t p_ = 0;
  std::vector<Hyperplane> planes_;
  std::vector<double> coef_;  // K rows of [alpha, beta...]
};

/// Equal-weight average of max-affine members.
class EnsembleModel {
 public:
  EnsembleModel() = default;

  explicit EnsembleModel(std::vector<MaxAffineModel> members) : members_(std::move(members)) {
    if (members_.empty()) throw DataError("ensemble needs at least one member");
    p_ = members_.front().dim();
    for (std::size_t m = 0; m < members_.size(); ++m) {
      if (members_[m].dim() != p_) {
        throw DataError("ensemble member " + std::to_string(m) + " has dimension " +
                        std::to_string(members_[m].dim()) + ", expected " + std::to_string(p_));
      }
    }
  }

  std::size_t dim() const { return p_; }
  std::size_t size() const { return members_.size(); }
  const std::vector<MaxAffineModel>& members() const { return members_; }

  double operator()(std::span<const double> x) const {
    detail::require_point(x, p_);
    return value_unchecked(x.data());
  }

  // Left-to-right summation in member order, then one division.
  double value_unchecked(const double* x) const {
    double sum = 0.0;
    for (const auto& m : members_) sum += m.value_unchecked(x);
    return sum / static_cast<double>(members_.size());
  }

 private:
  std::size_t p_ = 0;
  std::vector<MaxAffineModel> members_;
};

struct Anchor {
  std::vector<double> x;
  double yhat = 0.0;
  std::vector<double> g;
};

/// Fitted values and subgradients at the training points. Prediction
/// away from the anchors is the max over their supporting hyperplanes.
class LseModel {
 public:
  static constexpr double kFeasibilityTol = 1e-6;

  LseModel() = default;

  explicit LseModel(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
    if (anchors_.empty()) throw DataError("LSE model needs at least one anchor");
    p_ = anchors_.front().x.size();
    if (p_ == 0) throw DataError("LSE anchor has empty covariate");
    std::vector<Hyperplane> planes;
    planes.reserve(anchors_.size());
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const auto& a = anchors_[i];
      if (a.x.size() != p_ || a.g.size() != p_) {
        throw DataError("LSE anchor " + std::to_string(i) + " has inconsistent dimension");
      }
      Hyperplane h{a.yhat, a.g};
      for (std::size_t j = 0; j < p_; ++j) h.alpha -= a.g[j] * a.x[j];
      planes.push_back(std::move(h));
    }
    planes_ = MaxAffineModel(std::move(planes));

    const double viol = max_violation();
    if (viol > kFeasibilityTol) {
      throw DataError("LSE anchors violate the supporting-hyperplane constraints by " +
                      std::to_string(viol));
    }
  }

  std::size_t dim() const { return p_; }
  std::size_t size() const { return anchors_.size(); }
  const std::vector<Anchor>& anchors() const { return anchors_; }

  double operator()(std::span<const double> x) const {
    detail::require_point(x, p_);
    return value_unchecked(x.data());
  }

  double value_unchecked(const double* x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : anchors_) {
      double v = a.yhat;
      for (std::size_t j = 0; j < p_; ++j) v += a.g[j] * (x[j] - a.x[j]);
      if (v > best) best = v;
    }
    return best;
  }

  /// max over pairs of yhat_i + g_i'(x_j - x_i) - yhat_j (0 when feasible).
  double max_violation() const {
    double worst = 0.0;
    for (const auto& ai : anchors_) {
      for (const auto& aj : anchors_) {
        double rhs = ai.yhat;
        for (std::size_t k = 0; k < p_; ++k) rhs += ai.g[k] * (aj.x[k] - ai.x[k]);
        worst = std::max(worst, rhs - aj.yhat);
      }
    }
    return worst;
  }

  /// Same function written as one hyperplane per anchor.
  const MaxAffineModel& as_max_affine() const { return planes_; }

 private:
  std::size_t p_ = 0;
  std::vector<Anchor> anchors_;
  MaxAffineModel planes_;
};

using AnyModel = std::variant<MaxAffineModel, EnsembleModel, LseModel>;

template <class Model>
double evaluate(const Model& model, std::span<const double> x) {
  return model(x);
}

inline double evaluate(const AnyModel& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m(x); }, model);
}

inline std::size_t model_dim(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

inline std::vector<double> subgradient(const MaxAffineModel& model, std::span<const double> x) {
  return model.subgradient(x);
}

/// Mean squared error of a model over a dataset.
template <class Model>
double mean_squared_error(const Model& model, const Dataset& data) {
  if (data.dim() != model.dim()) {
    throw DataError("dataset dimension " + std::to_string(data.dim()) +
                    " does not match model dimension " + std::to_string(model.dim()));
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double r = data.y(i) - model.value_unchecked(data.row(i).data());
    sse += r * r;
  }
  return sse / static_cast<double>(data.size());
}

}  // namespace cvxreg
