#pragma once

// Bridge between log-space max-affine fits and generalized posynomials.
// With z = log x and a model fitted to log y, each hyperplane
// (alpha, beta) is the monomial e^alpha * prod x_j^beta_j. An ensemble of
// M members is exported as the weighted geometric mean of M max-of-monomial
// groups, which in log space is exactly the ensemble average.

#include <cmath>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cvxreg/core.hpp"

namespace cvxreg {

struct Monomial {
  double c = 1.0;
  std::vector<double> a;

  double log_value(std::span<const double> log_x) const {
    double v = std::log(c);
    for (std::size_t j = 0; j < a.size(); ++j) v += a[j] * log_x[j];
    return v;
  }
};

/// prod_m (max_k group_m[k](x))^weight with weight = 1/M.
class PosynomialModel {
 public:
  PosynomialModel() = default;

  PosynomialModel(std::vector<std::vector<Monomial>> groups, double weight)
      : groups_(std::move(groups)), weight_(weight) {
    if (groups_.empty()) throw DataError("posynomial model needs at least one group");
    if (!(weight_ > 0.0) || !std::isfinite(weight_)) throw DataError("group weight must be positive");
    p_ = 0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (groups_[g].empty()) throw DataError("posynomial group " + std::to_string(g) + " is empty");
      for (const auto& mono : groups_[g]) {
        if (!(mono.c > 0.0) || !std::isfinite(mono.c)) {
          throw DataError("monomial coefficient must be positive in group " + std::to_string(g));
        }
        if (p_ == 0) p_ = mono.a.size();
        if (mono.a.size() != p_ || p_ == 0) {
          throw DataError("monomial exponent dimension mismatch in group " + std::to_string(g));
        }
      }
    }
  }

  std::size_t dim() const { return p_; }
  double weight() const { return weight_; }
  const std::vector<std::vector<Monomial>>& groups() const { return groups_; }

  /// log f(x) as a function of z = log x; convex in z.
  double log_value(std::span<const double> z) const {
    detail::require_point(z, p_);
    double total = 0.0;
    for (const auto& group : groups_) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& mono : group) best = std::max(best, mono.log_value(z));
      total += best;
    }
    return weight_ * total;
  }

  double operator()(std::span<const double> x) const {
    detail::require_point(x, p_);
    std::vector<double> z(p_);
    for (std::size_t j = 0; j < p_; ++j) {
      if (!(x[j] > 0.0)) {
        throw DataError("posynomial argument must be positive (coordinate " + std::to_string(j) + ")");
      }
      z[j] = std::log(x[j]);
    }
    return std::exp(log_value(z));
  }

 private:
  std::vector<std::vector<Monomial>> groups_;
  double weight_ = 1.0;
  std::size_t p_ = 0;
};

/// Elementwise natural log of covariates and responses.
inline Dataset log_transform(const Dataset& data) {
  std::vector<double> x(data.covariates().size());
  std::vector<double> y(data.size());
  const std::size_t p = data.dim();
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double v = data.x(i, j);
      if (!(v > 0.0)) {
        throw DataError("log transform needs positive covariates: row " + std::to_string(i) +
                        ", column " + std::to_string(j));
      }
      x[i * p + j] = std::log(v);
    }
    if (!(data.y(i) > 0.0)) {
      throw DataError("log transform needs positive responses: row " + std::to_string(i) + ", column y");
    }
    y[i] = std::log(data.y(i));
  }
  return Dataset(p, std::move(x), std::move(y));
}

inline std::vector<Monomial> to_monomials(const MaxAffineModel& model) {
  std::vector<Monomial> group;
  group.reserve(model.size());
  for (const auto& h : model.hyperplanes()) group.push_back(Monomial{std::exp(h.alpha), h.beta});
  return group;
}

inline PosynomialModel export_posynomial(const MaxAffineModel& model) {
  return PosynomialModel({to_monomials(model)}, 1.0);
}

inline PosynomialModel export_posynomial(const EnsembleModel& model) {
  std::vector<std::vector<Monomial>> groups;
  groups.reserve(model.size());
  for (const auto& m : model.members()) groups.push_back(to_monomials(m));
  return PosynomialModel(std::move(groups), 1.0 / static_cast<double>(model.size()));
}

inline PosynomialModel export_posynomial(const LseModel& model) {
  return export_posynomial(model.as_max_affine());
}

inline PosynomialModel export_posynomial(const AnyModel& model) {
  return std::visit([](const auto& m) { return export_posynomial(m); }, model);
}

inline double evaluate_posynomial(const PosynomialModel& pm, std::span<const double> x) {
  return pm(x);
}

/// GP encoding with one epigraph variable per group: the objective (or
/// constraint) term prod_m t_m^w, and one `t_m >= monomial` line per
/// monomial.
inline std::string gp_constraint_listing(const PosynomialModel& pm) {
  std::ostringstream out;
  out.precision(17);
  const std::size_t M = pm.groups().size();
  out << "# generalized posynomial: prod_{m=1.." << M << "} t_m^" << pm.weight() << "\n";
  for (std::size_t m = 0; m < M; ++m) {
    for (const auto& mono : pm.groups()[m]) {
      out << "t_" << (m + 1) << " >= " << mono.c;
      for (std::size_t j = 0; j < mono.a.size(); ++j) out << " * x" << (j + 1) << "^" << mono.a[j];
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace cvxreg
