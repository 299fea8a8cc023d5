#pragma once

// Bagging, output smearing and random-search-direction ensembles over the
// partitioning estimators. Member m always draws its randomness from
// mix_seed(seed, m), so ensembles are reproducible member by member.
//
// MB members reuse the number of hyperplanes cross-validated on the full
// data instead of re-running the K search for every member.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cvxreg/cap.hpp"
#include "cvxreg/core.hpp"
#include "cvxreg/cv.hpp"
#include "cvxreg/mb.hpp"
#include "cvxreg/rng.hpp"

namespace cvxreg {

enum class BaseMethod { cap, mb };

inline std::string to_string(BaseMethod b) { return b == BaseMethod::cap ? "cap" : "mb"; }

/// Noise multipliers (in units of the residual standard deviation) searched
/// by cross-validated smearing.
inline std::vector<double> default_sigma_grid() {
  return {0.0, 1e-2, 1e-1, 1.0 / 5.0, 1.0 / 2.5, 1.0, 2.5, 5.0, 10.0, 1e2};
}

struct EnsembleConfig {
  std::size_t members = 200;
  std::uint64_t seed = 0;
  double smear_multiplier = 2.5;
  std::vector<double> sigma_grid = default_sigma_grid();
  std::size_t cv_members_per_level = 25;
  std::size_t rd_directions_per_split = 0;  // 0 -> p

  void validate() const {
    if (members < 1) throw DataError("ensemble needs at least one member");
    if (smear_multiplier < 0.0 || !std::isfinite(smear_multiplier)) {
      throw DataError("smear multiplier must be finite and non-negative");
    }
    if (sigma_grid.empty()) throw DataError("sigma grid is empty");
    for (double s : sigma_grid) {
      if (s < 0.0 || !std::isfinite(s)) throw DataError("sigma grid values must be non-negative");
    }
    if (cv_members_per_level < 1) throw DataError("cv_members_per_level must be positive");
  }
};

/// Outcome of the noise-level search in smear_cv.
struct SmearCvReport {
  double residual_sd = 0.0;
  std::vector<double> levels;       // absolute noise sd per grid entry
  std::vector<double> cv_mse;       // held-out MSE per level
  std::vector<double> probability;  // selection probability per level
  std::vector<std::size_t> member_level;
};

/// Bootstrap indices for member m: n draws with replacement.
inline std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, std::size_t m) {
  Rng rng(mix_seed(seed, m));
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.index(n);
  return idx;
}

/// Softmax over negative CV MSE with temperature equal to the sample
/// standard deviation of the MSEs; uniform over the argmin set when that
/// deviation is zero.
inline std::vector<double> smear_level_probabilities(std::span<const double> mse) {
  const std::size_t L = mse.size();
  if (L == 0) throw DataError("no smearing levels");
  const double best = *std::min_element(mse.begin(), mse.end());
  double tau = 0.0;
  if (L > 1) {
    const double mean = std::accumulate(mse.begin(), mse.end(), 0.0) / static_cast<double>(L);
    for (double v : mse) tau += (v - mean) * (v - mean);
    tau = std::sqrt(tau / static_cast<double>(L - 1));
  }
  std::vector<double> prob(L, 0.0);
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    std::size_t ties = 0;
    for (double v : mse) ties += v == best;
    for (std::size_t l = 0; l < L; ++l) prob[l] = mse[l] == best ? 1.0 / static_cast<double>(ties) : 0.0;
    return prob;
  }
  double total = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    prob[l] = std::exp(-(mse[l] - best) / tau);
    total += prob[l];
  }
  for (auto& v : prob) v /= total;
  return prob;
}

namespace detail {

/// A base estimator with its hyperparameters pinned by a full-data fit.
class BaseLearner {
 public:
  BaseLearner(BaseMethod method, const FitConfig& cfg) : method_(method), cfg_(cfg) {}

  /// Fits the full data once, fixing K for MB members.
  MaxAffineModel fit_reference(const Dataset& data) {
    if (method_ == BaseMethod::cap) return fit_cap(data, cfg_);
    auto res = fit_mb_detailed(data, cfg_);
    mb_k_ = res.k_selected;
    return res.model;
  }

  MaxAffineModel fit_member(const Dataset& data, std::uint64_t seed) const {
    FitConfig cfg = cfg_;
    cfg.seed = seed;
    if (method_ == BaseMethod::cap) return fit_cap(data, cfg);
    return fit_mb_fixed_k(data, mb_k_, cfg);
  }

  BaseMethod method() const { return method_; }

 private:
  BaseMethod method_;
  FitConfig cfg_;
  std::size_t mb_k_ = 1;
};

template <class Fn>
MaxAffineModel guarded_member(std::size_t m, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw NumericalError("ensemble member " + std::to_string(m) + " failed: " + e.what());
  }
}

inline double residual_sd(const MaxAffineModel& model, const Dataset& data) {
  const std::size_t n = data.size();
  if (n < 2) return 0.0;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = data.y(i) - model.value_unchecked(data.row(i).data());
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  // Residuals at rounding level count as an exact fit.
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(data.y(i)));
  return sd <= 64.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : sd;
}

inline Dataset smeared(const Dataset& data, double sd, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y = data.responses();
  for (auto& v : y) v += rng.normal(0.0, sd);
  return data.with_responses(std::move(y));
}

inline void require_base_size(const Dataset& data, const FitConfig& cfg) {
  cfg.validate(data.dim());
  const std::size_t min_cell = cfg.resolved_min_cell(data.dim());
  if (data.size() < min_cell) {
    throw DataError("ensemble needs at least min_cell = " + std::to_string(min_cell) +
                    " observations, got " + std::to_string(data.size()));
  }
}

}  // namespace detail

/// Average of base fits on M bootstrap resamples.
inline EnsembleModel bag(const Dataset& data, BaseMethod base, const FitConfig& fit_cfg,
                         const EnsembleConfig& ens) {
  ens.validate();
  detail::require_base_size(data, fit_cfg);
  detail::BaseLearner learner(base, fit_cfg);
  if (base == BaseMethod::mb) learner.fit_reference(data);
  std::vector<MaxAffineModel> members;
  members.reserve(ens.members);
  for (std::size_t m = 0; m < ens.members; ++m) {
    members.push_back(detail::guarded_member(m, [&] {
      const auto idx = bootstrap_indices(data.size(), ens.seed, m);
      return learner.fit_member(data.subset(idx), mix_seed(mix_seed(ens.seed, m), 1));
    }));
  }
  return EnsembleModel(std::move(members));
}

/// Average of base fits on responses perturbed by N(0, (multiplier * s)^2),
/// s the residual standard deviation of one full-data base fit. When the
/// noise level is zero every member would equal the base fit, and the
/// ensemble is returned as that single fit.
inline EnsembleModel smear_fixed(const Dataset& data, BaseMethod base, const FitConfig& fit_cfg,
                                 const EnsembleConfig& ens) {
  ens.validate();
  detail::require_base_size(data, fit_cfg);
  detail::BaseLearner learner(base, fit_cfg);
  const MaxAffineModel reference = learner.fit_reference(data);
  const double sd = ens.smear_multiplier * detail::residual_sd(reference, data);
  if (!(sd > 0.0)) return EnsembleModel({reference});

  std::vector<MaxAffineModel> members;
  members.reserve(ens.members);
  for (std::size_t m = 0; m < ens.members; ++m) {
    members.push_back(detail::guarded_member(m, [&] {
      const std::uint64_t ms = mix_seed(ens.seed, m);
      return learner.fit_member(detail::smeared(data, sd, mix_seed(ms, 0)), mix_seed(ms, 1));
    }));
  }
  return EnsembleModel(std::move(members));
}

/// Smearing with the noise level chosen by cross-validation: every grid
/// level is scored by k-fold CV of a small smeared ensemble, then each of
/// the M final members draws its level from smear_level_probabilities.
inline EnsembleModel smear_cv(const Dataset& data, BaseMethod base, const FitConfig& fit_cfg,
                              const EnsembleConfig& ens, SmearCvReport* report = nullptr) {
  ens.validate();
  detail::require_base_size(data, fit_cfg);
  detail::BaseLearner learner(base, fit_cfg);
  const MaxAffineModel reference = learner.fit_reference(data);
  const double s = detail::residual_sd(reference, data);

  SmearCvReport rep;
  rep.residual_sd = s;
  for (double g : ens.sigma_grid) rep.levels.push_back(g * s);
  const std::size_t L = rep.levels.size();

  if (std::all_of(rep.levels.begin(), rep.levels.end(), [](double v) { return !(v > 0.0); })) {
    rep.cv_mse.assign(L, 0.0);
    rep.probability.assign(L, 1.0 / static_cast<double>(L));
    if (report) *report = std::move(rep);
    return EnsembleModel({reference});
  }

  const std::uint64_t cv_seed = mix_seed(ens.seed, 0x5EA7);
  const std::size_t J = ens.cv_members_per_level;
  for (std::size_t l = 0; l < L; ++l) {
    const double sd = rep.levels[l];
    std::size_t fold_no = 0;
    rep.cv_mse.push_back(kfold_cv(data, fit_cfg.cv_folds, cv_seed, [&](const Dataset& train) {
      const std::uint64_t fs = mix_seed(mix_seed(cv_seed, l + 1), fold_no++);
      std::vector<MaxAffineModel> members;
      const std::size_t count = sd > 0.0 ? J : 1;
      for (std::size_t j = 0; j < count; ++j) {
        const std::uint64_t js = mix_seed(fs, j);
        members.push_back(detail::guarded_member(j, [&] {
          return sd > 0.0 ? learner.fit_member(detail::smeared(train, sd, mix_seed(js, 0)),
                                               mix_seed(js, 1))
                          : learner.fit_member(train, mix_seed(fs, 0xFFFF));
        }));
      }
      return EnsembleModel(std::move(members));
    }));
  }

  rep.probability = smear_level_probabilities(rep.cv_mse);
  std::vector<double> cdf(L);
  std::partial_sum(rep.probability.begin(), rep.probability.end(), cdf.begin());

  std::vector<MaxAffineModel> members;
  members.reserve(ens.members);
  for (std::size_t m = 0; m < ens.members; ++m) {
    const std::uint64_t ms = mix_seed(ens.seed, m);
    Rng pick(mix_seed(ms, 2));
    const double u = pick.uniform(0.0, cdf.back());
    const std::size_t l = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(L - 1)));
    rep.member_level.push_back(l);
    const double sd = rep.levels[l];
    members.push_back(detail::guarded_member(m, [&] {
      return sd > 0.0 ? learner.fit_member(detail::smeared(data, sd, mix_seed(ms, 0)), mix_seed(ms, 1))
                      : reference;
    }));
  }
  if (report) *report = std::move(rep);
  return EnsembleModel(std::move(members));
}

/// CAP members that split along freshly drawn random unit directions.
inline EnsembleModel random_directions(const Dataset& data, const FitConfig& fit_cfg,
                                       const EnsembleConfig& ens) {
  ens.validate();
  detail::require_base_size(data, fit_cfg);
  const std::size_t per_round =
      ens.rd_directions_per_split != 0 ? ens.rd_directions_per_split : data.dim();
  std::vector<MaxAffineModel> members;
  members.reserve(ens.members);
  for (std::size_t m = 0; m < ens.members; ++m) {
    members.push_back(detail::guarded_member(m, [&] {
      const std::uint64_t ms = mix_seed(ens.seed, m);
      FitConfig cfg = fit_cfg;
      cfg.seed = mix_seed(ms, 1);
      return fit_cap(data, cfg, SplitDirections::random(per_round, mix_seed(ms, 3)));
    }));
  }
  return EnsembleModel(std::move(members));
}

}  // namespace cvxreg
