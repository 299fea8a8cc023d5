#pragma once

// Synthetic data sources for the four benchmark problems. Each generator is
// a pure function of (n, seed).

#include <cmath>
#include <span>
#include <vector>

#include "cvxreg/core.hpp"
#include "cvxreg/optimizer.hpp"
#include "cvxreg/rng.hpp"

namespace cvxreg::gen {

/// (x1 + .5 x2 + x3)^2 - x4 + .25 x5^2
inline double f_syn(std::span<const double> x) {
  const double s = x[0] + 0.5 * x[1] + x[2];
  return s * s - x[3] + 0.25 * x[4] * x[4];
}

/// x' Q x with Q = [1 .2; .2 1]
inline double f_opt(std::span<const double> x) {
  return x[0] * x[0] + x[1] * x[1] + 0.4 * x[0] * x[1];
}

/// Gate power from supply and threshold voltages (Vdd, Vth).
inline double f_power(std::span<const double> v) {
  const double vdd = v[0], vth = v[1];
  return vdd * vdd + 30.0 * vdd * std::exp(-(vth - 0.06 * vdd) / 0.039);
}

/// Inductor loop resistance from diameter, width and frequency (D, W, f).
inline double f_osc(std::span<const double> v) {
  const double D = v[0], W = v[1], f = v[2];
  return 0.1 * D / W + 3e-6 * D * std::pow(W, -0.84) * std::sqrt(f) +
         5e-9 * D * std::pow(W, -0.76) * std::pow(f, 0.75) + 0.02 * D * W * f;
}

inline Box opt_box() { return Box{{-1.0, -1.0}, {1.0, 1.0}}; }

/// Log-space sampling ranges, one [lo, hi] per covariate.
inline std::vector<std::pair<double, double>> power_log_ranges() {
  return {{std::log(1.0), std::log(2.0)}, {std::log(0.2), std::log(0.4)}};
}

inline std::vector<std::pair<double, double>> osc_log_ranges() {
  return {{-10.0, -5.0}, {-13.0, -10.0}, {22.0, 23.0}};
}

inline std::vector<double> syn_covariates(std::size_t n, Rng& rng) {
  std::vector<double> x(n * 5);
  for (auto& v : x) v = rng.normal();
  return x;
}

inline Dataset gen_syn(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto x = syn_covariates(n, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = f_syn({&x[i * 5], 5}) + rng.normal();
  return Dataset(5, std::move(x), std::move(y));
}

inline Dataset gen_opt(std::size_t n, std::uint64_t seed, double noise_sd = std::sqrt(0.1)) {
  Rng rng(seed);
  std::vector<double> x(n * 2), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[2 * i] = rng.uniform(-1.0, 1.0);
    x[2 * i + 1] = rng.uniform(-1.0, 1.0);
    y[i] = f_opt({&x[2 * i], 2}) + noise_sd * rng.normal();
  }
  return Dataset(2, std::move(x), std::move(y));
}

namespace detail {

template <class F>
Dataset log_uniform_sample(std::size_t n, std::uint64_t seed,
                           const std::vector<std::pair<double, double>>& ranges, F&& f) {
  Rng rng(seed);
  const std::size_t p = ranges.size();
  std::vector<double> x(n * p), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) x[i * p + j] = std::exp(rng.uniform(ranges[j].first, ranges[j].second));
    y[i] = f(std::span<const double>(&x[i * p], p));
  }
  return Dataset(p, std::move(x), std::move(y));
}

}  // namespace detail

/// Noiseless power samples in original units; log(Vdd) and log(Vth) are uniform.
inline Dataset gen_power(std::size_t n, std::uint64_t seed) {
  return detail::log_uniform_sample(n, seed, power_log_ranges(), [](auto v) { return f_power(v); });
}

/// Noiseless resistance samples in original units; log D, log W, log f uniform.
inline Dataset gen_osc(std::size_t n, std::uint64_t seed) {
  return detail::log_uniform_sample(n, seed, osc_log_ranges(), [](auto v) { return f_osc(v); });
}

}  // namespace cvxreg::gen
