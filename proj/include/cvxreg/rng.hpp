#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cvxreg {

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive a child seed. For a fixed parent the map index -> seed is
/// injective: the affine step is a bijection mod 2^64 and so is splitmix64.
constexpr std::uint64_t mix_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(splitmix64(parent) + 0xd1b54a32d192ed03ULL * (index + 1));
}

/// FNV-1a, used to derive per-name streams that do not depend on list order.
constexpr std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Uniform direction on the unit sphere in R^p.
  std::vector<double> unit_vector(std::size_t p) {
    std::vector<double> v(p);
    for (;;) {
      double norm2 = 0.0;
      for (auto& e : v) {
        e = normal();
        norm2 += e * e;
      }
      if (norm2 > 1e-24) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& e : v) e *= inv;
        return v;
      }
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cvxreg
