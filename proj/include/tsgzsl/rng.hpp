#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace tsgzsl::core {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seedable generator used for every random decision in the project.
/// All transforms (bounded ints, shuffles, gaussians) are spelled out here so
/// that results do not depend on standard-library distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    const std::uint64_t max = ~0ull;
    const std::uint64_t lim = max - (max % n + 1) % n;
    std::uint64_t r = engine_();
    while (r > lim) r = engine_();
    return r % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Box-Muller with cached spare.
  double normal(double mu, double sigma) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + spare_ * sigma;
    }
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mu + r * std::cos(theta) * sigma;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  template <class T>
  const T& choice(const std::vector<T>& v) {
    if (v.empty()) throw std::invalid_argument("Rng::choice: empty choice set");
    return v[static_cast<std::size_t>(uniform_int(v.size()))];
  }

  /// Independent generator for a named sub-task, stable across runs.
  Rng derive(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream))); }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tsgzsl::core
