#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace mfc {

namespace detail {

// SplitMix64 finalizer; word(key, n) below is the SplitMix64 sequence seeded
// at key, which makes every draw a pure function of (key, counter).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline double to_unit_open(std::uint64_t w) {
  // (0, 1): never 0 (safe under log), never 1.
  return (static_cast<double>(w >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

enum class StreamTag : std::uint64_t {
  kCommon = 0x436f6d6e,   // W^0
  kIdio = 0x4964696f,     // W_i
  kInit = 0x496e6974,     // xi_i
  kPerturb = 0x50657274,  // Gateaux directions
};

/// Stateless substream: draw n is a pure function of (key, n), so evaluation
/// order and ensemble decomposition never change the values.
class Substream {
 public:
  explicit Substream(std::uint64_t key) : key_(key) {}

  std::uint64_t word(std::uint64_t n) const {
    return detail::mix64(key_ + n * 0x9E3779B97F4A7C15ull);
  }
  double uniform(std::uint64_t n) const { return detail::to_unit_open(word(n)); }

  /// Standard normal via Box-Muller on words 2n, 2n+1.
  double normal(std::uint64_t n) const {
    const double u1 = uniform(2 * n);
    const double u2 = uniform(2 * n + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

/// Combines a replication index and a particle index into one substream
/// index; particle i keeps the same stream for every ensemble size.
inline std::uint64_t combine_index(std::uint64_t replication, std::uint64_t particle) {
  return (replication << 32) | (particle & 0xffffffffull);
}

/// Deterministic Brownian increment plan: substream (tag, index) yields the
/// increments of one scalar Brownian motion on the uniform grid dt = T/n_t.
class NoisePlan {
 public:
  NoisePlan(std::uint64_t base_seed, std::size_t n_t, double T)
      : seed_(base_seed), n_t_(n_t), T_(T) {
    if (n_t == 0) throw std::invalid_argument("NoisePlan: n_t >= 1 required");
    if (!(T > 0.0)) throw std::invalid_argument("NoisePlan: T > 0 required");
    dt_ = T / static_cast<double>(n_t);
    sqrt_dt_ = std::sqrt(dt_);
  }

  Substream substream(StreamTag tag, std::uint64_t index) const {
    std::uint64_t h = detail::mix64(seed_ ^ (static_cast<std::uint64_t>(tag) *
                                             0xD6E8FEB86659FD93ull));
    return Substream(detail::mix64(h + index * 0xA0761D6478BD642Full));
  }

  /// N(0, dt) increment of step k for the given stream.
  double increment(StreamTag tag, std::uint64_t index, std::uint64_t step) const {
    return sqrt_dt_ * substream(tag, index).normal(step);
  }

  std::uint64_t base_seed() const { return seed_; }
  std::size_t n_t() const { return n_t_; }
  double horizon() const { return T_; }
  double dt() const { return dt_; }

 private:
  std::uint64_t seed_;
  std::size_t n_t_;
  double T_;
  double dt_;
  double sqrt_dt_;
};

}  // namespace mfc
