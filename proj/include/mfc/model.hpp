#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfc/functions.hpp"

namespace mfc {

enum class InitKind { kPoint, kGaussian, kUniform };

inline const char* init_kind_name(InitKind k) {
  switch (k) {
    case InitKind::kPoint: return "point";
    case InitKind::kGaussian: return "gaussian";
    case InitKind::kUniform: return "uniform";
  }
  return "?";
}

/// Law of the i.i.d. initial states. `spread` is the standard deviation for
/// gaussian and the half-width for uniform.
struct InitialLaw {
  InitKind kind = InitKind::kPoint;
  double mean = 0.0;
  double spread = 0.0;

  double second_moment() const {
    switch (kind) {
      case InitKind::kPoint: return mean * mean;
      case InitKind::kGaussian: return mean * mean + spread * spread;
      case InitKind::kUniform: return mean * mean + spread * spread / 3.0;
    }
    return 0.0;
  }

  double variance() const { return second_moment() - mean * mean; }

  /// Maps one standard normal and one unit uniform draw to a sample.
  double sample(double std_normal, double unit_uniform) const {
    switch (kind) {
      case InitKind::kPoint: return mean;
      case InitKind::kGaussian: return mean + spread * std_normal;
      case InitKind::kUniform: return mean + spread * (2.0 * unit_uniform - 1.0);
    }
    return mean;
  }

  void validate() const {
    if (!(spread >= 0.0) || !std::isfinite(spread) || !std::isfinite(mean))
      throw std::invalid_argument("InitialLaw: mean finite and spread >= 0 required");
  }
};

/// Full problem data: linear coefficients, the five mean-field couplings with
/// analytic derivatives, horizon and initial law.
struct MfcModel {
  double A = 0.0;
  double B = 1.0;
  double sigma = 0.0;   // idiosyncratic volatility
  double sigma0 = 1.0;  // common volatility, > 0
  double Q = 0.0;
  double R = 1.0;
  double G = 0.0;
  double T = 1.0;
  ScalarC2Fn a, b, q, r, g;
  InitialLaw init;

  /// Structural invariants. R > 0 is checked separately by the assumption
  /// validator (hard failure) so a bad R surfaces as an assumption failure,
  /// not a parse error.
  void validate() const {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("model: sigma0 > 0 required");
    if (!(sigma >= 0.0)) throw std::invalid_argument("model: sigma >= 0 required");
    if (!(Q >= 0.0)) throw std::invalid_argument("model: Q >= 0 required");
    if (!(G >= 0.0)) throw std::invalid_argument("model: G >= 0 required");
    if (!(T > 0.0)) throw std::invalid_argument("model: T > 0 required");
    for (double v : {A, B, sigma, sigma0, Q, R, G, T})
      if (!std::isfinite(v)) throw std::invalid_argument("model: non-finite coefficient");
    init.validate();
  }
};

/// Barred coefficients of a purely linear-quadratic coupling set:
/// a(x)=Abar*x, b(x)=Bbar*x, q(x)=Qbar*x^2, r(x)=Rbar*x^2, g(x)=Gbar*x^2.
struct LqCoeffs {
  double Abar = 0.0, Bbar = 0.0, Qbar = 0.0, Rbar = 0.0, Gbar = 0.0;
};

namespace detail {
inline bool pure_linear(const ScalarC2Fn& f, double* slope) {
  const auto& p = f.params();
  switch (f.kind()) {
    case FnKind::kZero: *slope = 0.0; return true;
    case FnKind::kAffine:
      if (p[0] != 0.0) return false;
      *slope = p[1];
      return true;
    case FnKind::kScaledSum:
      if (p[0] != 0.0 || p[2] != 0.0 || p[3] != 0.0 || p[4] != 0.0 || p[5] != 0.0 || p[6] != 0.0)
        return false;
      *slope = p[1];
      return true;
    default: return false;
  }
}
inline bool pure_quadratic(const ScalarC2Fn& f, double* coeff) {
  const auto& p = f.params();
  switch (f.kind()) {
    case FnKind::kZero: *coeff = 0.0; return true;
    case FnKind::kScaledSum:
      if (p[0] != 0.0 || p[1] != 0.0 || p[3] != 0.0 || p[4] != 0.0 || p[5] != 0.0 || p[6] != 0.0)
        return false;
      *coeff = p[2];
      return true;
    default: return false;
  }
}
}  // namespace detail

/// Recognizes LQ coupling data; used to enable the closed-form oracles.
inline bool lq_extract(const MfcModel& m, LqCoeffs* out) {
  LqCoeffs c;
  if (!detail::pure_linear(m.a, &c.Abar)) return false;
  if (!detail::pure_linear(m.b, &c.Bbar)) return false;
  if (!detail::pure_quadratic(m.q, &c.Qbar)) return false;
  if (!detail::pure_quadratic(m.r, &c.Rbar)) return false;
  if (!detail::pure_quadratic(m.g, &c.Gbar)) return false;
  if (out) *out = c;
  return true;
}

}  // namespace mfc
