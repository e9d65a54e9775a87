#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfc {

/// Closed catalog of scalar C2 functions with analytic first and second
/// derivatives. Keeping the catalog closed means Newton iterations and PDE
/// source terms never see finite-difference noise.
enum class FnKind {
  kZero,
  kConstant,
  kAffine,       // p0 + p1*x (unbounded value: oracle-only)
  kSin,          // p0 * sin(x)
  kCos,          // p0 * cos(x)
  kTanh,         // p0 * tanh(x)
  kNegLogistic,  // -1/(e^x + 1)
  kScaledSum,    // c0 + c1*x + c2*x^2 + c3*sin x + c4*cos x + c5*tanh x + c6*neg_logistic
};

inline const char* fn_kind_name(FnKind k) {
  switch (k) {
    case FnKind::kZero: return "zero";
    case FnKind::kConstant: return "constant";
    case FnKind::kAffine: return "affine";
    case FnKind::kSin: return "sin";
    case FnKind::kCos: return "cos";
    case FnKind::kTanh: return "tanh";
    case FnKind::kNegLogistic: return "neg_logistic";
    case FnKind::kScaledSum: return "scaled_sum";
  }
  return "?";
}

namespace detail {

// -1/(e^x+1) and derivatives, stable on both tails.
inline double neg_logistic_value(double x) {
  if (x >= 0.0) {
    const double t = std::exp(-x);
    return -t / (1.0 + t);
  }
  return -1.0 / (1.0 + std::exp(x));
}
inline double neg_logistic_d1(double x) {
  // e^x/(1+e^x)^2 = sigma(x) * sigma(-x)
  const double t = std::exp(-std::abs(x));
  const double s = t / (1.0 + t);
  return s * (1.0 - s);
}
inline double neg_logistic_d2(double x) {
  // e^x(1-e^x)/(1+e^x)^3 = -d1(x) * tanh(x/2)
  return -neg_logistic_d1(x) * std::tanh(0.5 * x);
}

// sup over R of |d/dx^2 of tanh| = max |2 tanh sech^2| at tanh = 1/sqrt(3)
constexpr double kTanhD2Bound = 0.7698003589195;
// sup over R of |e^x(1-e^x)/(1+e^x)^3| = 1/(6 sqrt(3))
constexpr double kNegLogisticD2Bound = 0.09622504486494;

}  // namespace detail

class ScalarC2Fn {
 public:
  ScalarC2Fn() = default;

  double value(double x) const {
    switch (kind_) {
      case FnKind::kZero: return 0.0;
      case FnKind::kConstant: return p_[0];
      case FnKind::kAffine: return p_[0] + p_[1] * x;
      case FnKind::kSin: return p_[0] * std::sin(x);
      case FnKind::kCos: return p_[0] * std::cos(x);
      case FnKind::kTanh: return p_[0] * std::tanh(x);
      case FnKind::kNegLogistic: return detail::neg_logistic_value(x);
      case FnKind::kScaledSum:
        return p_[0] + p_[1] * x + p_[2] * x * x + p_[3] * std::sin(x) +
               p_[4] * std::cos(x) + p_[5] * std::tanh(x) +
               p_[6] * detail::neg_logistic_value(x);
    }
    return 0.0;
  }

  double d1(double x) const {
    switch (kind_) {
      case FnKind::kZero: return 0.0;
      case FnKind::kConstant: return 0.0;
      case FnKind::kAffine: return p_[1];
      case FnKind::kSin: return p_[0] * std::cos(x);
      case FnKind::kCos: return -p_[0] * std::sin(x);
      case FnKind::kTanh: {
        const double t = std::tanh(x);
        return p_[0] * (1.0 - t * t);
      }
      case FnKind::kNegLogistic: return detail::neg_logistic_d1(x);
      case FnKind::kScaledSum: {
        const double t = std::tanh(x);
        return p_[1] + 2.0 * p_[2] * x + p_[3] * std::cos(x) -
               p_[4] * std::sin(x) + p_[5] * (1.0 - t * t) +
               p_[6] * detail::neg_logistic_d1(x);
      }
    }
    return 0.0;
  }

  double d2(double x) const {
    switch (kind_) {
      case FnKind::kZero: return 0.0;
      case FnKind::kConstant: return 0.0;
      case FnKind::kAffine: return 0.0;
      case FnKind::kSin: return -p_[0] * std::sin(x);
      case FnKind::kCos: return -p_[0] * std::cos(x);
      case FnKind::kTanh: {
        const double t = std::tanh(x);
        return -2.0 * p_[0] * t * (1.0 - t * t);
      }
      case FnKind::kNegLogistic: return detail::neg_logistic_d2(x);
      case FnKind::kScaledSum: {
        const double t = std::tanh(x);
        return 2.0 * p_[2] - p_[3] * std::sin(x) - p_[4] * std::cos(x) -
               2.0 * p_[5] * t * (1.0 - t * t) +
               p_[6] * detail::neg_logistic_d2(x);
      }
    }
    return 0.0;
  }

  FnKind kind() const { return kind_; }
  const std::array<double, 7>& params() const { return p_; }

  /// True when value, d1 and d2 are all bounded on R ((A1) eligibility).
  bool is_bounded() const {
    switch (kind_) {
      case FnKind::kAffine: return p_[1] == 0.0;
      case FnKind::kScaledSum: return p_[1] == 0.0 && p_[2] == 0.0;
      default: return true;
    }
  }

  /// sup_R |f|, |f'|, |f''| (infinity when unbounded).
  double value_bound() const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case FnKind::kZero: return 0.0;
      case FnKind::kConstant: return std::abs(p_[0]);
      case FnKind::kAffine: return p_[1] == 0.0 ? std::abs(p_[0]) : inf;
      case FnKind::kSin:
      case FnKind::kCos:
      case FnKind::kTanh: return std::abs(p_[0]);
      case FnKind::kNegLogistic: return 1.0;
      case FnKind::kScaledSum:
        if (p_[1] != 0.0 || p_[2] != 0.0) return inf;
        return std::abs(p_[0]) + std::abs(p_[3]) + std::abs(p_[4]) +
               std::abs(p_[5]) + std::abs(p_[6]);
    }
    return 0.0;
  }

  double d1_bound() const {
    const double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case FnKind::kZero:
      case FnKind::kConstant: return 0.0;
      case FnKind::kAffine: return std::abs(p_[1]);
      case FnKind::kSin:
      case FnKind::kCos:
      case FnKind::kTanh: return std::abs(p_[0]);
      case FnKind::kNegLogistic: return 0.25;
      case FnKind::kScaledSum:
        if (p_[2] != 0.0) return inf;
        return std::abs(p_[1]) + std::abs(p_[3]) + std::abs(p_[4]) +
               std::abs(p_[5]) + 0.25 * std::abs(p_[6]);
    }
    return 0.0;
  }

  double d2_bound() const {
    switch (kind_) {
      case FnKind::kZero:
      case FnKind::kConstant:
      case FnKind::kAffine: return 0.0;
      case FnKind::kSin:
      case FnKind::kCos: return std::abs(p_[0]);
      case FnKind::kTanh: return std::abs(p_[0]) * detail::kTanhD2Bound;
      case FnKind::kNegLogistic: return detail::kNegLogisticD2Bound;
      case FnKind::kScaledSum:
        return 2.0 * std::abs(p_[2]) + std::abs(p_[3]) + std::abs(p_[4]) +
               std::abs(p_[5]) * detail::kTanhD2Bound +
               std::abs(p_[6]) * detail::kNegLogisticD2Bound;
    }
    return 0.0;
  }

  friend ScalarC2Fn catalog_make(FnKind kind, const std::vector<double>& params);

 private:
  FnKind kind_ = FnKind::kZero;
  std::array<double, 7> p_{};  // unused entries stay zero
};

inline ScalarC2Fn catalog_make(FnKind kind, const std::vector<double>& params = {}) {
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (params.size() < lo || params.size() > hi)
      throw std::invalid_argument(std::string("catalog_make: wrong parameter count for ") +
                                  fn_kind_name(kind));
  };
  ScalarC2Fn f;
  f.kind_ = kind;
  switch (kind) {
    case FnKind::kZero:
      need(0, 0);
      break;
    case FnKind::kConstant:
      need(1, 1);
      f.p_[0] = params[0];
      break;
    case FnKind::kAffine:
      need(2, 2);
      f.p_[0] = params[0];
      f.p_[1] = params[1];
      break;
    case FnKind::kSin:
    case FnKind::kCos:
    case FnKind::kTanh:
      need(0, 1);
      f.p_[0] = params.empty() ? 1.0 : params[0];
      if (f.p_[0] < 0.0)
        throw std::invalid_argument("catalog_make: negative amplitude");
      break;
    case FnKind::kNegLogistic:
      need(0, 0);
      break;
    case FnKind::kScaledSum:
      need(0, 7);
      for (std::size_t i = 0; i < params.size(); ++i) f.p_[i] = params[i];
      break;
  }
  for (double p : f.p_)
    if (!std::isfinite(p)) throw std::invalid_argument("catalog_make: non-finite parameter");
  return f;
}

inline ScalarC2Fn catalog_make(const std::string& kind, const std::vector<double>& params = {}) {
  if (kind == "zero") return catalog_make(FnKind::kZero, params);
  if (kind == "constant") return catalog_make(FnKind::kConstant, params);
  if (kind == "affine") return catalog_make(FnKind::kAffine, params);
  if (kind == "sin") return catalog_make(FnKind::kSin, params);
  if (kind == "cos") return catalog_make(FnKind::kCos, params);
  if (kind == "tanh") return catalog_make(FnKind::kTanh, params);
  if (kind == "neg_logistic") return catalog_make(FnKind::kNegLogistic, params);
  if (kind == "scaled_sum") return catalog_make(FnKind::kScaledSum, params);
  throw std::invalid_argument("catalog_make: unknown kind '" + kind + "'");
}

}  // namespace mfc
