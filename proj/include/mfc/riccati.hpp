#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfc/errors.hpp"
#include "mfc/model.hpp"

namespace mfc {

/// Function on a uniform time grid 0 = t_0 < ... < t_K = T with linear
/// interpolation between nodes. eval(T) returns the stored terminal value
/// exactly.
class TimeGridFn {
 public:
  TimeGridFn() = default;
  TimeGridFn(double T, std::vector<double> values)
      : T_(T), values_(std::move(values)) {
    if (values_.size() < 2) throw std::invalid_argument("TimeGridFn: need at least 2 nodes");
    if (!(T_ > 0.0)) throw std::invalid_argument("TimeGridFn: T > 0 required");
    dt_ = T_ / static_cast<double>(values_.size() - 1);
  }

  double eval(double t) const {
    if (t <= 0.0) return values_.front();
    if (t >= T_) return values_.back();
    const double s = t / dt_;
    std::size_t i = static_cast<std::size_t>(s);
    if (i >= values_.size() - 1) i = values_.size() - 2;
    const double w = s - static_cast<double>(i);
    return values_[i] * (1.0 - w) + values_[i + 1] * w;
  }

  double horizon() const { return T_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return values_.size() - 1; }
  double node_time(std::size_t k) const { return dt_ * static_cast<double>(k); }
  const std::vector<double>& values() const { return values_; }

 private:
  double T_ = 1.0;
  double dt_ = 1.0;
  std::vector<double> values_;
};

namespace detail {

// Backward Riccati dP/dt = -(2*alpha*P + kappa - s*P^2), P(T) = terminal,
// classical 4th-order one-step scheme on a uniform grid.
inline TimeGridFn solve_riccati_scalar(double alpha, double kappa, double s,
                                       double terminal, double T, std::size_t K) {
  if (K < 10) throw std::invalid_argument("riccati: K >= 10 required");
  if (!(T > 0.0)) throw std::invalid_argument("riccati: T > 0 required");
  const double dt = T / static_cast<double>(K);
  const double h = -dt;  // marching backward in t
  auto f = [&](double p) { return -(2.0 * alpha * p + kappa - s * p * p); };
  std::vector<double> v(K + 1);
  v[K] = terminal;
  for (std::size_t k = K; k-- > 0;) {
    const double p = v[k + 1];
    const double k1 = f(p);
    const double k2 = f(p + 0.5 * h * k1);
    const double k3 = f(p + 0.5 * h * k2);
    const double k4 = f(p + h * k3);
    const double next = p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(next))
      throw NumericalError("riccati: blow-up at t = " +
                           std::to_string(dt * static_cast<double>(k)));
    v[k] = next;
  }
  return TimeGridFn(T, std::move(v));
}

}  // namespace detail

/// P of the scalar Riccati equation with P(T) = G.
inline TimeGridFn solve_p(const MfcModel& m, std::size_t K) {
  if (!(m.R > 0.0)) throw std::invalid_argument("solve_p: R > 0 required");
  return detail::solve_riccati_scalar(m.A, m.Q, m.B * m.B / m.R, m.G, m.T, K);
}

/// Pi of the aggregated LQ Riccati equation with Pi(T) = G + Gbar.
inline TimeGridFn solve_pi(double A, double Abar, double B, double Bbar,
                           double Q, double Qbar, double R, double Rbar,
                           double G, double Gbar, double T, std::size_t K) {
  const double Rs = R + Rbar;
  if (!(Rs > 0.0)) throw std::invalid_argument("solve_pi: R + Rbar > 0 required");
  if (!(Q + Qbar >= 0.0)) throw std::invalid_argument("solve_pi: Q + Qbar >= 0 required");
  if (!(G + Gbar >= 0.0)) throw std::invalid_argument("solve_pi: G + Gbar >= 0 required");
  const double Bs = B + Bbar;
  return detail::solve_riccati_scalar(A + Abar, Q + Qbar, Bs * Bs / Rs, G + Gbar, T, K);
}

/// Time derivative of P from the equation right-hand side; exact for the true
/// solution, so residual checks do not inherit interpolation noise.
inline double riccati_time_derivative(const MfcModel& m, double P) {
  return -(2.0 * m.A * P + m.Q - m.B * m.B / m.R * P * P);
}

/// Trapezoidal integral of the nodal values over [0, T].
inline double integrate_nodes(const TimeGridFn& f) {
  const auto& v = f.values();
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return s * f.dt();
}

}  // namespace mfc
