#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mfc/model.hpp"
#include "mfc/riccati.hpp"

namespace mfc {

/// Solver for the implicit feedback map: rho(yhat) is the unique root u of
///   F(u; yhat) = R*u + r'(u)/2 + B*yhat + b'(u)*yhat.
/// Under (A3) with R > 0, F is strictly monotone in u and the root is unique;
/// Newton from u0 = -B*yhat/R with a bisection safeguard on an expanding
/// bracket converges for every admissible input.
class RhoSolver {
 public:
  explicit RhoSolver(const MfcModel& model, double tol = 1e-12, int max_iter = 200,
                     double a3_tol = 1e-3)
      : m_(&model), tol_(tol), max_iter_(max_iter), a3_tol_(a3_tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("RhoSolver: tol > 0 required");
    if (!(model.R > 0.0)) throw std::invalid_argument("RhoSolver: R > 0 required");
  }

  double residual(double u, double yhat) const {
    return m_->R * u + 0.5 * m_->r.d1(u) + m_->B * yhat + m_->b.d1(u) * yhat;
  }

  double rho(double yhat) const {
    const MfcModel& m = *m_;
    double u = -m.B * yhat / m.R;
    double f = residual(u, yhat);
    if (std::abs(f) <= tol_) return u;

    // Expanding bracket around the Newton seed; guaranteed to find a sign
    // change since R*u dominates for large |u|.
    double half = std::max(1.0, 2.0 * std::abs(u));
    double lo = u - half, hi = u + half;
    double flo = residual(lo, yhat), fhi = residual(hi, yhat);
    while (flo * fhi > 0.0) {
      half *= 2.0;
      lo = u - half;
      hi = u + half;
      if (half > 1e6)
        throw std::runtime_error("rho: no bracket within |u| <= 1e6 (check (A3) and R > 0)");
      flo = residual(lo, yhat);
      fhi = residual(hi, yhat);
    }
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;

    for (int it = 0; it < max_iter_; ++it) {
      const double fp = m.R + 0.5 * m.r.d2(u) + yhat * m.b.d2(u);
      double next;
      if (fp != 0.0) {
        next = u - f / fp;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      } else {
        next = 0.5 * (lo + hi);
      }
      u = next;
      f = residual(u, yhat);
      if (std::abs(f) <= tol_) return u;
      if (f * flo < 0.0) {
        hi = u;
      } else {
        lo = u;
        flo = f;
      }
    }
    throw std::runtime_error("rho: max iterations exceeded at yhat = " + std::to_string(yhat));
  }

  /// Implicit differentiation of F(rho(yhat); yhat) = 0.
  double rho_prime(double yhat) const {
    const MfcModel& m = *m_;
    const double u = rho(yhat);
    const double denom = m.R + 0.5 * m.r.d2(u) + yhat * m.b.d2(u);
    if (std::abs(denom) < a3_tol_)
      throw std::runtime_error("rho_prime: (A3) denominator below tolerance at yhat = " +
                               std::to_string(yhat));
    return -(m.B + m.b.d1(u)) / denom;
  }

  const MfcModel& model() const { return *m_; }
  double tol() const { return tol_; }

 private:
  const MfcModel* m_;
  double tol_;
  int max_iter_;
  double a3_tol_;
};

/// k(t, x, y) = rho(P(t) * x + y), the composite feedback map.
inline double k_map(const RhoSolver& solver, const TimeGridFn& P, double t, double x, double y) {
  if (t < 0.0 || t > P.horizon())
    throw std::invalid_argument("k_map: t outside [0, T]");
  return solver.rho(P.eval(t) * x + y);
}

}  // namespace mfc
