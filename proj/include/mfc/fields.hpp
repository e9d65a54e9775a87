#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfc/errors.hpp"
#include "mfc/feedback.hpp"
#include "mfc/model.hpp"
#include "mfc/riccati.hpp"

namespace mfc {

/// Decoupling field on a uniform (t, xhat) grid. Bilinear interpolation
/// inside the box, linear extrapolation in xhat beyond it (the solved fields
/// are asymptotically affine); every extrapolated evaluation bumps a counter.
class SpaceTimeField {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(double T, std::size_t nt, double x_lo, double x_hi, std::size_t nx)
      : T_(T), nt_(nt), x_lo_(x_lo), x_hi_(x_hi), nx_(nx),
        values_((nt + 1) * (nx + 1), 0.0) {
    if (!(T > 0.0) || nt < 4 || nx < 8 || !(x_hi > x_lo))
      throw std::invalid_argument("SpaceTimeField: bad grid");
    dt_ = T_ / static_cast<double>(nt_);
    dx_ = (x_hi_ - x_lo_) / static_cast<double>(nx_);
  }

  SpaceTimeField(const SpaceTimeField& o)
      : T_(o.T_), nt_(o.nt_), x_lo_(o.x_lo_), x_hi_(o.x_hi_), nx_(o.nx_),
        dt_(o.dt_), dx_(o.dx_), values_(o.values_),
        extrapolations_(o.extrapolation_count()) {}
  SpaceTimeField& operator=(const SpaceTimeField& o) {
    if (this != &o) {
      T_ = o.T_; nt_ = o.nt_; x_lo_ = o.x_lo_; x_hi_ = o.x_hi_; nx_ = o.nx_;
      dt_ = o.dt_; dx_ = o.dx_; values_ = o.values_;
      extrapolations_.store(o.extrapolation_count(), std::memory_order_relaxed);
    }
    return *this;
  }

  double& at(std::size_t k, std::size_t j) { return values_[k * (nx_ + 1) + j]; }
  double at(std::size_t k, std::size_t j) const { return values_[k * (nx_ + 1) + j]; }

  double eval(double t, double x) const {
    const auto [k, wt] = time_cell(t);
    if (x < x_lo_ || x > x_hi_) {
      extrapolations_.fetch_add(1, std::memory_order_relaxed);
      // Linear continuation with the edge slope of each bracketing slice.
      const double lo = eval_slice_extrap(k, x);
      const double hi = eval_slice_extrap(k + 1, x);
      return lo * (1.0 - wt) + hi * wt;
    }
    const auto [j, wx] = space_cell(x);
    const double v00 = at(k, j), v01 = at(k, j + 1);
    const double v10 = at(k + 1, j), v11 = at(k + 1, j + 1);
    return (v00 * (1.0 - wx) + v01 * wx) * (1.0 - wt) +
           (v10 * (1.0 - wx) + v11 * wx) * wt;
  }

  /// Central space derivative, bilinearly interpolated between node stencils.
  double d_x(double t, double x) const {
    const auto [k, wt] = time_cell(t);
    const auto [j, wx] = space_cell(std::clamp(x, x_lo_, x_hi_));
    const double d00 = node_dx(k, j), d01 = node_dx(k, j + 1);
    const double d10 = node_dx(k + 1, j), d11 = node_dx(k + 1, j + 1);
    return (d00 * (1.0 - wx) + d01 * wx) * (1.0 - wt) +
           (d10 * (1.0 - wx) + d11 * wx) * wt;
  }

  double d_xx(double t, double x) const {
    const auto [k, wt] = time_cell(t);
    const auto [j, wx] = space_cell(std::clamp(x, x_lo_, x_hi_));
    const double d00 = node_dxx(k, j), d01 = node_dxx(k, j + 1);
    const double d10 = node_dxx(k + 1, j), d11 = node_dxx(k + 1, j + 1);
    return (d00 * (1.0 - wx) + d01 * wx) * (1.0 - wt) +
           (d10 * (1.0 - wx) + d11 * wx) * wt;
  }

  double node_dx(std::size_t k, std::size_t j) const {
    if (j == 0) return (at(k, 1) - at(k, 0)) / dx_;
    if (j == nx_) return (at(k, nx_) - at(k, nx_ - 1)) / dx_;
    return (at(k, j + 1) - at(k, j - 1)) / (2.0 * dx_);
  }
  double node_dxx(std::size_t k, std::size_t j) const {
    if (j == 0 || j == nx_) return 0.0;  // zero-curvature boundary
    return (at(k, j + 1) - 2.0 * at(k, j) + at(k, j - 1)) / (dx_ * dx_);
  }
  /// 4th-order central time derivative; requires 2 <= k <= nt-2.
  double node_dt(std::size_t k, std::size_t j) const {
    return (-at(k + 2, j) + 8.0 * at(k + 1, j) - 8.0 * at(k - 1, j) + at(k - 2, j)) /
           (12.0 * dt_);
  }

  double horizon() const { return T_; }
  double dt() const { return dt_; }
  double dx() const { return dx_; }
  double x_lo() const { return x_lo_; }
  double x_hi() const { return x_hi_; }
  std::size_t nt() const { return nt_; }
  std::size_t nx() const { return nx_; }
  double node_time(std::size_t k) const { return dt_ * static_cast<double>(k); }
  double node_x(std::size_t j) const { return x_lo_ + dx_ * static_cast<double>(j); }
  const std::vector<double>& values() const { return values_; }
  std::uint64_t extrapolation_count() const {
    return extrapolations_.load(std::memory_order_relaxed);
  }

 private:
  std::pair<std::size_t, double> time_cell(double t) const {
    if (t <= 0.0) return {0, 0.0};
    if (t >= T_) return {nt_ - 1, 1.0};
    const double s = t / dt_;
    std::size_t k = static_cast<std::size_t>(s);
    if (k >= nt_) k = nt_ - 1;
    return {k, s - static_cast<double>(k)};
  }
  std::pair<std::size_t, double> space_cell(double x) const {
    const double s = (x - x_lo_) / dx_;
    if (s <= 0.0) return {0, 0.0};
    if (s >= static_cast<double>(nx_)) return {nx_ - 1, 1.0};
    std::size_t j = static_cast<std::size_t>(s);
    if (j >= nx_) j = nx_ - 1;
    return {j, s - static_cast<double>(j)};
  }
  double eval_slice_extrap(std::size_t k, double x) const {
    if (x < x_lo_) return at(k, 0) + (x - x_lo_) * (at(k, 1) - at(k, 0)) / dx_;
    return at(k, nx_) + (x - x_hi_) * (at(k, nx_) - at(k, nx_ - 1)) / dx_;
  }

  double T_ = 1.0;
  std::size_t nt_ = 0;
  double x_lo_ = -1.0, x_hi_ = 1.0;
  std::size_t nx_ = 0;
  double dt_ = 1.0, dx_ = 1.0;
  std::vector<double> values_;
  mutable std::atomic<std::uint64_t> extrapolations_{0};
};

struct PdeConfig {
  double x_lo = -6.0;
  double x_hi = 6.0;
  std::size_t nx = 401;
  std::size_t nt = 2000;
  double cfl_safety = 0.8;

  /// Validating factory; `drift_bound` is an a-priori estimate of the maximal
  /// advection speed (the solver still enforces CFL per slice).
  static PdeConfig make(double x_lo, double x_hi, std::size_t nx, std::size_t nt,
                        double T, double drift_bound, double cfl_safety = 0.8) {
    if (!(x_hi > x_lo)) throw std::invalid_argument("PdeConfig: x_hi > x_lo required");
    if (nx < 8 || nt < 4) throw std::invalid_argument("PdeConfig: grid too small");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0))
      throw std::invalid_argument("PdeConfig: cfl_safety in (0,1] required");
    PdeConfig c{x_lo, x_hi, nx, nt, cfl_safety};
    const double dx = (x_hi - x_lo) / static_cast<double>(nx);
    const double dt = T / static_cast<double>(nt);
    if (drift_bound > 0.0 && dt * drift_bound > cfl_safety * dx)
      throw CflError("PdeConfig: nt too small for advection bound " +
                     std::to_string(drift_bound));
    return c;
  }
};

/// Estimate of the maximal advection speed |A x + a(x) + B k + b(k)| over the
/// domain, with k evaluated against the terminal slice. Used for the
/// construction-time CFL check and the default-domain heuristic.
inline double estimate_advection_bound(const MfcModel& m, const TimeGridFn& P,
                                       double x_lo, double x_hi) {
  RhoSolver rho(m);
  double pmax = 0.0;
  for (double v : P.values()) pmax = std::max(pmax, std::abs(v));
  double bound = 0.0;
  const int n = 65;
  for (int i = 0; i < n; ++i) {
    const double s = x_lo + (x_hi - x_lo) * static_cast<double>(i) / (n - 1);
    const double u = rho.rho(pmax * s + 0.5 * m.g.d1(s));
    const double v = std::abs(m.A * s + m.a.value(s) + m.B * u + m.b.value(u));
    bound = std::max(bound, v);
  }
  return 2.0 * bound;
}

/// Default spatial box [x0 - w, x0 + w]: initial spread + Brownian excursion
/// + drift excursion + 2 cells of slack, so simulated paths stay inside with
/// overwhelming probability.
inline std::pair<double, double> domain_default(const MfcModel& m, const TimeGridFn& P) {
  const double x0 = m.init.mean;
  const double w0 = 6.0 * m.sigma0 * std::sqrt(m.T) + 3.0 * m.init.spread + 2.0;
  const double drift = estimate_advection_bound(m, P, x0 - w0, x0 + w0);
  const double w = w0 + m.T * drift;
  return {x0 - w, x0 + w};
}

/// Backward finite-difference solve of the decoupling-field PDE with terminal
/// slice g'(xhat)/2: implicit (tridiagonal) diffusion with coefficient
/// diffusion_coeff/2, first-order upwind advection and explicit source.
/// diffusion_coeff = sigma0^2 gives the mean-field Phi; sigma^2/N + sigma0^2
/// gives the N-particle Psi.
inline SpaceTimeField solve_decoupling_field(const MfcModel& m, const TimeGridFn& P,
                                             const PdeConfig& cfg, double diffusion_coeff) {
  if (!(m.R > 0.0)) throw std::invalid_argument("solve_decoupling_field: R > 0 required");
  if (!(diffusion_coeff > 0.0))
    throw std::invalid_argument("solve_decoupling_field: diffusion_coeff > 0 required");

  SpaceTimeField f(m.T, cfg.nt, cfg.x_lo, cfg.x_hi, cfg.nx);
  const std::size_t nx = cfg.nx, nt = cfg.nt;
  const double dx = f.dx(), dt = f.dt();
  const double invR = 1.0 / m.R;
  RhoSolver rho(m);

  for (std::size_t j = 0; j <= nx; ++j) f.at(nt, j) = 0.5 * m.g.d1(f.node_x(j));

  const double alpha = 0.5 * diffusion_coeff * dt / (dx * dx);
  std::vector<double> rhs(nx + 1), diag(nx + 1), lower(nx + 1), upper(nx + 1);

  for (std::size_t k = nt; k-- > 0;) {
    const double t_next = f.node_time(k + 1);
    const double Pt = P.eval(t_next);

    // Explicit advection + source from the known slice.
    double vmax = 0.0;
    for (std::size_t j = 0; j <= nx; ++j) {
      const double s = f.node_x(j);
      const double phi = f.at(k + 1, j);
      const double u = rho.rho(Pt * s + phi);
      const double bu = m.b.value(u);
      const double adv = m.A * s + m.a.value(s) + m.B * u + bu;
      vmax = std::max(vmax, std::abs(adv));
      double grad;
      if (adv > 0.0) {
        grad = (j == nx) ? (f.at(k + 1, nx) - f.at(k + 1, nx - 1)) / dx
                         : (f.at(k + 1, j + 1) - phi) / dx;
      } else {
        grad = (j == 0) ? (f.at(k + 1, 1) - f.at(k + 1, 0)) / dx
                        : (phi - f.at(k + 1, j - 1)) / dx;
      }
      const double src = Pt * (m.a.value(s) + invR * m.B * m.B * Pt * s + m.B * u + bu +
                               m.a.d1(s) * s) +
                         0.5 * m.q.d1(s) + (m.A + m.a.d1(s)) * phi;
      rhs[j] = phi + dt * (adv * grad + src);
    }
    if (dt * vmax > cfg.cfl_safety * dx)
      throw CflError("solve_decoupling_field: CFL violated at t = " +
                     std::to_string(f.node_time(k)) + " (|v| = " + std::to_string(vmax) + ")");

    // Implicit diffusion on rows 1..nx-1. Zero-curvature ghosts cancel the
    // diffusion stencil on rows 1 and nx-1.
    for (std::size_t j = 1; j < nx; ++j) {
      if (j == 1 || j == nx - 1) {
        lower[j] = 0.0; diag[j] = 1.0; upper[j] = 0.0;
      } else {
        lower[j] = -alpha; diag[j] = 1.0 + 2.0 * alpha; upper[j] = -alpha;
      }
    }
    for (std::size_t j = 2; j < nx; ++j) {  // Thomas elimination
      const double w = lower[j] / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    f.at(k, nx - 1) = rhs[nx - 1] / diag[nx - 1];
    for (std::size_t j = nx - 1; j-- > 1;)
      f.at(k, j) = (rhs[j] - upper[j] * f.at(k, j + 1)) / diag[j];

    f.at(k, 0) = 2.0 * f.at(k, 1) - f.at(k, 2);
    f.at(k, nx) = 2.0 * f.at(k, nx - 1) - f.at(k, nx - 2);

    for (std::size_t j = 0; j <= nx; ++j)
      if (!std::isfinite(f.at(k, j)))
        throw NumericalError("solve_decoupling_field: non-finite slice at t = " +
                             std::to_string(f.node_time(k)));
  }
  return f;
}

/// Exact affine field (Pi(t) - P(t)) * xhat of the LQ case.
inline SpaceTimeField lq_phi_oracle(const TimeGridFn& P, const TimeGridFn& Pi,
                                    const PdeConfig& cfg) {
  SpaceTimeField f(P.horizon(), cfg.nt, cfg.x_lo, cfg.x_hi, cfg.nx);
  for (std::size_t k = 0; k <= cfg.nt; ++k) {
    const double t = f.node_time(k);
    const double c = Pi.eval(t) - P.eval(t);
    for (std::size_t j = 0; j <= cfg.nx; ++j) f.at(k, j) = c * f.node_x(j);
  }
  return f;
}

enum class ResidualVariant { kMeanField, kParticle };

struct ResidualSample {
  double t = 0.0, x = 0.0, xhat = 0.0;
  double residual = 0.0;
};

/// Interior sample grid with the required 2-cell margin in t and xhat.
inline std::vector<ResidualSample> default_residual_samples(const SpaceTimeField& f,
                                                            std::size_t n_t = 9,
                                                            std::size_t n_x = 9,
                                                            std::size_t n_xhat = 9) {
  std::vector<ResidualSample> out;
  out.reserve(n_t * n_x * n_xhat);
  const double t_lo = f.node_time(2), t_hi = f.node_time(f.nt() - 2);
  const double margin = 2.0 * f.dx();
  const double s_lo = f.x_lo() + margin, s_hi = f.x_hi() - margin;
  for (std::size_t it = 0; it < n_t; ++it) {
    const double t = t_lo + (t_hi - t_lo) * static_cast<double>(it) /
                               static_cast<double>(n_t - 1);
    for (std::size_t ix = 0; ix < n_x; ++ix) {
      const double x = s_lo + (s_hi - s_lo) * static_cast<double>(ix) /
                                 static_cast<double>(n_x - 1);
      for (std::size_t ih = 0; ih < n_xhat; ++ih) {
        const double xh = s_lo + (s_hi - s_lo) * static_cast<double>(ih) /
                                    static_cast<double>(n_xhat - 1);
        out.push_back({t, x, xh, 0.0});
      }
    }
  }
  return out;
}

/// Evaluates every term of the decoupling PDE for U := 2 P(t) x + 2 field(t, xhat)
/// at the samples (snapped to grid nodes; 2-cell margin required) and fills in
/// the absolute residuals. Returns the maximum.
inline double residual_u(const MfcModel& m, const TimeGridFn& P, const SpaceTimeField& f,
                         std::vector<ResidualSample>& samples, ResidualVariant variant,
                         std::size_t N = 1) {
  if (variant == ResidualVariant::kParticle && N == 0)
    throw std::invalid_argument("residual_u: particle variant needs N >= 1");
  RhoSolver rho(m);
  const double invR = 1.0 / m.R;
  const double dxx_coeff = (variant == ResidualVariant::kMeanField)
                               ? m.sigma0 * m.sigma0
                               : m.sigma * m.sigma / static_cast<double>(N) +
                                     m.sigma0 * m.sigma0;
  double worst = 0.0;
  for (auto& s : samples) {
    const auto k = static_cast<std::size_t>(std::llround(s.t / f.dt()));
    const auto j = static_cast<std::size_t>(
        std::llround((s.xhat - f.x_lo()) / f.dx()));
    if (k < 2 || k + 2 > f.nt() || j < 2 || j + 2 > f.nx())
      throw std::invalid_argument("residual_u: sample outside solved domain margin");
    const double t = f.node_time(k);
    const double xh = f.node_x(j);
    const double x = s.x;

    const double Pt = P.eval(t);
    const double Pdot = riccati_time_derivative(m, Pt);
    const double phi = f.at(k, j);
    const double phi_x = f.node_dx(k, j);
    const double phi_xx = f.node_dxx(k, j);
    const double phi_t = f.node_dt(k, j);

    const double u = rho.rho(Pt * xh + phi);  // rho(U(t,xhat,xhat)/2)
    const double bu = m.b.value(u);
    const double U = 2.0 * Pt * x + 2.0 * phi;
    const double U_hat = 2.0 * Pt * xh + 2.0 * phi;

    const double adv_x = m.A * x + m.a.value(xh) - invR * m.B * m.B * Pt * (x - xh) +
                         m.B * u + bu;
    const double adv_xh = m.A * xh + m.a.value(xh) + m.B * u + bu;

    const double res = (2.0 * Pdot * x + 2.0 * phi_t) + 2.0 * Pt * adv_x +
                       2.0 * phi_x * adv_xh + 0.5 * dxx_coeff * 2.0 * phi_xx +
                       2.0 * m.Q * x + m.q.d1(xh) + m.A * U + m.a.d1(xh) * U_hat;
    s.t = t;
    s.xhat = xh;
    s.residual = std::abs(res);
    worst = std::max(worst, s.residual);
  }
  return worst;
}

/// Raw binary field cache (bit-exact round trip).
inline bool save_field(const SpaceTimeField& f, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) return false;
  const char magic[4] = {'M', 'F', 'C', 'F'};
  const std::uint64_t nt = f.nt(), nx = f.nx();
  const double header[3] = {f.horizon(), f.x_lo(), f.x_hi()};
  bool ok = std::fwrite(magic, 1, 4, fp) == 4 &&
            std::fwrite(&nt, sizeof nt, 1, fp) == 1 &&
            std::fwrite(&nx, sizeof nx, 1, fp) == 1 &&
            std::fwrite(header, sizeof(double), 3, fp) == 3 &&
            std::fwrite(f.values().data(), sizeof(double), f.values().size(), fp) ==
                f.values().size();
  ok = (std::fclose(fp) == 0) && ok;
  return ok;
}

inline std::optional<SpaceTimeField> load_field(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) return std::nullopt;
  char magic[4];
  std::uint64_t nt = 0, nx = 0;
  double header[3];
  if (std::fread(magic, 1, 4, fp) != 4 || magic[0] != 'M' || magic[1] != 'F' ||
      magic[2] != 'C' || magic[3] != 'F' || std::fread(&nt, sizeof nt, 1, fp) != 1 ||
      std::fread(&nx, sizeof nx, 1, fp) != 1 ||
      std::fread(header, sizeof(double), 3, fp) != 3) {
    std::fclose(fp);
    return std::nullopt;
  }
  SpaceTimeField f(header[0], nt, header[1], header[2], nx);
  std::vector<double> vals((nt + 1) * (nx + 1));
  const bool ok = std::fread(vals.data(), sizeof(double), vals.size(), fp) == vals.size();
  std::fclose(fp);
  if (!ok) return std::nullopt;
  for (std::size_t k = 0; k <= nt; ++k)
    for (std::size_t j = 0; j <= nx; ++j) f.at(k, j) = vals[k * (nx + 1) + j];
  return f;
}

}  // namespace mfc
