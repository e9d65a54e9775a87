#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfc/sim.hpp"
#include "mfc/util.hpp"

namespace mfc {

enum class Quantity {
  kXnVsXhat,     // E sup |x^(N),* - xhat|^2, decentralized empirical mean
  kXbarnVsXhat,  // E sup |xbar^N - xhat|^2, particle-system mean
  kFieldGap,     // E sup |Phi - Psi_N|^2 along xbar^N
  kControlGap,   // E sup |k(t,xbar^N,Phi) - k(t,xbar^N,Psi)|^2
  kChaos,        // E sup |x_i^* - xbar_i|^2, coupled systems
  kCostGap,      // |J(u^*) - J(ubar)| via shared streams
  kValueGap,     // |V - V^N| via the shared-trajectory estimator
  kMoment,       // E sup |xbar_i|^2 (bounded uniformly in N)
};

inline const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::kXnVsXhat: return "XN_VS_XHAT";
    case Quantity::kXbarnVsXhat: return "XBARN_VS_XHAT";
    case Quantity::kFieldGap: return "FIELD_GAP";
    case Quantity::kControlGap: return "CONTROL_GAP";
    case Quantity::kChaos: return "CHAOS";
    case Quantity::kCostGap: return "COST_GAP";
    case Quantity::kValueGap: return "VALUE_GAP";
    case Quantity::kMoment: return "MOMENT";
  }
  return "?";
}

inline std::optional<Quantity> quantity_from_name(const std::string& s) {
  for (Quantity q : {Quantity::kXnVsXhat, Quantity::kXbarnVsXhat, Quantity::kFieldGap,
                     Quantity::kControlGap, Quantity::kChaos, Quantity::kCostGap,
                     Quantity::kValueGap, Quantity::kMoment})
    if (s == quantity_name(q)) return q;
  return std::nullopt;
}

struct RateRow {
  std::size_t N = 0;
  double error = 0.0;
  double stderr_ = 0.0;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
  std::size_t used = 0;      // rows entering the fit
  std::size_t excluded = 0;  // nonpositive-error rows dropped
};

struct RateReport {
  Quantity quantity = Quantity::kXbarnVsXhat;
  std::vector<RateRow> rows;  // sorted by N
  std::optional<LogLogFit> fit;
  bool degenerate = false;  // all errors vanished (e.g. sigma = 0 field gap)
  std::string note;
  std::uint64_t seed = 0;
  std::string config_digest;
};

/// Ordinary least squares of log2(error) on log2(N). Nonpositive-error rows
/// are excluded (counted); fewer than 2 usable rows is an error.
inline LogLogFit fit_loglog(std::span<const std::pair<double, double>> rows) {
  if (rows.size() < 2) throw std::invalid_argument("fit_loglog: need >= 2 rows");
  std::vector<double> xs, ys;
  std::size_t excluded = 0;
  for (const auto& [n, err] : rows) {
    if (!(err > 0.0)) {
      ++excluded;
      continue;
    }
    xs.push_back(std::log2(n));
    ys.push_back(std::log2(err));
  }
  if (xs.size() < 2)
    throw std::invalid_argument("fit_loglog: fewer than 2 positive-error rows");
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0;
  for (double v : xs) sx += v;
  for (double v : ys) sy += v;
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_loglog: degenerate N values");
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.used = xs.size();
  f.excluded = excluded;
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = ys[i] - (f.intercept + f.slope * xs[i]);
      ss_res += r * r;
    }
    f.r2 = 1.0 - ss_res / syy;
  } else {
    f.r2 = 1.0;
  }
  return f;
}

using PsiProvider = std::map<std::size_t, const SpaceTimeField*>;

namespace detail {

inline const SpaceTimeField& psi_for(const PsiProvider& psi_per_N, std::size_t N) {
  auto it = psi_per_N.find(N);
  if (it == psi_per_N.end() || it->second == nullptr)
    throw std::invalid_argument("rate_study: Psi not solved for N = " + std::to_string(N));
  return *it->second;
}

inline bool needs_psi(Quantity q) { return q != Quantity::kXnVsXhat; }
inline bool needs_xhat(Quantity q) {
  return q == Quantity::kXnVsXhat || q == Quantity::kXbarnVsXhat ||
         q == Quantity::kChaos || q == Quantity::kCostGap;
}
inline bool needs_decentralized(Quantity q) {
  return q == Quantity::kXnVsXhat || q == Quantity::kChaos || q == Quantity::kCostGap;
}

inline double sup_sq_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s = std::max(s, d * d);
  }
  return s;
}

}  // namespace detail

/// Computes one convergence quantity over the N ladder with M common paths
/// per N, coupling the compared systems through shared noise streams, and
/// fits the log-log rate when at least 3 positive-error rows exist.
inline RateReport rate_study(Quantity q, const MfcModel& m, const TimeGridFn& P,
                             const SpaceTimeField& phi, const PsiProvider& psi_per_N,
                             std::span<const std::size_t> N_list, std::size_t M,
                             const NoisePlan& plan, unsigned workers = 1) {
  if (N_list.empty()) throw std::invalid_argument("rate_study: empty N list");
  if (M == 0) throw std::invalid_argument("rate_study: M >= 1 required");
  RhoSolver rho(m);
  const std::size_t n_t = plan.n_t();
  const double dt = plan.dt();

  RateReport rep;
  rep.quantity = q;
  rep.seed = plan.base_seed();

  std::vector<std::size_t> ladder(N_list.begin(), N_list.end());
  std::sort(ladder.begin(), ladder.end());

  for (std::size_t N : ladder) {
    const SpaceTimeField* psi = detail::needs_psi(q) ? &detail::psi_for(psi_per_N, N) : nullptr;
    std::vector<double> stat(M);

    parallel_for(M, workers, [&](std::size_t rep_i) {
      XhatPath xhat;
      if (detail::needs_xhat(q)) xhat = simulate_xhat(m, P, phi, plan, rep_i);
      TrajectorySet particles;
      if (detail::needs_psi(q)) particles = simulate_particles(m, P, *psi, N, plan, rep_i);
      TrajectorySet dec;
      if (detail::needs_decentralized(q))
        dec = simulate_decentralized(m, P, phi, N, plan, rep_i, xhat);

      double v = 0.0;
      switch (q) {
        case Quantity::kXnVsXhat:
          v = detail::sup_sq_diff(dec.empirical_mean, xhat.values);
          break;
        case Quantity::kXbarnVsXhat:
          v = detail::sup_sq_diff(particles.mean_path, xhat.values);
          break;
        case Quantity::kFieldGap: {
          for (std::size_t k = 0; k <= n_t; ++k) {
            const double t = dt * static_cast<double>(k);
            const double y = particles.mean_path[k];
            const double d = phi.eval(t, y) - psi->eval(t, y);
            v = std::max(v, d * d);
          }
          break;
        }
        case Quantity::kControlGap: {
          for (std::size_t k = 0; k <= n_t; ++k) {
            const double t = dt * static_cast<double>(k);
            const double y = particles.mean_path[k];
            const double Pt = P.eval(t);
            const double d = rho.rho(Pt * y + phi.eval(t, y)) -
                             rho.rho(Pt * y + psi->eval(t, y));
            v = std::max(v, d * d);
          }
          break;
        }
        case Quantity::kChaos: {
          double acc = 0.0;
          for (std::size_t i = 0; i < N; ++i)
            acc += detail::sup_sq_diff(dec.states[i], particles.states[i]);
          v = acc / static_cast<double>(N);
          break;
        }
        case Quantity::kCostGap:
          v = cost_particles_one(m, dec) - cost_particles_one(m, particles);
          break;
        case Quantity::kValueGap: {
          double acc = 0.0;
          for (std::size_t k = 0; k <= n_t; ++k) {
            const double t = dt * static_cast<double>(k);
            const double y = particles.mean_path[k];
            const double Pt = P.eval(t);
            const double kf = rho.rho(Pt * y + phi.eval(t, y));
            const double kg = rho.rho(Pt * y + psi->eval(t, y));
            acc += detail::trapezoid_weight(k, 0, n_t) * dt *
                   (m.R * (kf * kf - kg * kg) + m.r.value(kf) - m.r.value(kg));
          }
          v = acc;
          break;
        }
        case Quantity::kMoment: {
          double acc = 0.0;
          for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (double x : particles.states[i]) s = std::max(s, x * x);
            acc += s;
          }
          v = acc / static_cast<double>(N);
          break;
        }
      }
      stat[rep_i] = v;
    });

    const MeanStderr ms = mean_stderr(stat);
    RateRow row;
    row.N = N;
    // Signed-mean quantities report the absolute gap.
    row.error = (q == Quantity::kCostGap || q == Quantity::kValueGap)
                    ? std::abs(ms.mean)
                    : ms.mean;
    row.stderr_ = ms.stderr_;
    rep.rows.push_back(row);
  }

  std::size_t positive = 0;
  for (const auto& r : rep.rows)
    if (r.error > 0.0) ++positive;
  if (positive == 0) {
    rep.degenerate = true;
    rep.note = "all errors vanish; slope undefined";
    return rep;
  }
  if (rep.rows.size() < 3 || positive < 3) {
    rep.note = "slope undefined: need >= 3 positive-error rows";
    return rep;
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rep.rows)
    pts.emplace_back(static_cast<double>(r.N), r.error);
  rep.fit = fit_loglog(pts);
  if (rep.fit->excluded > 0)
    rep.note = std::to_string(rep.fit->excluded) + " zero-error rows excluded from fit";
  return rep;
}

}  // namespace mfc
