#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfc/errors.hpp"
#include "mfc/feedback.hpp"
#include "mfc/fields.hpp"
#include "mfc/model.hpp"
#include "mfc/noise.hpp"
#include "mfc/riccati.hpp"
#include "mfc/util.hpp"

namespace mfc {

enum class FieldKind { kPhi, kPsi };

struct EnsembleConfig {
  std::size_t n_t = 500;
  std::size_t N = 64;
  std::size_t M0 = 64;  // common-noise replications
  std::size_t M1 = 64;  // idiosyncratic replications per common path

  void validate() const {
    if (n_t < 1 || N < 1 || M0 < 1 || M1 < 1)
      throw std::invalid_argument("EnsembleConfig: all counts >= 1 required");
  }
};

/// Knobs of the feedback recipe at simulation time. p_scale != 1 deliberately
/// mis-scales P inside the feedback (it does not touch the Riccati solve or
/// the PDE fields); used by the optimality contrast run.
struct FeedbackOptions {
  double p_scale = 1.0;
};

/// Conditional-mean path x&#770; driven by W^0 only, with its generating common
/// stream index (consumers verify they share the common path).
struct XhatPath {
  std::uint64_t w0_index = 0;
  std::vector<double> values;
};

/// One closed-loop run: N states/controls on the grid, the conditioning path
/// the feedback was evaluated along, and the empirical state average.
struct TrajectorySet {
  FieldKind field_kind = FieldKind::kPhi;
  double dt = 0.0;
  std::size_t start_step = 0;  // nodes cover [start_step*dt, T]
  std::vector<double> mean_path;       // xhat (kPhi) or xbar^N (kPsi)
  std::vector<double> empirical_mean;  // per-node average of states
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> controls;

  std::size_t particles() const { return states.size(); }
  std::size_t nodes() const { return mean_path.size(); }
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

namespace detail {

inline void check_plan(const MfcModel& m, const NoisePlan& plan) {
  if (std::abs(plan.horizon() - m.T) > 1e-12 * std::max(1.0, m.T))
    throw std::invalid_argument("sim: NoisePlan horizon differs from model.T");
}

inline double trapezoid_weight(std::size_t k, std::size_t first, std::size_t last) {
  return (k == first || k == last) ? 0.5 : 1.0;
}

}  // namespace detail

/// Mean-field conditional state: dxhat = [A xhat + a(xhat) + B k + b(k)] dt
/// + sigma0 dW^0, started at E[xi], with k = rho(P xhat + Phi(t, xhat)).
inline XhatPath simulate_xhat(const MfcModel& m, const TimeGridFn& P,
                              const SpaceTimeField& phi, const NoisePlan& plan,
                              std::uint64_t w0_index, const FeedbackOptions& opts = {}) {
  detail::check_plan(m, plan);
  RhoSolver rho(m);
  const std::size_t n_t = plan.n_t();
  const double dt = plan.dt();
  std::vector<double> xs(n_t + 1);
  double x = m.init.mean;
  xs[0] = x;
  for (std::size_t k = 0; k < n_t; ++k) {
    const double t = dt * static_cast<double>(k);
    const double u = rho.rho(opts.p_scale * P.eval(t) * x + phi.eval(t, x));
    const double drift = m.A * x + m.a.value(x) + m.B * u + m.b.value(u);
    x += drift * dt + m.sigma0 * plan.increment(StreamTag::kCommon, w0_index, k);
    xs[k + 1] = x;
  }
  return {w0_index, std::move(xs)};
}

/// Optimal mean-field state under its feedback law, sharing the common path
/// with `xhat`. Initial state drawn from the ("init", (w0,wi)) substream.
inline TrajectorySet simulate_mf(const MfcModel& m, const TimeGridFn& P,
                                 const SpaceTimeField& phi, const XhatPath& xhat,
                                 const NoisePlan& plan, std::uint64_t w0_index,
                                 std::uint64_t wi_index, const FeedbackOptions& opts = {}) {
  detail::check_plan(m, plan);
  if (xhat.w0_index != w0_index)
    throw std::invalid_argument("simulate_mf: xhat simulated from a different common path");
  if (xhat.values.size() != plan.n_t() + 1)
    throw std::invalid_argument("simulate_mf: xhat grid mismatch");
  RhoSolver rho(m);
  const std::size_t n_t = plan.n_t();
  const double dt = plan.dt();
  const double invRB = m.B / m.R;
  const std::uint64_t idx = combine_index(w0_index, wi_index);
  const Substream init = plan.substream(StreamTag::kInit, idx);

  TrajectorySet tr;
  tr.field_kind = FieldKind::kPhi;
  tr.dt = dt;
  tr.mean_path = xhat.values;
  tr.states.assign(1, std::vector<double>(n_t + 1));
  tr.controls.assign(1, std::vector<double>(n_t + 1));
  tr.empirical_mean.resize(n_t + 1);

  double x = m.init.sample(init.normal(0), init.uniform(2));
  for (std::size_t k = 0; k <= n_t; ++k) {
    const double t = dt * static_cast<double>(k);
    const double xh = xhat.values[k];
    const double Pt = opts.p_scale * P.eval(t);
    const double kk = rho.rho(Pt * xh + phi.eval(t, xh));
    const double u = -invRB * Pt * (x - xh) + kk;
    tr.states[0][k] = x;
    tr.controls[0][k] = u;
    tr.empirical_mean[k] = x;
    if (k < n_t) {
      const double drift = m.A * x + m.a.value(xh) + m.B * u + m.b.value(kk);
      x += drift * dt + m.sigma * plan.increment(StreamTag::kIdio, idx, k) +
           m.sigma0 * plan.increment(StreamTag::kCommon, w0_index, k);
    }
  }
  return tr;
}

namespace detail {

/// Shared N-particle closed-loop kernel (feedback centered at the empirical
/// mean, field psi), starting from given states at node start_k.
inline TrajectorySet particle_kernel(const MfcModel& m, const TimeGridFn& P,
                                     const SpaceTimeField& psi, std::vector<double> x0,
                                     std::size_t start_k, const NoisePlan& plan,
                                     std::uint64_t w0_index, const FeedbackOptions& opts) {
  const std::size_t N = x0.size();
  const std::size_t n_t = plan.n_t();
  const double dt = plan.dt();
  const double invRB = m.B / m.R;
  RhoSolver rho(m);

  TrajectorySet tr;
  tr.field_kind = FieldKind::kPsi;
  tr.dt = dt;
  tr.start_step = start_k;
  const std::size_t nodes = n_t - start_k + 1;
  tr.mean_path.resize(nodes);
  tr.empirical_mean.resize(nodes);
  tr.states.assign(N, std::vector<double>(nodes));
  tr.controls.assign(N, std::vector<double>(nodes));

  std::vector<double>& x = x0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double t = dt * static_cast<double>(start_k + k);
    double xbar = 0.0;
    for (double xi : x) xbar += xi;
    xbar /= static_cast<double>(N);
    const double Pt = opts.p_scale * P.eval(t);
    const double kk = rho.rho(Pt * xbar + psi.eval(t, xbar));
    tr.mean_path[k] = xbar;
    tr.empirical_mean[k] = xbar;
    const double a_val = m.a.value(xbar);
    const double b_val = m.b.value(kk);
    for (std::size_t i = 0; i < N; ++i) {
      const double u = -invRB * Pt * (x[i] - xbar) + kk;
      tr.states[i][k] = x[i];
      tr.controls[i][k] = u;
      if (k + 1 < nodes) {
        const std::size_t step = start_k + k;
        x[i] += (m.A * x[i] + a_val + m.B * u + b_val) * dt +
                m.sigma * plan.increment(StreamTag::kIdio, combine_index(w0_index, i), step) +
                m.sigma0 * plan.increment(StreamTag::kCommon, w0_index, step);
      }
    }
  }
  for (std::size_t i = 0; i < N; ++i)
    for (double v : tr.states[i])
      if (!std::isfinite(v)) throw NumericalError("particle_kernel: non-finite state");
  return tr;
}

inline std::vector<double> draw_initials(const MfcModel& m, const NoisePlan& plan,
                                         std::uint64_t w0_index, std::size_t N) {
  std::vector<double> x0(N);
  for (std::size_t i = 0; i < N; ++i) {
    const Substream s = plan.substream(StreamTag::kInit, combine_index(w0_index, i));
    x0[i] = m.init.sample(s.normal(0), s.uniform(2));
  }
  return x0;
}

}  // namespace detail

/// N-particle optimal closed loop: feedback centered at the running empirical
/// mean xbar^N with the Psi field solved for this N.
inline TrajectorySet simulate_particles(const MfcModel& m, const TimeGridFn& P,
                                        const SpaceTimeField& psi, std::size_t N,
                                        const NoisePlan& plan, std::uint64_t w0_index,
                                        const FeedbackOptions& opts = {}) {
  detail::check_plan(m, plan);
  if (N == 0) throw std::invalid_argument("simulate_particles: N >= 1 required");
  return detail::particle_kernel(m, P, psi, detail::draw_initials(m, plan, w0_index, N), 0,
                                 plan, w0_index, opts);
}

/// N particles running the mean-field feedback inside the N-particle
/// dynamics: drift couples through the empirical mean, the feedback through
/// xhat; b(.) is evaluated at the average control
/// -R^-1 B P (xbar* - xhat) + rho(P xhat + phi). Same streams as the matching
/// simulate_particles run.
inline TrajectorySet simulate_decentralized(const MfcModel& m, const TimeGridFn& P,
                                            const SpaceTimeField& phi, std::size_t N,
                                            const NoisePlan& plan, std::uint64_t w0_index,
                                            const XhatPath& xhat,
                                            const FeedbackOptions& opts = {}) {
  detail::check_plan(m, plan);
  if (N == 0) throw std::invalid_argument("simulate_decentralized: N >= 1 required");
  if (xhat.w0_index != w0_index)
    throw std::invalid_argument("simulate_decentralized: common-path stream mismatch");
  if (xhat.values.size() != plan.n_t() + 1)
    throw std::invalid_argument("simulate_decentralized: xhat grid mismatch");
  RhoSolver rho(m);
  const std::size_t n_t = plan.n_t();
  const double dt = plan.dt();
  const double invRB = m.B / m.R;

  TrajectorySet tr;
  tr.field_kind = FieldKind::kPhi;
  tr.dt = dt;
  tr.mean_path = xhat.values;
  tr.empirical_mean.resize(n_t + 1);
  tr.states.assign(N, std::vector<double>(n_t + 1));
  tr.controls.assign(N, std::vector<double>(n_t + 1));

  std::vector<double> x = detail::draw_initials(m, plan, w0_index, N);
  for (std::size_t k = 0; k <= n_t; ++k) {
    const double t = dt * static_cast<double>(k);
    const double xh = xhat.values[k];
    double xbar = 0.0;
    for (double xi : x) xbar += xi;
    xbar /= static_cast<double>(N);
    tr.empirical_mean[k] = xbar;
    const double Pt = opts.p_scale * P.eval(t);
    const double kk = rho.rho(Pt * xh + phi.eval(t, xh));
    const double ubar = -invRB * Pt * (xbar - xh) + kk;
    const double a_val = m.a.value(xbar);
    const double b_val = m.b.value(ubar);
    for (std::size_t i = 0; i < N; ++i) {
      const double u = -invRB * Pt * (x[i] - xh) + kk;
      tr.states[i][k] = x[i];
      tr.controls[i][k] = u;
      if (k < n_t) {
        x[i] += (m.A * x[i] + a_val + m.B * u + b_val) * dt +
                m.sigma * plan.increment(StreamTag::kIdio, combine_index(w0_index, i), k) +
                m.sigma0 * plan.increment(StreamTag::kCommon, w0_index, k);
      }
    }
  }
  return tr;
}

/// Re-evaluates the generating feedback formula at every stored node and
/// returns the maximal deviation from the stored control.
inline double verify_feedback_consistency(const MfcModel& m, const TimeGridFn& P,
                                          const SpaceTimeField& field,
                                          const TrajectorySet& tr,
                                          const FeedbackOptions& opts = {}) {
  RhoSolver rho(m);
  const double invRB = m.B / m.R;
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.nodes(); ++k) {
    const double t = tr.dt * static_cast<double>(tr.start_step + k);
    const double cond = tr.mean_path[k];
    const double Pt = opts.p_scale * P.eval(t);
    const double kk = rho.rho(Pt * cond + field.eval(t, cond));
    for (std::size_t i = 0; i < tr.particles(); ++i) {
      const double u = -invRB * Pt * (tr.states[i][k] - cond) + kk;
      worst = std::max(worst, std::abs(u - tr.controls[i][k]));
    }
  }
  return worst;
}

/// Nested Monte Carlo estimate of the mean-field cost: M0 common paths, M1
/// idiosyncratic paths each; conditional terms come from the xhat path and
/// the feedback map, never from empirical averages.
inline Estimate cost_mf(const MfcModel& m, const TimeGridFn& P, const SpaceTimeField& phi,
                        const EnsembleConfig& cfg, const NoisePlan& plan,
                        const FeedbackOptions& opts = {}, unsigned workers = 1) {
  cfg.validate();
  detail::check_plan(m, plan);
  if (plan.n_t() != cfg.n_t)
    throw std::invalid_argument("cost_mf: plan.n_t differs from cfg.n_t");
  RhoSolver rho(m);
  const std::size_t n_t = cfg.n_t;
  const double dt = plan.dt();
  std::vector<double> costs(cfg.M0 * cfg.M1);

  parallel_for(cfg.M0, workers, [&](std::size_t m0) {
    const XhatPath xhat = simulate_xhat(m, P, phi, plan, m0, opts);
    // Conditional running cost q(xhat) + r(k) along the common path.
    std::vector<double> cond_cost(n_t + 1), khat(n_t + 1);
    for (std::size_t k = 0; k <= n_t; ++k) {
      const double t = dt * static_cast<double>(k);
      const double xh = xhat.values[k];
      khat[k] = rho.rho(opts.p_scale * P.eval(t) * xh + phi.eval(t, xh));
      cond_cost[k] = m.q.value(xh) + m.r.value(khat[k]);
    }
    for (std::size_t j = 0; j < cfg.M1; ++j) {
      const TrajectorySet tr = simulate_mf(m, P, phi, xhat, plan, m0, j, opts);
      double c = 0.0;
      for (std::size_t k = 0; k <= n_t; ++k) {
        const double x = tr.states[0][k];
        const double u = tr.controls[0][k];
        c += detail::trapezoid_weight(k, 0, n_t) * dt *
             (m.Q * x * x + m.R * u * u + cond_cost[k]);
      }
      const double xT = tr.states[0][n_t];
      c += m.G * xT * xT + m.g.value(xhat.values[n_t]);
      costs[m0 * cfg.M1 + j] = c;
    }
  });

  const MeanStderr ms = mean_stderr(costs);
  return {ms.mean, ms.stderr_, ms.n};
}

/// Per-replication particle-average cost with empirical couplings
/// (q, r, g at the per-step state/control averages), per the N-particle cost.
inline double cost_particles_one(const MfcModel& m, const TrajectorySet& tr) {
  if (tr.particles() == 0) throw std::invalid_argument("cost_particles: empty trajectory set");
  const std::size_t N = tr.particles();
  const std::size_t last = tr.nodes() - 1;
  const double dt = tr.dt;
  double total = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    double ubar = 0.0;
    for (std::size_t i = 0; i < N; ++i) ubar += tr.controls[i][k];
    ubar /= static_cast<double>(N);
    double quad = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double x = tr.states[i][k];
      const double u = tr.controls[i][k];
      quad += m.Q * x * x + m.R * u * u;
    }
    quad /= static_cast<double>(N);
    const double xbar = tr.empirical_mean[k];
    total += detail::trapezoid_weight(k, 0, last) * dt *
             (quad + m.q.value(xbar) + m.r.value(ubar));
  }
  double terminal = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double xT = tr.states[i][last];
    terminal += m.G * xT * xT;
  }
  total += terminal / static_cast<double>(N) + m.g.value(tr.empirical_mean[last]);
  return total;
}

inline Estimate cost_particles(const MfcModel& m, std::span<const TrajectorySet> replications) {
  if (replications.empty())
    throw std::invalid_argument("cost_particles: empty trajectory set");
  std::vector<double> costs(replications.size());
  for (std::size_t r = 0; r < replications.size(); ++r)
    costs[r] = cost_particles_one(m, replications[r]);
  const MeanStderr ms = mean_stderr(costs);
  return {ms.mean, ms.stderr_, ms.n};
}

struct ValueGapResult {
  Estimate gap;             // signed V - V^N estimate
  Estimate field_gap_sup2;  // E sup_t |Phi - Psi|^2 along the trajectories
};

/// Shared-trajectory value-gap estimator: along the N-particle optimal paths,
/// integrate R k_Phi^2 - R k_Psi^2 + r(k_Phi) - r(k_Psi) with
/// k_F = rho(P xbar^N + F(t, xbar^N)).
inline ValueGapResult value_gap(const MfcModel& m, const TimeGridFn& P,
                                const SpaceTimeField& phi, const SpaceTimeField& psi,
                                std::size_t N, std::size_t M, const NoisePlan& plan,
                                unsigned workers = 1) {
  if (M == 0) throw std::invalid_argument("value_gap: M >= 1 required");
  if (std::abs(phi.x_lo() - psi.x_lo()) > 1e-12 ||
      std::abs(phi.x_hi() - psi.x_hi()) > 1e-12 || phi.nt() != psi.nt() ||
      phi.nx() != psi.nx())
    throw std::invalid_argument("value_gap: Phi and Psi must share a common domain");
  detail::check_plan(m, plan);
  RhoSolver rho(m);
  const std::size_t n_t = plan.n_t();
  const double dt = plan.dt();
  std::vector<double> gaps(M), sups(M);

  parallel_for(M, workers, [&](std::size_t rep) {
    const TrajectorySet tr = simulate_particles(m, P, psi, N, plan, rep);
    double acc = 0.0, sup2 = 0.0;
    for (std::size_t k = 0; k <= n_t; ++k) {
      const double t = dt * static_cast<double>(k);
      const double y = tr.mean_path[k];
      const double Pt = P.eval(t);
      const double fv = phi.eval(t, y);
      const double gv = psi.eval(t, y);
      const double kf = rho.rho(Pt * y + fv);
      const double kg = rho.rho(Pt * y + gv);
      const double diff = m.R * (kf * kf - kg * kg) + m.r.value(kf) - m.r.value(kg);
      acc += detail::trapezoid_weight(k, 0, n_t) * dt * diff;
      sup2 = std::max(sup2, (fv - gv) * (fv - gv));
    }
    gaps[rep] = acc;
    sups[rep] = sup2;
  });

  const MeanStderr g = mean_stderr(gaps);
  const MeanStderr s = mean_stderr(sups);
  return {{g.mean, g.stderr_, g.n}, {s.mean, s.stderr_, s.n}};
}

struct GateauxResult {
  double J_base = 0.0;
  std::vector<double> dJ;  // signed central differences, one per direction
};

/// Central finite-difference Gateaux derivatives of the cost at the feedback
/// control, along seeded bounded step directions, with common random numbers.
/// The candidate control is recorded from the closed loop (conditional terms
/// from the xhat SDE); all three J evaluations then run the open-loop
/// dynamics with conditional terms replaced by the per-common-path empirical
/// average over the M1 sub-ensemble.
inline GateauxResult gateaux_check(const MfcModel& m, const TimeGridFn& P,
                                   const SpaceTimeField& phi, std::size_t directions,
                                   double eps, const EnsembleConfig& cfg,
                                   const NoisePlan& plan, const FeedbackOptions& opts = {},
                                   unsigned workers = 1) {
  cfg.validate();
  detail::check_plan(m, plan);
  if (!(eps > 0.0)) throw std::invalid_argument("gateaux_check: eps > 0 required");
  if (cfg.M0 * cfg.M1 < 100)
    throw std::invalid_argument("gateaux_check: fewer than 100 total paths");
  if (plan.n_t() != cfg.n_t)
    throw std::invalid_argument("gateaux_check: plan.n_t differs from cfg.n_t");

  const std::size_t n_t = cfg.n_t;
  const double dt = plan.dt();
  const std::size_t pieces = 8;

  // Bounded deterministic step directions from the "perturb" streams.
  std::vector<std::vector<double>> dir_nodes(directions, std::vector<double>(n_t + 1));
  for (std::size_t d = 0; d < directions; ++d) {
    const Substream s = plan.substream(StreamTag::kPerturb, d);
    std::vector<double> levels(pieces);
    for (std::size_t p = 0; p < pieces; ++p) levels[p] = 2.0 * s.uniform(p) - 1.0;
    for (std::size_t k = 0; k <= n_t; ++k) {
      const std::size_t p = std::min(pieces - 1, (k * pieces) / (n_t + 1));
      dir_nodes[d][k] = levels[p];
    }
  }

  const std::size_t evals = 1 + 2 * directions;  // base, then (+, -) per direction
  std::vector<std::vector<double>> costs(evals,
                                         std::vector<double>(cfg.M0 * cfg.M1, 0.0));

  parallel_for(cfg.M0, workers, [&](std::size_t m0) {
    const XhatPath xhat = simulate_xhat(m, P, phi, plan, m0, opts);
    std::vector<std::vector<double>> ctrl(cfg.M1);
    std::vector<double> xi(cfg.M1);
    for (std::size_t j = 0; j < cfg.M1; ++j) {
      TrajectorySet tr = simulate_mf(m, P, phi, xhat, plan, m0, j, opts);
      ctrl[j] = std::move(tr.controls[0]);
      xi[j] = tr.states[0][0];
    }

    std::vector<double> x(cfg.M1), cost(cfg.M1), u(cfg.M1);
    for (std::size_t e = 0; e < evals; ++e) {
      const double sgn = (e == 0) ? 0.0 : ((e - 1) % 2 == 0 ? 1.0 : -1.0);
      const std::vector<double>* dir = (e == 0) ? nullptr : &dir_nodes[(e - 1) / 2];
      x = xi;
      std::fill(cost.begin(), cost.end(), 0.0);
      for (std::size_t k = 0; k <= n_t; ++k) {
        const double shift = dir ? sgn * eps * (*dir)[k] : 0.0;
        double ex = 0.0, eu = 0.0;
        for (std::size_t j = 0; j < cfg.M1; ++j) {
          u[j] = ctrl[j][k] + shift;
          ex += x[j];
          eu += u[j];
        }
        ex /= static_cast<double>(cfg.M1);
        eu /= static_cast<double>(cfg.M1);
        const double w = detail::trapezoid_weight(k, 0, n_t) * dt;
        const double cond = m.q.value(ex) + m.r.value(eu);
        for (std::size_t j = 0; j < cfg.M1; ++j)
          cost[j] += w * (m.Q * x[j] * x[j] + m.R * u[j] * u[j] + cond);
        if (k < n_t) {
          const double a_val = m.a.value(ex);
          const double b_val = m.b.value(eu);
          const double dw0 = m.sigma0 * plan.increment(StreamTag::kCommon, m0, k);
          for (std::size_t j = 0; j < cfg.M1; ++j) {
            x[j] += (m.A * x[j] + a_val + m.B * u[j] + b_val) * dt +
                    m.sigma * plan.increment(StreamTag::kIdio, combine_index(m0, j), k) +
                    dw0;
          }
        } else {
          const double g_val = m.g.value(ex);
          for (std::size_t j = 0; j < cfg.M1; ++j)
            cost[j] += m.G * x[j] * x[j] + g_val;
        }
      }
      for (std::size_t j = 0; j < cfg.M1; ++j) costs[e][m0 * cfg.M1 + j] = cost[j];
    }
  });

  GateauxResult res;
  const double paths = static_cast<double>(cfg.M0 * cfg.M1);
  res.J_base = pairwise_sum(costs[0]) / paths;
  res.dJ.resize(directions);
  for (std::size_t d = 0; d < directions; ++d) {
    const double jp = pairwise_sum(costs[1 + 2 * d]) / paths;
    const double jm = pairwise_sum(costs[2 + 2 * d]) / paths;
    res.dJ[d] = (jp - jm) / (2.0 * eps);
  }
  return res;
}

struct VnGradientResult {
  double fd = 0.0;          // CRN central difference of the V^N estimate
  double analytic = 0.0;    // (2 P(t0) x_i + 2 Psi(t0, x^(N))) / N
  double discrepancy = 0.0;
  double fd_stderr = 0.0;   // combined (FD + MC) standard error of fd
  bool noise_dominated = false;
};

/// Verifies d/dx_i V^N(t0, X0) = U_i(t0, x_i, x^(N)) / N by simulating the
/// N-particle optimal system forward from the deterministically perturbed
/// initial states, with common random numbers across the +-h runs.
inline VnGradientResult vn_gradient_check(const MfcModel& m, const TimeGridFn& P,
                                          const SpaceTimeField& psi, std::size_t N,
                                          double t0, std::span<const double> X0,
                                          std::size_t i, double h, std::size_t M,
                                          const NoisePlan& plan, unsigned workers = 1) {
  detail::check_plan(m, plan);
  if (X0.size() != N || i >= N)
    throw std::invalid_argument("vn_gradient_check: bad X0 or particle index");
  if (!(h > 0.0)) throw std::invalid_argument("vn_gradient_check: h > 0 required");
  if (t0 < 0.0 || t0 >= m.T) throw std::invalid_argument("vn_gradient_check: t0 in [0,T)");
  const std::size_t k0 =
      static_cast<std::size_t>(std::llround(t0 / plan.dt()));
  if (k0 >= plan.n_t()) throw std::invalid_argument("vn_gradient_check: t0 too close to T");

  std::vector<double> quotients(M);
  parallel_for(M, workers, [&](std::size_t rep) {
    std::vector<double> xp(X0.begin(), X0.end());
    std::vector<double> xm(X0.begin(), X0.end());
    xp[i] += h;
    xm[i] -= h;
    const TrajectorySet tp =
        detail::particle_kernel(m, P, psi, std::move(xp), k0, plan, rep, {});
    const TrajectorySet tm =
        detail::particle_kernel(m, P, psi, std::move(xm), k0, plan, rep, {});
    quotients[rep] = (cost_particles_one(m, tp) - cost_particles_one(m, tm)) / (2.0 * h);
  });

  VnGradientResult r;
  const MeanStderr ms = mean_stderr(quotients);
  r.fd = ms.mean;
  r.fd_stderr = ms.stderr_;
  double xbar0 = 0.0;
  for (double v : X0) xbar0 += v;
  xbar0 /= static_cast<double>(N);
  r.analytic =
      (2.0 * P.eval(t0) * X0[i] + 2.0 * psi.eval(t0, xbar0)) / static_cast<double>(N);
  r.discrepancy = std::abs(r.fd - r.analytic);
  r.noise_dominated = r.fd_stderr > r.discrepancy;
  return r;
}

}  // namespace mfc
