// Config-driven experiment driver. Subcommands expose the full pipeline:
//   validate  - assumption report (exit 2 on failure)
//   riccati   - backward Riccati solve(s), CSV dump
//   fields    - decoupling fields Phi / Psi_N plus PDE residual samples
//   simulate  - Monte Carlo cost estimates and sample trajectories
//   optimality- Gateaux-derivative check of the feedback control
//   rates     - convergence-rate ladder studies with log-log fits
//   value-gap - mean-field vs N-particle value gap per ladder N
//
// Exit codes: 0 pass, 1 config error, 2 assumption failure,
//             3 numerical failure, 4 acceptance failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfc/mfc.hpp"

namespace fs = std::filesystem;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned workers = 1;
  double debug_scale_p = 1.0;
};

struct Loaded {
  mfc::RunConfig cfg;
  std::uint64_t seed = 0;
  std::string out_dir;
};

Loaded load(const CliArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw std::invalid_argument("cannot read config file: " + args.config_path);
  std::stringstream buf;
  buf << in.rdbuf();
  Loaded l;
  l.cfg = mfc::parse_config(buf.str());
  l.seed = args.seed_set ? args.seed : l.cfg.sim.seed;
  l.out_dir = args.out_dir.empty() ? l.cfg.output : args.out_dir;
  fs::create_directories(l.out_dir);
  return l;
}

std::string joined(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

/// Solves P and checks the preconditions every numerical command relies on:
/// R > 0 (hard) and the (A3) margin. Other assumption failures are warnings.
mfc::TimeGridFn gate(const Loaded& l, bool* assumptions_ok = nullptr) {
  const mfc::MfcModel& m = l.cfg.model;
  if (!(m.R > 0.0))
    throw std::domain_error("implementation requires R > 0");
  mfc::TimeGridFn P = mfc::solve_p(m, l.cfg.grids.K);
  const mfc::AssumptionReport rep = mfc::validate_assumptions(m, {}, P);
  bool ok = true;
  for (const auto& e : rep.entries) {
    if (e.pass) continue;
    if (e.name == "A3") {
      throw std::domain_error("(A3) margin " + std::to_string(e.margin) +
                              " below tolerance at " + e.witness);
    }
    ok = false;
    std::fprintf(stderr, "warning: assumption %s fails (margin %g at %s)\n",
                 e.name.c_str(), e.margin, e.witness.c_str());
  }
  if (assumptions_ok) *assumptions_ok = ok;
  return P;
}

mfc::PdeConfig pde_config(const Loaded& l, const mfc::TimeGridFn& P) {
  const auto& g = l.cfg.grids;
  double lo, hi;
  if (g.domain) {
    lo = g.domain->first;
    hi = g.domain->second;
  } else {
    std::tie(lo, hi) = mfc::domain_default(l.cfg.model, P);
  }
  const double bound = mfc::estimate_advection_bound(l.cfg.model, P, lo, hi);
  return mfc::PdeConfig::make(lo, hi, g.nx, g.nt, l.cfg.model.T, bound, g.cfl_safety);
}

/// Psi_N solves are cached on disk keyed by (config digest, N); the digest is
/// the only invalidation key.
mfc::SpaceTimeField solve_psi_cached(const Loaded& l, const mfc::TimeGridFn& P,
                                     const mfc::PdeConfig& cfg, std::size_t N) {
  const mfc::MfcModel& m = l.cfg.model;
  const double coeff = m.sigma * m.sigma / static_cast<double>(N) + m.sigma0 * m.sigma0;
  const std::string cache_dir = joined(l.out_dir, ".cache");
  const std::string path =
      joined(cache_dir, "psi_" + l.cfg.digest + "_N" + std::to_string(N) + ".bin");
  if (auto f = mfc::load_field(path)) {
    if (f->nt() == cfg.nt && f->nx() == cfg.nx && f->x_lo() == cfg.x_lo &&
        f->x_hi() == cfg.x_hi)
      return *f;
  }
  mfc::SpaceTimeField f = mfc::solve_decoupling_field(m, P, cfg, coeff);
  fs::create_directories(cache_dir);
  mfc::save_field(f, path);
  return f;
}

int cmd_validate(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::MfcModel& m = l.cfg.model;
  const std::string path = joined(l.out_dir, "assumptions.csv");
  if (!(m.R > 0.0)) {
    mfc::AssumptionReport rep;
    rep.entries.push_back({"R_positive", false, m.R, "implementation requires R > 0"});
    mfc::write_assumptions_csv(path, l.cfg.digest, l.seed, rep);
    std::fprintf(stderr, "validate: implementation requires R > 0\n");
    return 2;
  }
  const mfc::TimeGridFn P = mfc::solve_p(m, l.cfg.grids.K);
  const mfc::AssumptionReport rep = mfc::validate_assumptions(m, {}, P);
  mfc::write_assumptions_csv(path, l.cfg.digest, l.seed, rep);
  for (const auto& e : rep.entries)
    std::printf("%s %s margin=%.6g %s\n", e.name.c_str(), e.pass ? "pass" : "FAIL",
                e.margin, e.witness.c_str());
  return rep.all_pass() ? 0 : 2;
}

int cmd_riccati(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::TimeGridFn P = gate(l);
  std::unique_ptr<mfc::TimeGridFn> Pi;
  mfc::LqCoeffs lq;
  if (mfc::lq_extract(l.cfg.model, &lq)) {
    const auto& m = l.cfg.model;
    Pi = std::make_unique<mfc::TimeGridFn>(
        mfc::solve_pi(m.A, lq.Abar, m.B, lq.Bbar, m.Q, lq.Qbar, m.R, lq.Rbar, m.G,
                      lq.Gbar, m.T, l.cfg.grids.K));
  }
  mfc::write_riccati_csv(joined(l.out_dir, "riccati.csv"), l.cfg.digest, l.seed, P,
                         Pi.get());
  std::printf("riccati: P(0)=%.12g%s\n", P.values().front(),
              Pi ? (" Pi(0)=" + std::to_string(Pi->values().front())).c_str() : "");
  return 0;
}

int cmd_fields(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::MfcModel& m = l.cfg.model;
  const mfc::TimeGridFn P = gate(l);
  const mfc::PdeConfig pcfg = pde_config(l, P);
  const mfc::SpaceTimeField phi =
      mfc::solve_decoupling_field(m, P, pcfg, m.sigma0 * m.sigma0);
  mfc::write_field_csv(joined(l.out_dir, "field_phi.csv"), l.cfg.digest, l.seed, phi);

  std::vector<mfc::ResidualRecord> records;
  auto collect = [&](const mfc::SpaceTimeField& f, mfc::ResidualVariant variant,
                     std::size_t N, const char* name) {
    auto samples = mfc::default_residual_samples(f);
    const double worst = mfc::residual_u(m, P, f, samples, variant, N);
    for (const auto& s : samples) records.push_back({name, N, s});
    std::printf("fields: %s N=%zu max|residual|=%.6g\n", name, N, worst);
    return worst;
  };
  collect(phi, mfc::ResidualVariant::kMeanField, 1, "mean_field");

  for (std::size_t N : l.cfg.experiment.N_ladder) {
    const mfc::SpaceTimeField psi = solve_psi_cached(l, P, pcfg, N);
    mfc::write_field_csv(joined(l.out_dir, "field_psi_N" + std::to_string(N) + ".csv"),
                         l.cfg.digest, l.seed, psi);
    collect(psi, mfc::ResidualVariant::kParticle, N, "particle");
  }
  mfc::write_residuals_csv(joined(l.out_dir, "residuals.csv"), l.cfg.digest, l.seed,
                           records);
  return 0;
}

int cmd_simulate(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::MfcModel& m = l.cfg.model;
  const mfc::TimeGridFn P = gate(l);
  const mfc::PdeConfig pcfg = pde_config(l, P);
  const mfc::SpaceTimeField phi =
      mfc::solve_decoupling_field(m, P, pcfg, m.sigma0 * m.sigma0);
  const mfc::SpaceTimeField psi = solve_psi_cached(l, P, pcfg, l.cfg.sim.N);

  const std::size_t n_t = l.cfg.sim_steps();
  const mfc::NoisePlan plan(l.seed, n_t, m.T);
  const mfc::EnsembleConfig ecfg{n_t, l.cfg.sim.N, l.cfg.sim.M0, l.cfg.sim.M1};

  std::vector<mfc::EstimateRow> rows;
  const mfc::Estimate jmf = mfc::cost_mf(m, P, phi, ecfg, plan, {}, args.workers);
  rows.push_back({"cost_mf", jmf, ecfg.M0, ecfg.M1, 1});

  std::vector<mfc::TrajectorySet> reps;
  reps.reserve(ecfg.M0);
  for (std::size_t r = 0; r < ecfg.M0; ++r)
    reps.push_back(mfc::simulate_particles(m, P, psi, ecfg.N, plan, r));
  const mfc::Estimate jp = mfc::cost_particles(m, reps);
  rows.push_back({"cost_particles", jp, ecfg.M0, 1, ecfg.N});

  mfc::write_estimates_csv(joined(l.out_dir, "estimates.csv"), l.cfg.digest, l.seed, rows);

  const mfc::XhatPath xhat = mfc::simulate_xhat(m, P, phi, plan, 0);
  std::vector<mfc::TrajectorySet> samples;
  samples.push_back(mfc::simulate_mf(m, P, phi, xhat, plan, 0, 0));
  samples.push_back(reps.front());
  mfc::write_trajectories_csv(joined(l.out_dir, "trajectories.csv"), l.cfg.digest,
                              l.seed, samples);
  std::printf("simulate: cost_mf=%.8g (se %.3g), cost_particles=%.8g (se %.3g)\n",
              jmf.value, jmf.stderr_, jp.value, jp.stderr_);
  return 0;
}

int cmd_optimality(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::MfcModel& m = l.cfg.model;
  const mfc::TimeGridFn P = gate(l);
  const mfc::PdeConfig pcfg = pde_config(l, P);
  const mfc::SpaceTimeField phi =
      mfc::solve_decoupling_field(m, P, pcfg, m.sigma0 * m.sigma0);

  const std::size_t n_t = l.cfg.sim_steps();
  const mfc::NoisePlan plan(l.seed, n_t, m.T);
  const mfc::EnsembleConfig ecfg{n_t, 1, l.cfg.sim.M0, l.cfg.sim.M1};
  const mfc::FeedbackOptions opts{args.debug_scale_p};
  const mfc::GateauxResult res =
      mfc::gateaux_check(m, P, phi, 5, 1e-3, ecfg, plan, opts, args.workers);
  const double tol = 0.02 * (1.0 + std::abs(res.J_base));
  mfc::write_gateaux_csv(joined(l.out_dir, "gateaux.csv"), l.cfg.digest, l.seed, res, tol);
  bool pass = true;
  for (double d : res.dJ) {
    std::printf("optimality: |dJ/deps| = %.6g (tol %.6g) %s\n", std::abs(d), tol,
                std::abs(d) <= tol ? "pass" : "FAIL");
    if (std::abs(d) > tol) pass = false;
  }
  return pass ? 0 : 4;
}

struct Band {
  double lo, hi;
};

Band slope_band(mfc::Quantity q) {
  switch (q) {
    case mfc::Quantity::kXnVsXhat:
    case mfc::Quantity::kXbarnVsXhat:
    case mfc::Quantity::kChaos: return {-1.35, -0.65};
    case mfc::Quantity::kFieldGap:
    case mfc::Quantity::kControlGap: return {-2.5, -1.5};
    case mfc::Quantity::kCostGap: return {-99.0, -0.4};  // upper bound, one-sided
    case mfc::Quantity::kValueGap: return {-1.5, -0.6};
    case mfc::Quantity::kMoment: return {-0.1, 0.1};
  }
  return {-99.0, 99.0};
}

int cmd_rates(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::MfcModel& m = l.cfg.model;
  const mfc::TimeGridFn P = gate(l);
  const mfc::PdeConfig pcfg = pde_config(l, P);
  const mfc::SpaceTimeField phi =
      mfc::solve_decoupling_field(m, P, pcfg, m.sigma0 * m.sigma0);

  std::map<std::size_t, mfc::SpaceTimeField> psis;
  mfc::PsiProvider provider;
  for (std::size_t N : l.cfg.experiment.N_ladder) {
    psis.emplace(N, solve_psi_cached(l, P, pcfg, N));
    provider[N] = &psis.at(N);
  }

  const std::size_t n_t = l.cfg.sim_steps();
  const mfc::NoisePlan plan(l.seed, n_t, m.T);
  std::vector<mfc::RateSummaryRow> summary;
  bool all_pass = true;
  for (mfc::Quantity q : l.cfg.experiment.quantities) {
    mfc::RateReport rep =
        mfc::rate_study(q, m, P, phi, provider, l.cfg.experiment.N_ladder,
                        l.cfg.experiment.M, plan, args.workers);
    rep.config_digest = l.cfg.digest;
    const std::string name = mfc::quantity_name(q);
    mfc::write_rate_csv(joined(l.out_dir, "rates_" + name + ".csv"), l.cfg.digest,
                        l.seed, rep);
    mfc::write_rate_plot(joined(l.out_dir, "rates_" + name + ".plot"), l.cfg.digest,
                         l.seed, rep);
    const Band band = slope_band(q);
    mfc::RateSummaryRow row;
    row.quantity = name;
    row.band_lo = band.lo;
    row.band_hi = band.hi;
    if (rep.degenerate) {
      row.verdict = "degenerate";  // excluded from pass/fail
    } else if (!rep.fit) {
      row.verdict = "fail";
      all_pass = false;
    } else {
      row.slope = rep.fit->slope;
      row.r2 = rep.fit->r2;
      const bool ok = rep.fit->slope >= band.lo && rep.fit->slope <= band.hi;
      row.verdict = ok ? "pass" : "fail";
      if (!ok) all_pass = false;
    }
    summary.push_back(row);
    std::printf("rates: %s slope=%s r2=%s %s%s\n", name.c_str(),
                row.slope ? std::to_string(*row.slope).c_str() : "undefined",
                row.r2 ? std::to_string(*row.r2).c_str() : "-", row.verdict.c_str(),
                rep.note.empty() ? "" : (" (" + rep.note + ")").c_str());
  }
  mfc::write_rates_summary_csv(joined(l.out_dir, "rates_summary.csv"), l.cfg.digest,
                               l.seed, summary);
  return all_pass ? 0 : 4;
}

int cmd_value_gap(const CliArgs& args) {
  const Loaded l = load(args);
  const mfc::MfcModel& m = l.cfg.model;
  const mfc::TimeGridFn P = gate(l);
  const mfc::PdeConfig pcfg = pde_config(l, P);
  const mfc::SpaceTimeField phi =
      mfc::solve_decoupling_field(m, P, pcfg, m.sigma0 * m.sigma0);

  const std::size_t n_t = l.cfg.sim_steps();
  const mfc::NoisePlan plan(l.seed, n_t, m.T);
  std::vector<mfc::ValueGapRow> rows;
  for (std::size_t N : l.cfg.experiment.N_ladder) {
    const mfc::SpaceTimeField psi = solve_psi_cached(l, P, pcfg, N);
    rows.push_back(
        {N, mfc::value_gap(m, P, phi, psi, N, l.cfg.experiment.M, plan, args.workers)});
    std::printf("value-gap: N=%zu gap=%.8g (se %.3g)\n", N, rows.back().result.gap.value,
                rows.back().result.gap.stderr_);
  }
  mfc::write_value_gap_csv(joined(l.out_dir, "value_gap.csv"), l.cfg.digest, l.seed, rows);
  return 0;
}

int dispatch(const std::string& cmd, const CliArgs& args) {
  try {
    if (cmd == "validate") return cmd_validate(args);
    if (cmd == "riccati") return cmd_riccati(args);
    if (cmd == "fields") return cmd_fields(args);
    if (cmd == "simulate") return cmd_simulate(args);
    if (cmd == "optimality") return cmd_optimality(args);
    if (cmd == "rates") return cmd_rates(args);
    if (cmd == "value-gap") return cmd_value_gap(args);
    std::fprintf(stderr, "unknown subcommand %s\n", cmd.c_str());
    return 1;
  } catch (const mfc::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "assumption failure: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field control solver and experiment driver"};
  app.require_subcommand(1);

  CliArgs args;
  std::vector<CLI::App*> subs;
  for (const char* name : {"validate", "riccati", "fields", "simulate", "optimality",
                           "rates", "value-gap"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config_path, "JSON config path")->required();
    sub->add_option("--out", args.out_dir, "output directory (default: config 'output')");
    sub->add_option("--seed", args.seed, "base seed override")
        ->each([&args](const std::string&) { args.seed_set = true; });
    sub->add_option("--workers", args.workers, "worker threads");
    if (std::string(name) == "optimality")
      sub->add_option("--debug-scale-P", args.debug_scale_p,
                      "scale P inside the feedback (suboptimality contrast)");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  for (CLI::App* sub : subs)
    if (sub->parsed()) return dispatch(sub->get_name(), args);
  return 1;
}
