#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfc/assumptions.hpp"
#include "mfc/convergence.hpp"
#include "mfc/fields.hpp"
#include "mfc/riccati.hpp"
#include "mfc/sim.hpp"

namespace mfc {

/// CSV writer with fixed shortest-round-trip formatting; every file opens
/// with a comment line carrying the config digest and base seed.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& digest, std::uint64_t seed)
      : fp_(std::fopen(path.c_str(), "wb")) {
    if (!fp_) throw std::runtime_error("cannot open output file: " + path);
    std::fprintf(fp_, "# digest=%s seed=%llu\n", digest.c_str(),
                 static_cast<unsigned long long>(seed));
  }
  ~CsvWriter() {
    if (fp_) std::fclose(fp_);
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void header(const std::string& line) { std::fprintf(fp_, "%s\n", line.c_str()); }

  void row_begin() { first_ = true; }
  void cell(double v) {
    sep();
    std::fprintf(fp_, "%.17g", v);
  }
  void cell(std::size_t v) {
    sep();
    std::fprintf(fp_, "%zu", v);
  }
  void cell(const std::string& s) {
    sep();
    std::fputs(s.c_str(), fp_);
  }
  void row_end() { std::fputc('\n', fp_); }

 private:
  void sep() {
    if (!first_) std::fputc(',', fp_);
    first_ = false;
  }
  std::FILE* fp_;
  bool first_ = true;
};

inline void write_riccati_csv(const std::string& path, const std::string& digest,
                              std::uint64_t seed, const TimeGridFn& P,
                              const TimeGridFn* Pi = nullptr) {
  CsvWriter w(path, digest, seed);
  w.header(Pi ? "t,P,Pi" : "t,P");
  for (std::size_t k = 0; k < P.values().size(); ++k) {
    w.row_begin();
    w.cell(P.node_time(k));
    w.cell(P.values()[k]);
    if (Pi) w.cell(Pi->values()[k]);
    w.row_end();
  }
}

inline void write_field_csv(const std::string& path, const std::string& digest,
                            std::uint64_t seed, const SpaceTimeField& f) {
  CsvWriter w(path, digest, seed);
  w.header("t,xhat,value");
  for (std::size_t k = 0; k <= f.nt(); ++k)
    for (std::size_t j = 0; j <= f.nx(); ++j) {
      w.row_begin();
      w.cell(f.node_time(k));
      w.cell(f.node_x(j));
      w.cell(f.at(k, j));
      w.row_end();
    }
}

struct ResidualRecord {
  std::string variant;  // "mean_field" or "particle"
  std::size_t N = 1;
  ResidualSample sample;
};

inline void write_residuals_csv(const std::string& path, const std::string& digest,
                                std::uint64_t seed,
                                std::span<const ResidualRecord> records) {
  CsvWriter w(path, digest, seed);
  w.header("variant,N,t,x,xhat,abs_residual");
  for (const auto& r : records) {
    w.row_begin();
    w.cell(r.variant);
    w.cell(r.N);
    w.cell(r.sample.t);
    w.cell(r.sample.x);
    w.cell(r.sample.xhat);
    w.cell(r.sample.residual);
    w.row_end();
  }
}

inline void write_assumptions_csv(const std::string& path, const std::string& digest,
                                  std::uint64_t seed, const AssumptionReport& rep) {
  CsvWriter w(path, digest, seed);
  w.header("assumption,pass,margin,witness");
  for (const auto& e : rep.entries) {
    w.row_begin();
    w.cell(e.name);
    w.cell(std::string(e.pass ? "pass" : "fail"));
    w.cell(e.margin);
    w.cell("\"" + e.witness + "\"");
    w.row_end();
  }
}

inline void write_rate_csv(const std::string& path, const std::string& digest,
                           std::uint64_t seed, const RateReport& rep) {
  CsvWriter w(path, digest, seed);
  w.header("quantity,N,error,stderr");
  for (const auto& r : rep.rows) {
    w.row_begin();
    w.cell(std::string(quantity_name(rep.quantity)));
    w.cell(r.N);
    w.cell(r.error);
    w.cell(r.stderr_);
    w.row_end();
  }
}

/// Plain two-column plot data: log2(N) and log2(error), space separated.
inline void write_rate_plot(const std::string& path, const std::string& digest,
                            std::uint64_t seed, const RateReport& rep) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open output file: " + path);
  std::fprintf(fp, "# digest=%s seed=%llu quantity=%s\n", digest.c_str(),
               static_cast<unsigned long long>(seed), quantity_name(rep.quantity));
  for (const auto& r : rep.rows)
    if (r.error > 0.0)
      std::fprintf(fp, "%.17g %.17g\n", std::log2(static_cast<double>(r.N)),
                   std::log2(r.error));
  std::fclose(fp);
}

struct RateSummaryRow {
  std::string quantity;
  std::optional<double> slope;
  std::optional<double> r2;
  double band_lo = 0.0;
  double band_hi = 0.0;
  std::string verdict;  // pass / fail / degenerate
};

inline void write_rates_summary_csv(const std::string& path, const std::string& digest,
                                    std::uint64_t seed,
                                    std::span<const RateSummaryRow> rows) {
  CsvWriter w(path, digest, seed);
  w.header("quantity,slope,r2,pass_band_lo,pass_band_hi,pass");
  for (const auto& r : rows) {
    w.row_begin();
    w.cell(r.quantity);
    if (r.slope) w.cell(*r.slope); else w.cell(std::string("nan"));
    if (r.r2) w.cell(*r.r2); else w.cell(std::string("nan"));
    w.cell(r.band_lo);
    w.cell(r.band_hi);
    w.cell(r.verdict);
    w.row_end();
  }
}

inline void write_gateaux_csv(const std::string& path, const std::string& digest,
                              std::uint64_t seed, const GateauxResult& res,
                              double tolerance) {
  CsvWriter w(path, digest, seed);
  w.header("direction,dJ_deps,abs_dJ_deps,J_base,tolerance,pass");
  for (std::size_t d = 0; d < res.dJ.size(); ++d) {
    w.row_begin();
    w.cell(d);
    w.cell(res.dJ[d]);
    w.cell(std::abs(res.dJ[d]));
    w.cell(res.J_base);
    w.cell(tolerance);
    w.cell(std::string(std::abs(res.dJ[d]) <= tolerance ? "pass" : "fail"));
    w.row_end();
  }
}

struct ValueGapRow {
  std::size_t N = 0;
  ValueGapResult result;
};

inline void write_value_gap_csv(const std::string& path, const std::string& digest,
                                std::uint64_t seed, std::span<const ValueGapRow> rows) {
  CsvWriter w(path, digest, seed);
  w.header("N,value_gap,value_gap_stderr,field_gap_sup2,field_gap_sup2_stderr,M");
  for (const auto& r : rows) {
    w.row_begin();
    w.cell(r.N);
    w.cell(r.result.gap.value);
    w.cell(r.result.gap.stderr_);
    w.cell(r.result.field_gap_sup2.value);
    w.cell(r.result.field_gap_sup2.stderr_);
    w.cell(r.result.gap.n);
    w.row_end();
  }
}

struct EstimateRow {
  std::string quantity;
  Estimate estimate;
  std::size_t M0 = 0, M1 = 0, N = 0;
};

inline void write_estimates_csv(const std::string& path, const std::string& digest,
                                std::uint64_t seed, std::span<const EstimateRow> rows) {
  CsvWriter w(path, digest, seed);
  w.header("quantity,value,stderr,M0,M1,N,seed");
  for (const auto& r : rows) {
    w.row_begin();
    w.cell(r.quantity);
    w.cell(r.estimate.value);
    w.cell(r.estimate.stderr_);
    w.cell(r.M0);
    w.cell(r.M1);
    w.cell(r.N);
    w.cell(static_cast<std::size_t>(seed));
    w.row_end();
  }
}

inline void write_trajectories_csv(const std::string& path, const std::string& digest,
                                   std::uint64_t seed,
                                   std::span<const TrajectorySet> sets) {
  CsvWriter w(path, digest, seed);
  w.header("path_id,particle_id,t,x,u,xhat_or_xbarN");
  for (std::size_t p = 0; p < sets.size(); ++p) {
    const TrajectorySet& tr = sets[p];
    for (std::size_t i = 0; i < tr.particles(); ++i)
      for (std::size_t k = 0; k < tr.nodes(); ++k) {
        w.row_begin();
        w.cell(p);
        w.cell(i);
        w.cell(tr.dt * static_cast<double>(tr.start_step + k));
        w.cell(tr.states[i][k]);
        w.cell(tr.controls[i][k]);
        w.cell(tr.mean_path[k]);
        w.row_end();
      }
  }
}

}  // namespace mfc
