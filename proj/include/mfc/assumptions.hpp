#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mfc/model.hpp"
#include "mfc/riccati.hpp"

namespace mfc {

struct AssumptionEntry {
  std::string name;
  bool pass = false;
  double margin = 0.0;
  std::string witness;  // point(s) at which the worst margin is attained
};

struct AssumptionReport {
  std::vector<AssumptionEntry> entries;

  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
  const AssumptionEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

struct ValidationGrid {
  double u_lo = -10.0, u_hi = 10.0;  // control sample range
  double y_lo = -10.0, y_hi = 10.0;  // adjoint sample range
  std::size_t n = 2001;              // samples per axis
  double eps0_tol = 1e-3;            // required (A3) margin
};

namespace detail {
inline std::string point_str(const char* n1, double v1, const char* n2, double v2) {
  std::ostringstream os;
  os << n1 << "=" << v1 << ", " << n2 << "=" << v2;
  return os.str();
}
}  // namespace detail

/// Samples the assumption inequalities on finite grids and reports the worst
/// margins with witnesses. Deterministic: identical inputs give identical
/// reports. Throws on R <= 0 (every implemented feedback formula uses 1/R).
inline AssumptionReport validate_assumptions(const MfcModel& m, const ValidationGrid& grid,
                                             const TimeGridFn& P) {
  if (!(m.R > 0.0))
    throw std::domain_error("validate_assumptions: implementation requires R > 0");
  if (grid.n < 2) throw std::invalid_argument("validate_assumptions: empty grid");

  AssumptionReport rep;

  {  // (A1) bounded couplings with bounded first and second derivatives
    AssumptionEntry e;
    e.name = "A1";
    std::string bad;
    const ScalarC2Fn* fns[5] = {&m.a, &m.b, &m.q, &m.r, &m.g};
    const char* names[5] = {"a", "b", "q", "r", "g"};
    for (int i = 0; i < 5; ++i) {
      if (!fns[i]->is_bounded()) {
        if (!bad.empty()) bad += ", ";
        bad += names[i];
        bad += " (kind ";
        bad += fn_kind_name(fns[i]->kind());
        bad += ")";
      }
    }
    e.pass = bad.empty();
    e.margin = e.pass ? 1.0 : -1.0;
    e.witness = e.pass ? "" : "unbounded: " + bad;
    rep.entries.push_back(e);
  }

  {  // (A2) square-integrable i.i.d. initial states
    AssumptionEntry e;
    e.name = "A2";
    e.pass = std::isfinite(m.init.second_moment()) && m.init.spread >= 0.0;
    e.margin = e.pass ? 1.0 : -1.0;
    if (!e.pass) e.witness = "second moment not finite";
    rep.entries.push_back(e);
  }

  const double du = (grid.u_hi - grid.u_lo) / static_cast<double>(grid.n - 1);
  const double dy = (grid.y_hi - grid.y_lo) / static_cast<double>(grid.n - 1);

  {  // (A3) |R + r''(u)/2 + y * b''(u)| bounded away from zero
    AssumptionEntry e;
    e.name = "A3";
    double worst = std::numeric_limits<double>::infinity();
    double wu = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) {
      const double u = grid.u_lo + du * static_cast<double>(i);
      const double base = m.R + 0.5 * m.r.d2(u);
      const double b2 = m.b.d2(u);
      if (b2 == 0.0) {
        const double v = std::abs(base);
        if (v < worst) { worst = v; wu = u; wy = grid.y_lo; }
        continue;
      }
      for (std::size_t j = 0; j < grid.n; ++j) {
        const double y = grid.y_lo + dy * static_cast<double>(j);
        const double v = std::abs(base + y * b2);
        if (v < worst) { worst = v; wu = u; wy = y; }
      }
    }
    e.margin = worst;
    e.pass = worst >= grid.eps0_tol;
    e.witness = detail::point_str("u", wu, "y", wy);
    rep.entries.push_back(e);
  }

  {  // (A4), drift part: da(u) * P(t) - (B/R) * db(u) * P(t)^2 >= 0
    AssumptionEntry e;
    e.name = "A4_drift";
    double worst = std::numeric_limits<double>::infinity();
    double wu = 0.0, wt = 0.0;
    const auto& pv = P.values();
    for (std::size_t i = 0; i < grid.n; ++i) {
      const double u = grid.u_lo + du * static_cast<double>(i);
      const double ad = m.a.d1(u);
      const double bd = m.b.d1(u);
      for (std::size_t k = 0; k < pv.size(); ++k) {
        const double p = pv[k];
        const double v = ad * p - m.B / m.R * bd * p * p;
        if (v < worst) { worst = v; wu = u; wt = P.node_time(k); }
      }
    }
    e.margin = worst;
    e.pass = worst >= -1e-12;
    e.witness = detail::point_str("t", wt, "u", wu);
    rep.entries.push_back(e);
  }

  {  // (A4), control part: B^2 + B * db(u) >= 0
    AssumptionEntry e;
    e.name = "A4_control";
    double worst = std::numeric_limits<double>::infinity();
    double wu = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) {
      const double u = grid.u_lo + du * static_cast<double>(i);
      const double v = m.B * m.B + m.B * m.b.d1(u);
      if (v < worst) { worst = v; wu = u; }
    }
    e.margin = worst;
    e.pass = worst >= -1e-12;
    std::ostringstream os;
    os << "u=" << wu;
    e.witness = os.str();
    rep.entries.push_back(e);
  }

  return rep;
}

}  // namespace mfc
