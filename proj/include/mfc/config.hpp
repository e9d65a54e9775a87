#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfc/convergence.hpp"
#include "mfc/model.hpp"

namespace mfc {

struct GridsConfig {
  std::size_t K = 2000;   // Riccati steps
  std::size_t nx = 401;   // PDE space intervals
  std::size_t nt = 2000;  // PDE time intervals
  std::optional<std::pair<double, double>> domain;  // override of the default box
  double cfl_safety = 0.8;
};

struct SimConfig {
  std::size_t n_t = 0;  // 0: align with grids.nt
  std::size_t N = 64;
  std::size_t M0 = 64;
  std::size_t M1 = 64;
  std::uint64_t seed = 12345;
};

struct ExperimentConfig {
  std::vector<Quantity> quantities;
  std::vector<std::size_t> N_ladder = {8, 16, 32, 64, 128, 256};
  std::size_t M = 200;
};

struct RunConfig {
  MfcModel model;
  GridsConfig grids;
  SimConfig sim;
  ExperimentConfig experiment;
  std::string output = "out";
  std::string digest;  // content hash of the canonical config

  std::size_t sim_steps() const { return sim.n_t ? sim.n_t : grids.nt; }
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

inline ScalarC2Fn parse_fn(const json& j, const std::string& name) {
  if (!j.is_object()) throw std::invalid_argument("config: function " + name + " must be an object");
  reject_unknown(j, {"kind", "params"}, "model." + name);
  if (!j.contains("kind")) throw std::invalid_argument("config: function " + name + " needs 'kind'");
  std::vector<double> params;
  if (j.contains("params")) params = j.at("params").get<std::vector<double>>();
  return catalog_make(j.at("kind").get<std::string>(), params);
}

inline InitialLaw parse_init(const json& j) {
  reject_unknown(j, {"kind", "mean", "spread"}, "model.init");
  InitialLaw law;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "point") law.kind = InitKind::kPoint;
  else if (kind == "gaussian") law.kind = InitKind::kGaussian;
  else if (kind == "uniform") law.kind = InitKind::kUniform;
  else throw std::invalid_argument("config: unknown init kind '" + kind + "'");
  law.mean = j.at("mean").get<double>();
  law.spread = j.value("spread", 0.0);
  law.validate();
  return law;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  detail::reject_unknown(j, {"model", "grids", "sim", "experiment", "output"}, "root");
  if (!j.contains("model")) throw std::invalid_argument("config: missing 'model' section");

  RunConfig cfg;
  {
    const json& jm = j.at("model");
    detail::reject_unknown(jm,
                           {"A", "B", "sigma", "sigma0", "Q", "R", "G", "T", "a", "b", "q",
                            "r", "g", "init"},
                           "model");
    MfcModel& m = cfg.model;
    m.A = jm.at("A").get<double>();
    m.B = jm.at("B").get<double>();
    m.sigma = jm.at("sigma").get<double>();
    m.sigma0 = jm.at("sigma0").get<double>();
    m.Q = jm.at("Q").get<double>();
    m.R = jm.at("R").get<double>();
    m.G = jm.at("G").get<double>();
    m.T = jm.at("T").get<double>();
    m.a = detail::parse_fn(jm.at("a"), "a");
    m.b = detail::parse_fn(jm.at("b"), "b");
    m.q = detail::parse_fn(jm.at("q"), "q");
    m.r = detail::parse_fn(jm.at("r"), "r");
    m.g = detail::parse_fn(jm.at("g"), "g");
    m.init = detail::parse_init(jm.at("init"));
    m.validate();
  }
  if (j.contains("grids")) {
    const json& jg = j.at("grids");
    detail::reject_unknown(jg, {"K", "nx", "nt", "domain", "cfl_safety"}, "grids");
    cfg.grids.K = jg.value("K", cfg.grids.K);
    cfg.grids.nx = jg.value("nx", cfg.grids.nx);
    cfg.grids.nt = jg.value("nt", cfg.grids.nt);
    cfg.grids.cfl_safety = jg.value("cfl_safety", cfg.grids.cfl_safety);
    if (jg.contains("domain")) {
      const auto d = jg.at("domain").get<std::vector<double>>();
      if (d.size() != 2 || !(d[1] > d[0]))
        throw std::invalid_argument("config: grids.domain must be [lo, hi] with hi > lo");
      cfg.grids.domain = std::make_pair(d[0], d[1]);
    }
    if (cfg.grids.K < 10) throw std::invalid_argument("config: grids.K >= 10 required");
  }
  if (j.contains("sim")) {
    const json& js = j.at("sim");
    detail::reject_unknown(js, {"n_t", "N", "M0", "M1", "seed"}, "sim");
    cfg.sim.n_t = js.value("n_t", cfg.sim.n_t);
    cfg.sim.N = js.value("N", cfg.sim.N);
    cfg.sim.M0 = js.value("M0", cfg.sim.M0);
    cfg.sim.M1 = js.value("M1", cfg.sim.M1);
    cfg.sim.seed = js.value("seed", cfg.sim.seed);
    if (cfg.sim.N < 1 || cfg.sim.M0 < 1 || cfg.sim.M1 < 1)
      throw std::invalid_argument("config: sim counts must be >= 1");
  }
  if (j.contains("experiment")) {
    const json& je = j.at("experiment");
    detail::reject_unknown(je, {"quantities", "N_ladder", "M"}, "experiment");
    if (je.contains("quantities")) {
      cfg.experiment.quantities.clear();
      for (const auto& s : je.at("quantities").get<std::vector<std::string>>()) {
        const auto q = quantity_from_name(s);
        if (!q) throw std::invalid_argument("config: unknown quantity '" + s + "'");
        cfg.experiment.quantities.push_back(*q);
      }
    }
    if (je.contains("N_ladder")) {
      cfg.experiment.N_ladder = je.at("N_ladder").get<std::vector<std::size_t>>();
      if (cfg.experiment.N_ladder.empty())
        throw std::invalid_argument("config: experiment.N_ladder must be non-empty");
      for (std::size_t n : cfg.experiment.N_ladder)
        if (n < 1) throw std::invalid_argument("config: N_ladder entries must be >= 1");
    }
    cfg.experiment.M = je.value("M", cfg.experiment.M);
    if (cfg.experiment.M < 1) throw std::invalid_argument("config: experiment.M >= 1 required");
  }
  if (cfg.experiment.quantities.empty())
    cfg.experiment.quantities = {Quantity::kXnVsXhat,  Quantity::kXbarnVsXhat,
                                 Quantity::kFieldGap,  Quantity::kControlGap,
                                 Quantity::kChaos,     Quantity::kCostGap,
                                 Quantity::kValueGap,  Quantity::kMoment};
  if (j.contains("output")) cfg.output = j.at("output").get<std::string>();

  cfg.digest = hex64(fnv1a64(j.dump()));  // canonical: nlohmann sorts object keys
  return cfg;
}

}  // namespace mfc
