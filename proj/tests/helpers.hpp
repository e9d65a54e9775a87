#pragma once

// Shared model builders for the unit and acceptance suites.

#include "mfc/mfc.hpp"

namespace mfc_test {

/// All couplings zero; plain LQ in the idiosyncratic part.
inline mfc::MfcModel zero_coupling_model() {
  mfc::MfcModel m;
  m.A = -0.5;
  m.B = 1.0;
  m.sigma = 0.7;
  m.sigma0 = 0.5;
  m.Q = 1.0;
  m.R = 1.0;
  m.G = 1.0;
  m.T = 1.0;
  m.a = mfc::catalog_make(mfc::FnKind::kZero);
  m.b = mfc::catalog_make(mfc::FnKind::kZero);
  m.q = mfc::catalog_make(mfc::FnKind::kZero);
  m.r = mfc::catalog_make(mfc::FnKind::kZero);
  m.g = mfc::catalog_make(mfc::FnKind::kZero);
  m.init = {mfc::InitKind::kGaussian, 0.4, 0.5};
  return m;
}

struct LqData {
  mfc::MfcModel model;
  mfc::LqCoeffs bars;
};

/// Fully linear-quadratic couplings (unbounded; oracle-only under (A1)).
inline LqData lq_model() {
  LqData d;
  mfc::MfcModel& m = d.model;
  m.A = -0.2;
  m.B = 1.0;
  m.sigma = 0.8;
  m.sigma0 = 0.5;
  m.Q = 0.5;
  m.R = 1.0;
  m.G = 0.3;
  m.T = 1.0;
  d.bars = {0.2, 0.3, 0.3, 0.5, 0.4};
  m.a = mfc::catalog_make(mfc::FnKind::kAffine, {0.0, d.bars.Abar});
  m.b = mfc::catalog_make(mfc::FnKind::kAffine, {0.0, d.bars.Bbar});
  m.q = mfc::catalog_make(mfc::FnKind::kScaledSum, {0, 0, d.bars.Qbar});
  m.r = mfc::catalog_make(mfc::FnKind::kScaledSum, {0, 0, d.bars.Rbar});
  m.g = mfc::catalog_make(mfc::FnKind::kScaledSum, {0, 0, d.bars.Gbar});
  m.init = {mfc::InitKind::kGaussian, 0.5, 0.5};
  return d;
}

/// The non-convex showcase couplings (a = -1/(e^x+1), b const, q = sin,
/// r = cos + a, g = sin/2) with R = 1 so the feedback stays well defined.
inline mfc::MfcModel nonconvex_model() {
  mfc::MfcModel m;
  m.A = -0.3;
  m.B = 1.0;
  m.sigma = 1.0;
  m.sigma0 = 0.5;
  m.Q = 0.5;
  m.R = 1.0;
  m.G = 0.5;
  m.T = 1.0;
  m.a = mfc::catalog_make(mfc::FnKind::kNegLogistic);
  m.b = mfc::catalog_make(mfc::FnKind::kConstant, {0.3});
  m.q = mfc::catalog_make(mfc::FnKind::kSin, {1.0});
  m.r = mfc::catalog_make(mfc::FnKind::kScaledSum, {0, 0, 0, 0, 1, 0, 1});
  m.g = mfc::catalog_make(mfc::FnKind::kSin, {0.5});
  m.init = {mfc::InitKind::kGaussian, 0.5, 0.5};
  return m;
}

/// The showcase couplings with the published weights Q = R = G = 0; only
/// valid as solver input after substituting R > 0.
inline mfc::MfcModel example_31_model(double R) {
  mfc::MfcModel m = nonconvex_model();
  m.A = 0.0;
  m.Q = 0.0;
  m.R = R;
  m.G = 0.0;
  m.g = mfc::catalog_make(mfc::FnKind::kZero);
  return m;
}

inline mfc::PdeConfig small_pde(double lo, double hi, std::size_t nx, std::size_t nt,
                                double T) {
  return mfc::PdeConfig::make(lo, hi, nx, nt, T, 0.0, 0.8);
}

}  // namespace mfc_test
