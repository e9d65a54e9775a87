#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "mfc/functions.hpp"

using namespace mfc;

namespace {

double fd_central(const ScalarC2Fn& f, double x, bool second) {
  const double h = 1e-5;
  if (!second) return (f.value(x + h) - f.value(x - h)) / (2.0 * h);
  return (f.d1(x + h) - f.d1(x - h)) / (2.0 * h);
}

std::vector<ScalarC2Fn> catalog_samples() {
  return {
      catalog_make(FnKind::kZero),
      catalog_make(FnKind::kConstant, {0.7}),
      catalog_make(FnKind::kAffine, {0.3, -1.2}),
      catalog_make(FnKind::kSin, {1.0}),
      catalog_make(FnKind::kCos, {0.5}),
      catalog_make(FnKind::kTanh, {2.0}),
      catalog_make(FnKind::kNegLogistic),
      catalog_make(FnKind::kScaledSum, {0.1, 0.0, 0.4, 0.3, 1.0, 0.2, 1.0}),
  };
}

}  // namespace

TEST_CASE("neg_logistic values and derivatives", "[functions]") {
  const ScalarC2Fn f = catalog_make(FnKind::kNegLogistic);
  REQUIRE(f.value(0.0) == Catch::Approx(-0.5).margin(1e-15));
  REQUIRE(f.d1(0.0) == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(f.d2(0.0) == Catch::Approx(0.0).margin(1e-15));
  // Stable on both tails.
  REQUIRE(std::isfinite(f.value(700.0)));
  REQUIRE(std::isfinite(f.value(-700.0)));
  REQUIRE(f.value(700.0) == Catch::Approx(0.0).margin(1e-100));
  REQUIRE(f.value(-700.0) == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("zero function is identically zero", "[functions]") {
  const ScalarC2Fn f = catalog_make(FnKind::kZero);
  for (double x : {-5.0, 0.0, 3.25}) {
    REQUIRE(f.value(x) == 0.0);
    REQUIRE(f.d1(x) == 0.0);
    REQUIRE(f.d2(x) == 0.0);
  }
}

TEST_CASE("sin amplitude one second derivative", "[functions]") {
  const ScalarC2Fn f = catalog_make(FnKind::kSin, {1.0});
  const double x = std::numbers::pi / 2.0;
  REQUIRE(f.d2(x) == Catch::Approx(-1.0).margin(1e-15));
  REQUIRE(f.d2(1.3) == Catch::Approx(-std::sin(1.3)).margin(1e-15));
}

TEST_CASE("analytic derivatives agree with finite differences", "[functions]") {
  for (const auto& f : catalog_samples()) {
    for (int i = 0; i <= 1000; ++i) {
      const double x = -10.0 + 20.0 * i / 1000.0;
      const double d1 = f.d1(x);
      REQUIRE(std::abs(d1 - fd_central(f, x, false)) <= 1e-6 * (1.0 + std::abs(d1)));
      const double d2 = f.d2(x);
      REQUIRE(std::abs(d2 - fd_central(f, x, true)) <= 1e-6 * (1.0 + std::abs(d2)));
    }
  }
}

TEST_CASE("catalog rejects bad inputs", "[functions]") {
  REQUIRE_THROWS_AS(catalog_make("nope"), std::invalid_argument);
  REQUIRE_THROWS_AS(catalog_make(FnKind::kConstant, {}), std::invalid_argument);
  REQUIRE_THROWS_AS(catalog_make(FnKind::kAffine, {1.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(catalog_make(FnKind::kSin, {-1.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(catalog_make(FnKind::kScaledSum, {0, 0, 0, 0, 0, 0, 0, 1}),
                    std::invalid_argument);
  const double inf = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(catalog_make(FnKind::kConstant, {inf}), std::invalid_argument);
}

TEST_CASE("boundedness flags and bounds", "[functions]") {
  REQUIRE(catalog_make(FnKind::kNegLogistic).is_bounded());
  REQUIRE(catalog_make(FnKind::kSin, {2.0}).is_bounded());
  REQUIRE(!catalog_make(FnKind::kAffine, {0.0, 1.0}).is_bounded());
  REQUIRE(catalog_make(FnKind::kAffine, {0.5, 0.0}).is_bounded());
  REQUIRE(!catalog_make(FnKind::kScaledSum, {0, 0, 1.0}).is_bounded());
  REQUIRE(catalog_make(FnKind::kScaledSum, {1, 0, 0, 1, 1, 1, 1}).is_bounded());

  for (const auto& f : catalog_samples()) {
    if (!f.is_bounded()) continue;
    for (int i = 0; i <= 200; ++i) {
      const double x = -50.0 + 100.0 * i / 200.0;
      REQUIRE(std::abs(f.value(x)) <= f.value_bound() + 1e-12);
      REQUIRE(std::abs(f.d1(x)) <= f.d1_bound() + 1e-12);
      REQUIRE(std::abs(f.d2(x)) <= f.d2_bound() + 1e-12);
    }
  }
}
