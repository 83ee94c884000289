#include <catch2/catch.hpp>

#include <cmath>

#include "polylab/quadrature.hpp"

using namespace polylab;

TEST_CASE("smooth integrand to machine precision", "[quadrature]") {
  const auto r = integrate([](double x) { return x * x; }, 0.0, 1.0, 1e-12);
  REQUIRE(r.value == Approx(1.0 / 3.0).epsilon(1e-12));
  const auto e = integrate([](double x) { return std::exp(x); }, 0.0, 2.0, 1e-12);
  REQUIRE(e.value == Approx(std::exp(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("kinked integrand handled adaptively", "[quadrature]") {
  const auto r = integrate([](double x) { return std::fabs(x); }, -1.0, 1.0, 1e-11);
  REQUIRE(r.value == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("semi-infinite tail with declared power bound", "[quadrature]") {
  // int_1^inf x^{-4} dx = 1/3
  const auto r = integrate_semi_infinite(
      [](double x) { return std::pow(x, -4.0); }, 1.0, 1.0, 4.0, 1e-10);
  REQUIRE(r.value == Approx(1.0 / 3.0).epsilon(1e-8));
  REQUIRE(r.error_estimate < 1e-9);
}

TEST_CASE("non-convergence raises a diagnostic error", "[quadrature]") {
  // integrable singularity with a tiny subdivision budget
  try {
    (void)integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-300, 1.0,
                    1e-13, 6);
    FAIL("expected QuadratureError");
  } catch (const QuadratureError& err) {
    REQUIRE(err.achieved_tolerance > 1e-13);
  }
}
