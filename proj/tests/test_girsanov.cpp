#include <catch2/catch.hpp>

#include <cmath>

#include "polylab/girsanov.hpp"
#include "polylab/stats.hpp"

using namespace polylab;

namespace {
const Kernel kRef = make_polynomial4_kernel();
}

TEST_CASE("density formula at the midpoint", "[girsanov]") {
  const GirsanovShift shift = make_girsanov_shift(1, 1.0, 0.55);
  Path p;
  p.dt = 0.25;
  p.values = {0.0, 0.3, 0.0, -0.2, 0.1};  // midpoint value 0
  REQUIRE(girsanov_density(p, shift) == Approx(std::exp(-4.0)).margin(1e-14));
}

TEST_CASE("penalty bounds the density inside the central block", "[girsanov]") {
  const double t = 4.0, alpha = 0.55;
  const BlockGeometry geom{t, alpha, 2};
  for (int k : {1, 2, -1}) {
    const GirsanovShift shift = make_girsanov_shift(k, t, alpha);
    for (const Path& p : sample_paths(500, t, 0.05, 90)) {
      if (std::fabs(path_midpoint(p)) > geom.block_scale()) continue;
      REQUIRE(girsanov_density(p, shift) >= shift.penalty() * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("penalty is monotone in |k| and in t", "[girsanov]") {
  const double alpha = 0.55;
  double prev = 1.0;
  for (int k : {1, 2, 3}) {
    const double pen = make_girsanov_shift(k, 8.0, alpha).penalty();
    REQUIRE(pen < prev);
    prev = pen;
  }
  prev = 1.0;
  for (double t : {2.0, 4.0, 8.0}) {
    const double pen = make_girsanov_shift(1, t, alpha).penalty();
    REQUIRE(pen < prev);
    prev = pen;
  }
}

TEST_CASE("density is a mean-one martingale factor", "[girsanov]") {
  // At small t the lognormal variance exp(8 k^2 t^{2a-1}) - 1 is moderate and
  // the 3-sigma band is meaningful; the log identity below covers large t.
  const double t = 1e-6, alpha = 0.55;
  const GirsanovShift shift = make_girsanov_shift(1, t, alpha);
  std::vector<double> densities;
  for (const Path& p : sample_paths(10000, t, t / 64.0, 91))
    densities.push_back(girsanov_density(p, shift));
  const MeanVar mv = mean_var(densities);
  REQUIRE(mv.mean == Approx(1.0).margin(3.0 * mv.std_error()));
}

TEST_CASE("log density has the exact Gaussian mean at production scale",
          "[girsanov]") {
  // E[log M_t] = -4 k^2 t^{2 alpha - 1}; stable at any horizon
  const double t = 16.0, alpha = 0.55;
  const GirsanovShift shift = make_girsanov_shift(1, t, alpha);
  std::vector<double> logs;
  for (const Path& p : sample_paths(10000, t, 0.01, 92))
    logs.push_back(shift.log_density_at_midpoint(path_midpoint(p)));
  const MeanVar mv = mean_var(logs);
  const double expected = -4.0 * std::pow(t, 2.0 * alpha - 1.0);
  REQUIRE(mv.mean == Approx(expected).margin(3.0 * mv.std_error()));
}

TEST_CASE("path shift transports the block indicator", "[girsanov]") {
  const double t = 4.0, alpha = 0.55;
  const BlockGeometry geom{t, alpha, 3};
  const ShiftProfile profile = ShiftProfile::ramped(2, t, alpha);
  std::size_t moved = 0;
  for (const Path& p : sample_paths(400, t, 0.05, 93)) {
    const Path up = unshift_path(p, profile);  // b + h
    REQUIRE(path_in_block(p, geom, 0) == path_in_block(up, geom, 2));
    if (path_in_block(up, geom, 2)) ++moved;
    const Path back = shift_path(up, profile);
    double max_err = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i)
      max_err = std::max(max_err, std::fabs(back.values[i] - p.values[i]));
    REQUIRE(max_err < 1e-12);
  }
  REQUIRE(moved > 0);
  // k = 0 is the identity
  const Path p = sample_paths(1, t, 0.05, 94)[0];
  const Path same = shift_path(p, ShiftProfile::ramped(0, t, alpha));
  REQUIRE(same.values == p.values);
}

TEST_CASE("entropic bound: degenerate and small checks", "[girsanov]") {
  SECTION("k = 0 compares a quantity with itself") {
    const BlockGeometry geom{4.0, 0.55, 3};
    const EntropicBoundReport rep =
        verify_entropic_bound(kRef, geom, 0, 1.0, 2, 200, 95, 4.0 / 256.0);
    REQUIRE(rep.conclusive);
    REQUIRE(rep.violations == 0);
    REQUIRE(rep.log_penalty == 0.0);
    REQUIRE(std::fabs(rep.min_log_margin) < 1e-10);
  }
  SECTION("beta = 0 reduces to Girsanov-weighted block probabilities") {
    const double t = 4.0, alpha = 0.55;
    const BlockGeometry geom{t, alpha, 3};
    const EntropicBoundReport rep =
        verify_entropic_bound(kRef, geom, 1, 0.0, 1, 4000, 96, t / 256.0);
    REQUIRE(rep.conclusive);
    REQUIRE(rep.violations == 0);
    // lhs estimates P(L_1) through the change of measure; compare with a
    // plain Monte Carlo count on an independent sample
    std::size_t hits = 0;
    const auto oracle_paths = sample_paths(40000, t, t / 256.0, 424242);
    for (const Path& p : oracle_paths)
      if (path_in_block(p, geom, 1)) ++hits;
    const double direct = double(hits) / double(oracle_paths.size());
    const double via_girsanov = std::exp(rep.lhs_log_mean);
    REQUIRE(via_girsanov ==
            Approx(direct).margin(4.0 * std::sqrt(direct / 40000.0) + 0.01));
  }
  SECTION("pathwise inequality at production parameters, small replica count") {
    const double t = 16.0, alpha = 0.55;
    const BlockGeometry geom{t, alpha, 4};
    const EntropicBoundReport rep =
        verify_entropic_bound(kRef, geom, 1, 1.0, 2, 300, 97);
    REQUIRE(rep.conclusive);
    REQUIRE(rep.support_paths > 0);
    REQUIRE(rep.violations == 0);
    REQUIRE(rep.min_log_margin > -1e-3);
  }
}

TEST_CASE("delta of a shifted path is the shifted delta", "[girsanov]") {
  // C(t) is Toeplitz and shift-invariant in law, so solving C delta = v for
  // the shifted path b + h reproduces the original delta displaced by k,
  // up to the truncation window edge
  const double t = 16.0, alpha = 0.55;
  const int M = 8, k = 2;
  const BlockGeometry geom{t, alpha, M};
  const BlockMatrix C = covariance_matrix(kRef, geom);
  std::uint64_t idx = 0;
  Path b = sample_paths(1, t, 0.01, 555)[0];
  while (!path_in_block(b, geom, 0))
    b = sample_paths(1, t, 0.01, substream_seed(555, ++idx))[0];
  const Path bk = unshift_path(b, ShiftProfile::ramped(k, t, alpha));
  const DeltaSolution base = delta_solve(C, v_vector(kRef, geom, b));
  const DeltaSolution shifted = delta_solve(C, v_vector(kRef, geom, bk));
  for (int j = -M; j <= M - k - 2; ++j) {
    INFO("j " << j);
    REQUIRE(shifted.delta.at(j + k) == Approx(base.delta.at(j)).margin(1e-6));
  }
}

TEST_CASE("shift law equality by KS probes", "[girsanov]") {
  const BlockGeometry geom{4.0, 0.55, 2};
  const ShiftLawReport rep =
      verify_shift_law(kRef, geom, 4.0 / 16.0, 1, 400, 98);
  REQUIRE_FALSE(rep.degenerate);
  REQUIRE(rep.probes.size() == 5);
  for (const auto& p : rep.probes) {
    INFO(p.name << " p=" << p.p_value);
    REQUIRE(p.pass);
  }
  const ShiftLawReport degenerate =
      verify_shift_law(kRef, geom, 0.25, 0, 100, 99);
  REQUIRE(degenerate.degenerate);
  REQUIRE(degenerate.probes.empty());
}
