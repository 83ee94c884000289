#include <catch2/catch.hpp>

#include <cmath>

#include "polylab/polymer.hpp"
#include "polylab/stats.hpp"
#include "support/oracles.hpp"

using namespace polylab;

namespace {
const Kernel kRef = make_polynomial4_kernel();

Path constant_path(double level, double t, double dt) {
  Path p;
  p.dt = dt;
  p.values.assign(static_cast<std::size_t>(std::llround(t / dt)) + 1, level);
  return p;
}
}  // namespace

TEST_CASE("path sampler determinism and Brownian variance", "[polymer]") {
  const auto a = sample_paths(3, 1.0, 0.01, 5);
  const auto b = sample_paths(3, 1.0, 0.01, 5);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].values == b[i].values);

  const auto paths = sample_paths(10000, 1.0, 0.01, 999);
  std::vector<double> ends;
  for (const auto& p : paths) ends.push_back(p.values.back());
  const MeanVar mv = mean_var(ends);
  REQUIRE(mv.mean == Approx(0.0).margin(3.0 * mv.std_error()));
  REQUIRE(mv.var == Approx(1.0).epsilon(3.0 * std::sqrt(2.0 / 10000.0)));
}

TEST_CASE("running maximum matches the independent sampler and the "
          "reflection value", "[polymer]") {
  const double dt = 1e-3;
  const auto paths = sample_paths(10000, 1.0, dt, 31);
  std::vector<double> sups;
  for (const auto& p : paths) {
    double s = 0.0;
    for (double v : p.values) s = std::max(s, v);
    sups.push_back(s);
  }
  const MeanVar ours = mean_var(sups);

  const auto ref = oracles::reference_brownian_sups(10000, 1.0, dt, 1234);
  const MeanVar theirs = mean_var(ref);
  const double se_diff =
      std::sqrt(ours.std_error() * ours.std_error() +
                theirs.std_error() * theirs.std_error());
  REQUIRE(ours.mean == Approx(theirs.mean).margin(3.0 * se_diff));

  // reflection principle: E sup = sqrt(2/pi), with the O(sqrt(dt)) deficit of
  // the discrete maximum allowed for on the low side
  const double exact = std::sqrt(2.0 / M_PI);
  REQUIRE(ours.mean <= exact + 3.0 * ours.std_error());
  REQUIRE(ours.mean >= exact - 0.7 * std::sqrt(dt) - 3.0 * ours.std_error());
}

TEST_CASE("Hamiltonian variance is t Q(0) for a fixed path", "[polymer]") {
  const double t = 2.0, dt = 0.1;
  const SpaceGrid grid = make_grid(-2.0, 0.1, 41);
  const Path path = constant_path(0.0, t, dt);
  std::vector<double> mh;
  for (std::uint64_t s = 0; s < 4000; ++s)
    mh.push_back(minus_hamiltonian(
        sample_field(kRef, grid, t, dt, substream_seed(77, s)), path));
  const MeanVar mv = mean_var(mh);
  REQUIRE(mv.mean == Approx(0.0).margin(3.0 * mv.std_error()));
  REQUIRE(mv.var ==
          Approx(t * kRef(0.0)).epsilon(3.0 * std::sqrt(2.0 / 4000.0)));
}

TEST_CASE("Hamiltonian is deterministic in the path values", "[polymer]") {
  const SpaceGrid grid = make_grid(-4.0, 0.1, 81);
  const FieldRealization f = sample_field(kRef, grid, 1.0, 0.05, 3);
  const auto paths = sample_paths(2, 1.0, 0.05, 8);
  Path copy = paths[0];
  REQUIRE(minus_hamiltonian(f, paths[0]) == minus_hamiltonian(f, copy));
  REQUIRE(minus_hamiltonian(f, paths[0]) != minus_hamiltonian(f, paths[1]));
  Path runaway = constant_path(100.0, 1.0, 0.05);
  REQUIRE_THROWS_AS(minus_hamiltonian(f, runaway), std::out_of_range);
}

TEST_CASE("partition function basics", "[polymer]") {
  const SpaceGrid grid = make_grid(-6.0, 0.1, 121);
  const FieldRealization f = sample_field(kRef, grid, 1.0, 0.05, 17);
  const auto paths = sample_paths(500, 1.0, 0.05, 18);

  SECTION("beta = 0 gives exactly one") {
    const LogMcEstimate z = partition_function(f, paths, 0.0);
    REQUIRE(z.log_mean == 0.0);
    REQUIRE(z.value() == 1.0);
  }
  SECTION("single path average is its own weight") {
    const std::vector<Path> one(paths.begin(), paths.begin() + 1);
    const LogMcEstimate z = partition_function(f, one, 2.0);
    REQUIRE(z.log_mean ==
            Approx(2.0 * minus_hamiltonian(f, one[0])).margin(1e-12));
  }
  SECTION("log-domain safety at beta = 10") {
    const LogMcEstimate z = partition_function(f, paths, 10.0);
    REQUIRE(std::isfinite(z.log_mean));
    REQUIRE(std::isfinite(z.rel_std_err));
  }
}

TEST_CASE("free energy: zero at beta 0, bounded by the annealed slope",
          "[polymer]") {
  REQUIRE(free_energy(kRef, 0.0, 2.0, 3, 50, 0.05, 4).value == 0.0);
  const FreeEnergyEstimate fe = free_energy(kRef, 0.7, 2.0, 120, 800, 0.05, 5);
  const double bound = 0.5 * 0.7 * 0.7 * kRef(0.0);
  REQUIRE(fe.value <= bound + 3.0 * fe.std_error);
}

TEST_CASE("free energy nondecreasing along dyadic horizons", "[polymer]") {
  // superadditivity of E log Z along t -> 2t, probed within error bars
  const double beta = 0.5;
  const FreeEnergyEstimate p2 = free_energy(kRef, beta, 2.0, 150, 3000, 0.05, 6);
  const FreeEnergyEstimate p4 = free_energy(kRef, beta, 4.0, 150, 3000, 0.05, 6);
  REQUIRE(p4.value >=
          p2.value - 3.0 * std::sqrt(p2.std_error * p2.std_error +
                                     p4.std_error * p4.std_error));
}

TEST_CASE("restricted partition: indicators, disjointness, support",
          "[polymer]") {
  const double t = 4.0, dt = 0.05;
  const BlockGeometry geom{t, 0.55, 3};
  const SpaceGrid grid = make_block_aligned_grid(geom, 0.1, 40);
  const FieldRealization f = sample_field(kRef, grid, t, dt, 21);
  const auto paths = sample_paths(2000, t, dt, 22);

  SECTION("beta = 0 recovers the empirical block probability") {
    const LogMcEstimate z0 = restricted_partition(f, paths, 0.0, geom, 0);
    std::size_t count = 0;
    for (const auto& p : paths) count += path_in_block(p, geom, 0) ? 1 : 0;
    REQUIRE(z0.value() == Approx(double(count) / double(paths.size())).margin(1e-12));
    REQUIRE(z0.support == count);
  }
  SECTION("blocks partition the total mass") {
    const double beta = 1.0;
    double restricted_sum = 0.0;
    for (int k = -3; k <= 3; ++k)
      restricted_sum += restricted_partition(f, paths, beta, geom, k).value();
    REQUIRE(restricted_sum <= partition_function(f, paths, beta).value() *
                                  (1.0 + 1e-12));
  }
  SECTION("unreachable block has zero support and value zero") {
    const LogMcEstimate far = restricted_partition(f, paths, 1.0, geom, 3);
    REQUIRE(far.support == 0);
    REQUIRE(far.low_support);
    REQUIRE(far.value() == 0.0);
  }
  SECTION("modified partition with zero correction is the restricted one") {
    const std::vector<double> zero(paths.size(), 0.0);
    const LogMcEstimate a = modified_partition(f, paths, 1.0, geom, 0, zero);
    const LogMcEstimate b = restricted_partition(f, paths, 1.0, geom, 0);
    REQUIRE(a.log_mean == b.log_mean);
  }
}

TEST_CASE("Gibbs ensemble expectations", "[polymer]") {
  const double t = 4.0, dt = 0.05;
  const BlockGeometry geom{t, 0.55, 2};
  const SpaceGrid grid = make_block_aligned_grid(geom, 0.1, 40);
  const FieldRealization f = sample_field(kRef, grid, t, dt, 31);
  const auto paths = sample_paths(3000, t, dt, 32);
  const GibbsEnsemble ens = make_gibbs_ensemble(f, paths, 1.0);

  SECTION("normalization") {
    const GibbsExpectation one = gibbs_expectation(ens, [](const Path&) { return 1.0; });
    REQUIRE(one.value == Approx(1.0).margin(1e-12));
    REQUIRE(ens.ess > 1.0);
  }
  SECTION("indicator identity against restricted estimators") {
    const GibbsExpectation outside = gibbs_expectation(ens, [&](const Path& p) {
      return path_in_block(p, geom, 0) ? 0.0 : 1.0;
    });
    const double z0 = restricted_partition(f, paths, 1.0, geom, 0).value();
    const double z = partition_function(f, paths, 1.0).value();
    REQUIRE(outside.value == Approx(1.0 - z0 / z).margin(1e-10));
  }
  SECTION("low ESS warning") {
    const GibbsEnsemble hot = make_gibbs_ensemble(f, paths, 10.0, 50.0);
    const GibbsExpectation g =
        gibbs_expectation(hot, [](const Path& p) { return p.sup_abs(); });
    REQUIRE(hot.ess < 50.0);
    REQUIRE(g.low_ess_warning);
  }
}

TEST_CASE("per-sample lower bound inequality on shared samples", "[polymer]") {
  // arithmetic identity of the estimators: <sup|b|>/t^{3/5-eps} >=
  // t^{eps/2} (1 - Z(0)/(Z(0)+Z(k))) for every k != 0, on the same sample
  const double t = 4.0, dt = 0.05, eps = 0.1, beta = 1.0;
  const BlockGeometry geom{t, 0.6 - eps / 2.0, 2};
  const SpaceGrid grid = make_block_aligned_grid(geom, 0.1, 60);
  const FieldRealization f = sample_field(kRef, grid, t, dt, 41);
  const auto paths = sample_paths(4000, t, dt, 42);
  const GibbsEnsemble ens = make_gibbs_ensemble(f, paths, beta);
  const double sup_mean =
      gibbs_expectation(ens, [](const Path& p) { return p.sup_abs(); }).value;
  const double lhs = sup_mean / std::pow(t, 0.6 - eps);
  const double z0 = restricted_partition(f, paths, beta, geom, 0).value();
  for (int k = -2; k <= 2; ++k) {
    if (k == 0) continue;
    const double zk = restricted_partition(f, paths, beta, geom, k).value();
    const double rhs = std::pow(t, eps / 2.0) * (1.0 - z0 / (z0 + zk));
    REQUIRE(lhs >= rhs - 1e-12);
  }
}

TEST_CASE("standard error halves when the sample doubles", "[polymer]") {
  const SpaceGrid grid = make_grid(-8.0, 0.1, 161);
  const FieldRealization f = sample_field(kRef, grid, 1.0, 0.05, 51);
  const auto paths = sample_paths(8000, 1.0, 0.05, 52);
  std::vector<double> se;
  for (std::size_t n : {1000u, 2000u, 4000u, 8000u}) {
    const std::vector<Path> subset(paths.begin(), paths.begin() + n);
    const LogMcEstimate z = partition_function(f, subset, 1.0);
    se.push_back(z.rel_std_err);
  }
  REQUIRE(se[3] < 0.55 * se[0]);
  REQUIRE(se[3] > 0.2 * se[0]);
}
