#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "polylab/experiments.hpp"
#include "polylab/rng.hpp"
#include "polylab/run.hpp"

using namespace polylab;

TEST_CASE("annuli family recursion and membership", "[experiments]") {
  SECTION("m=2, M=10") {
    const AnnuliFamily fam = annuli_family(2, 10);
    REQUIRE(fam.q_seq == std::vector<long long>{1, 3, 7});
    REQUIRE(fam.q_star == 4);
    REQUIRE(fam.sets.size() == 2);  // 7*{±1,±2} reaches 14, beyond Z_10
    REQUIRE(fam.sets[0] == std::vector<int>{-2, -1, 1, 2});
    REQUIRE(fam.sets[1] == std::vector<int>{-6, -3, 3, 6});
  }
  SECTION("exhaustive structural checks") {
    for (int m : {2, 4, 6}) {
      for (int M : {m, 3 * m, 50, 1000}) {
        const AnnuliFamily fam = annuli_family(m, M);
        std::set<int> seen;
        for (const auto& s : fam.sets) {
          for (int v : s) {
            REQUIRE(v != 0);
            REQUIRE(std::abs(v) <= M);       // subset of Z_M
            REQUIRE(seen.insert(v).second);  // pairwise disjoint
          }
          REQUIRE(s.size() == std::size_t(2 * m));
        }
        for (std::size_t q = 0; q + 1 < fam.q_seq.size(); ++q)
          REQUIRE(fam.q_seq[q + 1] == m * fam.q_seq[q] + 1);
      }
    }
  }
  SECTION("degenerate sizes give empty families, not errors") {
    const AnnuliFamily fam = annuli_family(4, 2);
    REQUIRE(fam.sets.empty());
    REQUIRE(fam.q_seq == std::vector<long long>{1});
  }
  SECTION("set membership scan") {
    // L = {±3, ±6} contains 3*{±1,±2} for m=2, M=10
    std::vector<char> in_l(21, 0);
    for (int v : {3, 6, -3, -6}) in_l[std::size_t(v + 10)] = 1;
    REQUIRE(contains_admissible_annulus(in_l, 10, 2));
    in_l[std::size_t(-6 + 10)] = 0;
    REQUIRE_FALSE(contains_admissible_annulus(in_l, 10, 2));
  }
}

TEST_CASE("phi bound integral", "[experiments]") {
  REQUIRE(phi_bound_integral(2, 0, 1.0) == Approx(0.5).margin(1e-10));
  double prev = 1.0;
  for (long long q0 : {1LL, 10LL, 100LL, 1000LL, 10000LL}) {
    const double v = phi_bound_integral(2, q0, 1.0);
    REQUIRE(v <= prev + 1e-14);
    prev = v;
  }
  REQUIRE(phi_bound_integral(2, 10000, 1.0) < 0.01);

  // Monte Carlo cross-check over the standard normal
  const double v = phi_bound_integral(2, 50, 1.0);
  Rng rng(17);
  const std::size_t n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    double h = 0.0;
    if (x > 0.0)
      h = std::exp(50.0 * std::log1p(-std::pow(normal_cdf(x), 4.0)));
    sum += h;
    sum2 += h * h;
  }
  const double mc = sum / double(n);
  const double se = std::sqrt((sum2 / double(n) - mc * mc) / double(n));
  REQUIRE(v == Approx(mc).margin(3.0 * se));
}

TEST_CASE("alpha thresholds", "[experiments]") {
  REQUIRE(threshold_alpha(1.0, false).alpha_max == 0.6);
  const ThresholdResult weak1 = threshold_alpha(1.0, true);
  REQUIRE(weak1.alpha_max == 0.6);  // 3/(7-2) = 3/5, consistency with strict
  REQUIRE(weak1.corollary_form == 0.6);
  REQUIRE(weak1.superdiffusive_guaranteed);

  const ThresholdResult boundary = threshold_alpha(0.5, true);
  REQUIRE(boundary.alpha_max == 0.5);
  REQUIRE_FALSE(boundary.superdiffusive_guaranteed);

  const ThresholdResult mid = threshold_alpha(0.75, true);
  REQUIRE(mid.alpha_max == Approx(3.0 / 5.5).margin(1e-15));
  REQUIRE_THROWS_AS(threshold_alpha(0.0, true), std::invalid_argument);
}

TEST_CASE("gaussian tail bound checks", "[experiments]") {
  const GaussianTailCheck rep = gaussian_tail_check({0.0, 0.5, 1.0, 3.0, 6.0});
  REQUIRE(rep.all_hold_beyond_onset);
  REQUIRE(rep.onset == 0.0);
  REQUIRE(normal_tail(1.0) == Approx(0.15865525393145705).margin(1e-12));
  REQUIRE(normal_tail(1.0) <= std::exp(-0.5));
  REQUIRE(normal_tail(3.0) <= std::exp(-4.5));
}

TEST_CASE("config validation is exhaustive", "[experiments]") {
  ExperimentConfig bad;
  bad.kernel_name = "nope";
  bad.alpha = 0.7;
  bad.rho = 0.5;  // (5/2)(0.7-0.6)+0.5 > 0 twice over
  bad.tau = 1.5;
  bad.m = 3;
  bad.t_list = {4.0};
  bad.n_paths = 0;
  const auto errors = validate_config(bad, true);
  REQUIRE(errors.size() >= 6);

  ExperimentConfig good;
  good.t_list = {2.0, 4.0, 8.0, 16.0};
  good.dt = 0.05;
  REQUIRE(validate_config(good, true).empty());

  // rho constraint enforced at load
  ExperimentConfig rho_bad = good;
  rho_bad.rho = 0.2;
  const auto rho_errors = validate_config(rho_bad, true);
  REQUIRE(rho_errors.size() == 1);
  REQUIRE(rho_errors.front().find("rho") != std::string::npos);
}

TEST_CASE("tau(t) threshold scale is deterministic and decreasing",
          "[experiments]") {
  double prev = 1e300;
  for (double t : {4.0, 8.0, 16.0, 32.0, 64.0}) {
    const double v = tau_of_t(t, 0.55, 0.05, 1.0);
    REQUIRE(v < prev);
    prev = v;
  }
}

TEST_CASE("sequential sampler agrees with one-shot reweighting where the "
          "latter is healthy", "[experiments]") {
  const Kernel kernel = kernel_by_name("polynomial4");
  const double t = 4.0, dt = 0.02, beta = 0.7;
  const BlockGeometry cover{t, 0.55, 3};
  const SpaceGrid grid = make_block_aligned_grid(cover, 0.05, 300);
  const FieldRealization field = sample_field(kernel, grid, t, dt, 4242);

  const auto paths = sample_paths(12000, t, dt, 777);
  const GibbsEnsemble ens = make_gibbs_ensemble(field, paths, beta);
  REQUIRE(ens.ess > 300.0);  // plain reweighting is trustworthy here
  const double plain =
      gibbs_expectation(ens, [](const Path& p) { return p.sup_abs(); }).value;

  const SmcEstimate smc = smc_gibbs_sup(field, beta, 12000, 50, 778);
  REQUIRE(smc.min_slab_ess > 2000.0);
  REQUIRE(smc.gibbs_sup == Approx(plain).epsilon(0.06));

  // and at beta = 0 the sequential scheme is plain Monte Carlo of sup|b|
  const SmcEstimate free = smc_gibbs_sup(field, 0.0, 12000, 50, 779);
  REQUIRE(free.min_slab_ess == Approx(12000.0));
  REQUIRE(free.log_z == Approx(0.0).margin(1e-12));
  const MeanVar control = [&] {
    std::vector<double> sups;
    for (const Path& p : sample_paths(12000, t, dt, 780)) sups.push_back(p.sup_abs());
    return mean_var(sups);
  }();
  REQUIRE(free.gibbs_sup == Approx(control.mean).margin(5.0 * control.std_error()));
}

TEST_CASE("exponent experiment at toy scale", "[experiments][slow]") {
  ExperimentConfig cfg;
  cfg.t_list = {1.0, 2.0, 4.0, 8.0};
  cfg.dt = 0.025;
  cfg.n_paths = 1500;
  cfg.n_fields = 24;
  cfg.trunc = 4;
  cfg.seed = 13;
  const ExponentReport rep = estimate_wandering_exponent(cfg);
  REQUIRE(rep.rungs.size() == 4);
  REQUIRE(rep.control_ok);  // beta = 0 control must bracket 1/2
  REQUIRE(rep.control_fit.slope == Approx(0.5).margin(0.05));
  for (const RungResult& r : rep.rungs) {
    REQUIRE(r.gibbs_sup_mean > 0.0);
    REQUIRE(r.event_a.point >= 0.0);
    REQUIRE(r.event_a.point <= 1.0);
    REQUIRE(r.mean_ess >= 1.0);
  }
  // determinism: same config, same numbers
  const ExponentReport rep2 = estimate_wandering_exponent(cfg);
  REQUIRE(rep2.fit.slope == rep.fit.slope);
  REQUIRE(rep2.rungs.back().gibbs_sup_mean == rep.rungs.back().gibbs_sup_mean);
}

TEST_CASE("event-A probability: degenerate trunc and beta zero oracle",
          "[experiments][slow]") {
  ExperimentConfig cfg;
  cfg.t_list = {4.0};
  cfg.dt = 0.025;
  cfg.n_paths = 4000;
  cfg.n_fields = 120;
  cfg.beta = 1.0;
  cfg.trunc = 3;
  cfg.seed = 77;
  const EventAReport rep = event_A_probability(cfg);
  REQUIRE(rep.rungs.size() == 1);
  const double p = rep.rungs[0].event_a.point;
  REQUIRE(p > 0.0);
  REQUIRE(p <= 1.0);

  // beta = 0: A_t happens iff some non-central block collects more paths than
  // the central one; brute-force recount with an independent implementation
  ExperimentConfig cfg0 = cfg;
  cfg0.beta = 0.0;
  const EventAReport rep0 = event_A_probability(cfg0);
  const auto paths = sample_paths(cfg.n_paths, 4.0, cfg.dt,
                                  substream_seed(cfg.seed, 1000 + 0));
  const BlockGeometry geom{4.0, cfg.alpha, rep0.rungs[0].m_eff};
  std::vector<std::size_t> counts(std::size_t(2 * geom.trunc + 1), 0);
  for (const auto& pth : paths)
    for (int k = -geom.trunc; k <= geom.trunc; ++k)
      if (path_in_block(pth, geom, k)) ++counts[std::size_t(k + geom.trunc)];
  const std::size_t c0 = counts[std::size_t(geom.trunc)];
  bool beats = false;
  for (int k = -geom.trunc; k <= geom.trunc; ++k)
    if (k != 0 && counts[std::size_t(k + geom.trunc)] > c0) beats = true;
  // at beta = 0 the event is field-independent: probability is 0 or 1
  REQUIRE(rep0.rungs[0].event_a.point == (beats ? 1.0 : 0.0));

  // trunc = 0 leaves no candidate block at all
  ExperimentConfig none = cfg;
  none.trunc = 0;
  none.n_fields = 5;
  none.n_paths = 200;
  REQUIRE(event_A_probability(none).rungs[0].event_a.point == 0.0);
}

TEST_CASE("f-hat probability machinery", "[experiments][slow]") {
  ExperimentConfig cfg;
  cfg.t_list = {16.0, 64.0};
  cfg.dt = 0.25;
  cfg.beta = 24.0;  // large beta shrinks tau(t), the asymptotic threshold
  cfg.m = 2;
  cfg.trunc = 40;
  cfg.n_fields = 150;
  cfg.n_paths = 1;
  cfg.seed = 99;
  const FHatReport rep = f_hat_probability(cfg);
  REQUIRE(rep.tau_decreasing);
  REQUIRE(rep.d_estimated);
  REQUIRE(rep.d_lo > 0.0);
  REQUIRE(rep.d_lo < rep.d_hi);
  for (const FHatRung& r : rep.rungs) {
    REQUIRE(r.target == Approx(0.5));
    REQUIRE(r.probability.point >= 0.0);
    REQUIRE(r.probability.point <= 1.0);
  }
  // the majorant P(F-hat) >= 1 - 1/m is reached at the large-t, large-beta
  // rung (tau(t) small); the Wilson band supplies the 3-sigma slack
  const FHatRung& big = rep.rungs.back();
  REQUIRE(big.probability.point >=
          big.target - 3.0 * std::sqrt(big.target * (1.0 - big.target) /
                                       double(cfg.n_fields)));
  REQUIRE(big.meets_target);
  // degenerate M < m: empty family, probability exactly 0
  ExperimentConfig degenerate = cfg;
  degenerate.trunc = 1;
  degenerate.m = 4;
  degenerate.t_list = {16.0};
  degenerate.n_fields = 20;
  const FHatReport rep_d = f_hat_probability(degenerate);
  REQUIRE(rep_d.rungs[0].probability.point == 0.0);

  // M sweep reports the smallest truncation that reaches the target
  ExperimentConfig sweep = cfg;
  sweep.t_list = {64.0};
  sweep.trunc_list = {4, 16, 40};
  sweep.n_fields = 80;
  const FHatReport rep_s = f_hat_probability(sweep);
  REQUIRE(rep_s.rungs.size() == 3);
  REQUIRE(rep_s.smallest_passing_trunc.has_value());
  REQUIRE(*rep_s.smallest_passing_trunc <= 40);
}

TEST_CASE("run orchestration: csv, manifest, bit-identical rerun",
          "[experiments][slow]") {
  const ConfigDoc doc = ConfigDoc::parse(
      "experiment = event-a\n"
      "kernel = polynomial4\n"
      "t_list = 2, 4\n"
      "dt = 0.05\n"
      "n_paths = 500\n"
      "n_fields = 10\n"
      "trunc = 3\n"
      "seed = 5\n"
      "out = toy_run\n");
  const RunArtifacts art = run_experiment(doc);
  REQUIRE(art.experiment == "event-a");
  REQUIRE(art.csv_text.find("t,beta,alpha,estimator,value,stderr") == 0);
  REQUIRE(art.csv_text.find("event_a_prob") != std::string::npos);
  REQUIRE(art.manifest.at("config_hash").get<std::uint64_t>() == config_hash(doc));

  const RunArtifacts again = rerun_from_manifest(art.manifest);
  REQUIRE(again.csv_text == art.csv_text);

  // validation failures are listed exhaustively
  const ConfigDoc bad = ConfigDoc::parse(
      "experiment = exponent\n"
      "kernel = unknown-kernel\n"
      "t_list = 4\n");
  try {
    (void)run_experiment(bad);
    FAIL("expected validation failure");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("unknown kernel") != std::string::npos);
    REQUIRE(msg.find(">= 4 points") != std::string::npos);
  }
}
