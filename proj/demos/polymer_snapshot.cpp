// Samples one environment, reweights a Wiener ensemble into the polymer
// measure, and prints how the Gibbs weight concentrates and wanders.

#include <algorithm>
#include <cstdio>
#include <vector>

#include "polylab/polymer.hpp"

int main() {
  using namespace polylab;
  const Kernel kernel = make_polynomial4_kernel();
  const double t = 8.0, dt = 0.02, beta = 1.0;
  const BlockGeometry geom{t, 0.55, 4};
  const SpaceGrid grid = make_block_aligned_grid(geom, 0.05, 200);

  const FieldRealization field = sample_field(kernel, grid, t, dt, 7);
  const auto paths = sample_paths(5000, t, dt, 8);
  const GibbsEnsemble ens = make_gibbs_ensemble(field, paths, beta);

  const double sup_free = [&] {
    double s = 0.0;
    for (const auto& p : paths) s += p.sup_abs();
    return s / double(paths.size());
  }();
  const double sup_gibbs =
      gibbs_expectation(ens, [](const Path& p) { return p.sup_abs(); }).value;

  std::vector<double> w = ens.weights;
  std::sort(w.begin(), w.end(), std::greater<>());
  std::printf("t = %.0f, beta = %.1f, %zu paths\n", t, beta, paths.size());
  std::printf("free  <sup|b|> = %.3f\n", sup_free);
  std::printf("gibbs <sup|b|> = %.3f  (ESS %.0f)\n", sup_gibbs, ens.ess);
  std::printf("top weights: %.3f %.3f %.3f\n", w[0], w[1], w[2]);
  std::printf("log Z_t = %.3f\n", partition_function(field, paths, beta).log_mean);
  for (int k = -2; k <= 2; ++k) {
    const LogMcEstimate zk = restricted_partition(field, paths, beta, geom, k);
    std::printf("  Z(k=%+d)/Z = %.4f  (support %zu paths)\n", k,
                zk.is_zero() ? 0.0
                             : std::exp(zk.log_mean -
                                        partition_function(field, paths, beta)
                                            .log_mean),
                zk.support);
  }
  return 0;
}
