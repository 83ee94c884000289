// Prints the block covariance matrix collapse C(t) -> Id as the horizon
// grows, together with the contraction certificate used by the Neumann solve.

#include <cstdio>

#include "polylab/block_covariance.hpp"
#include "polylab/localization.hpp"

int main() {
  const polylab::Kernel kernel = polylab::make_polynomial4_kernel();
  std::printf("%10s %12s %12s %14s %14s\n", "t", "C00", "lambda-1", "C10",
              "||A|| bound");
  for (double t : {4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0}) {
    const polylab::BlockGeometry geom{t, 0.55, 8};
    const polylab::BlockMatrix C = polylab::covariance_matrix(kernel, geom);
    std::printf("%10.0f %12.8f %12.4e %14.6e %14.6e\n", t, C.entry(0, 0),
                C.lambda() - 1.0, C.entry(1, 0),
                polylab::operator_weighted_norm(C, 0.5));
  }
  return 0;
}
