#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "polylab/kernel.hpp"
#include "polylab/quadrature.hpp"

namespace polylab {

// Spatial discretization: blocks I_k = t^alpha [2k-1, 2k+1) for |k| <= trunc.
struct BlockGeometry {
  double t = 1.0;
  double alpha = 0.55;
  int trunc = 16;

  double block_scale() const { return std::pow(t, alpha); }
  double block_lo(int k) const { return block_scale() * (2.0 * k - 1.0); }
  double block_hi(int k) const { return block_scale() * (2.0 * k + 1.0); }
  bool in_block(int k, double x) const {
    return x >= block_lo(k) && x < block_hi(k);
  }
  int size() const { return 2 * trunc + 1; }
};

// alpha must sit strictly inside (1/2, 3/5); the weakened-hypothesis regimes
// may push it down to 1/2, hence the override.
inline BlockGeometry make_block_geometry(double t, double alpha, int trunc,
                                         bool allow_alpha_override = false) {
  if (!(t > 0.0)) throw std::invalid_argument("block geometry: t must be > 0");
  if (trunc < 0) throw std::invalid_argument("block geometry: trunc < 0");
  if (!allow_alpha_override && !(alpha > 0.5 && alpha < 0.6))
    throw std::invalid_argument(
        "block geometry: alpha must lie in (1/2, 3/5); pass the override for "
        "wide-alpha experiments");
  if (allow_alpha_override && !(alpha > 0.0))
    throw std::invalid_argument("block geometry: alpha must be positive");
  return BlockGeometry{t, alpha, trunc};
}

// C_{l,k}(t) = (1/2 t^alpha) int_{I_k} int_{I_l} Q(x-y) dx dy, evaluated by
// the single-integral form (1/2 t^alpha) int [F(z) - F(z + 2 t^alpha)] dz over
// z in [(2d-2) t^alpha, 2d t^alpha], d = |l-k|. Same value as the stated
// difference of two F integrals, without the cancellation.
inline double block_covariance_lag(const Kernel& kernel,
                                   const BlockGeometry& geom, int lag) {
  const double s = geom.block_scale();
  const double d = std::abs(lag);
  auto integrand = [&](double z) {
    return tail_integral(kernel, z) - tail_integral(kernel, z + 2.0 * s);
  };
  const QuadResult r = integrate(integrand, (2.0 * d - 2.0) * s, 2.0 * d * s,
                                 kernel.quad_tol);
  const double value = r.value / (2.0 * s);
  if (!std::isfinite(value))
    throw std::runtime_error("block_covariance: non-finite quadrature");
  return value;
}

inline double block_covariance(const Kernel& kernel, const BlockGeometry& geom,
                               int l, int k) {
  if (std::abs(l) > geom.trunc || std::abs(k) > geom.trunc)
    throw std::invalid_argument("block_covariance: index beyond truncation");
  return block_covariance_lag(kernel, geom, l - k);
}

// Covariance of the rescaled block averages, stored as its first Toeplitz row,
// with lambda = 1/C_{0,0} and the off-diagonal contraction A(t) = Id - lambda C.
class BlockMatrix {
 public:
  BlockMatrix(BlockGeometry geom, std::vector<double> first_row, double lambda)
      : geom_(geom), first_row_(std::move(first_row)), lambda_(lambda) {}

  const BlockGeometry& geom() const { return geom_; }
  int trunc() const { return geom_.trunc; }
  double lambda() const { return lambda_; }

  // C_{l,k}; indices in [-trunc, trunc].
  double entry(int l, int k) const {
    const int d = std::abs(l - k);
    return first_row_.at(static_cast<std::size_t>(d));
  }

  // A(t)_{l,k} = (Id - lambda C)_{l,k}; zero diagonal by construction.
  double a_entry(int l, int k) const {
    return l == k ? 0.0 : -lambda_ * entry(l, k);
  }

  const std::vector<double>& first_row() const { return first_row_; }

  std::vector<std::vector<double>> dense() const {
    const int n = geom_.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m[i][j] = entry(i - geom_.trunc, j - geom_.trunc);
    return m;
  }

  // max_j sum_{i != j} |C_{ij}| |i-j|^tau over the truncated window.
  double weighted_offdiag_sum(double tau) const {
    const int M = geom_.trunc;
    double best = 0.0;
    for (int j = -M; j <= M; ++j) {
      double s = 0.0;
      for (int i = -M; i <= M; ++i)
        if (i != j)
          s += std::fabs(entry(i, j)) * std::pow(std::abs(i - j), tau);
      best = std::max(best, s);
    }
    return best;
  }

 private:
  BlockGeometry geom_;
  std::vector<double> first_row_;
  double lambda_;
};

// Fills C(t) by Toeplitz structure: one quadrature per distinct lag.
inline BlockMatrix covariance_matrix(const Kernel& kernel,
                                     const BlockGeometry& geom) {
  if (geom.trunc < 1)
    throw std::invalid_argument("covariance_matrix: trunc must be >= 1");
  std::vector<double> row(static_cast<std::size_t>(2 * geom.trunc + 1));
  for (int d = 0; d <= 2 * geom.trunc; ++d)
    row[static_cast<std::size_t>(d)] = block_covariance_lag(kernel, geom, d);
  if (!(row[0] > 0.0))
    throw std::runtime_error(
        "covariance_matrix: C_{0,0} <= 0, kernel is not an admissible "
        "covariance");
  return BlockMatrix(geom, std::move(row), 1.0 / row[0]);
}

}  // namespace polylab
