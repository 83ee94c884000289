#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "polylab/block_covariance.hpp"
#include "polylab/environment.hpp"
#include "polylab/kernel.hpp"
#include "polylab/polymer.hpp"

namespace polylab {

// Sequence over the truncated index set Z_M = {-M..M}, carrying the weighted
// l1 norm ||x||_{tau,k} = |x_k| + sum_{i != k} |x_i| |i-k|^tau.
struct WeightedVector {
  int trunc = 0;
  int center = 0;
  double tau = 0.5;
  std::vector<double> entries;  // index i stored at i + trunc

  WeightedVector() = default;
  WeightedVector(int M, int k, double tau_in)
      : trunc(M), center(k), tau(tau_in),
        entries(static_cast<std::size_t>(2 * M + 1), 0.0) {}

  double& at(int i) { return entries[static_cast<std::size_t>(i + trunc)]; }
  double at(int i) const { return entries[static_cast<std::size_t>(i + trunc)]; }
  int lo() const { return -trunc; }
  int hi() const { return trunc; }
};

inline double weighted_norm(const WeightedVector& x) {
  double s = std::fabs(x.at(x.center));
  for (int i = x.lo(); i <= x.hi(); ++i)
    if (i != x.center)
      s += std::fabs(x.at(i)) * std::pow(std::abs(i - x.center), x.tau);
  return s;
}

// eta_l = (1/2 t^alpha) int_{t/2}^t int_{I_l} W(ds,x) dx as exact discrete
// sums of increments, plus the rescaled eta~ = 2 t^{-(1-alpha)/2} eta whose
// covariance is C(t).
struct EtaVector {
  WeightedVector eta;
  WeightedVector eta_tilde;
};

inline EtaVector eta_blocks(const FieldRealization& field,
                            const BlockGeometry& geom, double tau = 0.5) {
  const std::size_t n_rows = field.n_rows();
  if (n_rows % 2 != 0)
    throw std::invalid_argument("eta_blocks: need an even number of time rows");
  EtaVector out{WeightedVector(geom.trunc, 0, tau),
                WeightedVector(geom.trunc, 0, tau)};
  const double t = field.t();
  const double norm = 1.0 / (2.0 * geom.block_scale());
  const double tilde_scale = 2.0 * std::pow(t, -(1.0 - geom.alpha) / 2.0);
  for (int l = -geom.trunc; l <= geom.trunc; ++l) {
    const auto [jb, je] = block_column_range(field.grid(), geom, l);
    double s = 0.0;
    for (std::size_t i = n_rows / 2; i < n_rows; ++i) {
      const double* row = field.row(i);
      double rs = 0.0;
      for (std::size_t j = jb; j < je; ++j) rs += row[j];
      s += rs;
    }
    const double eta = norm * s * field.grid().dx;
    out.eta.at(l) = eta;
    out.eta_tilde.at(l) = tilde_scale * eta;
  }
  return out;
}

// v_l = (2/t) int_{t/2}^t int_{I_l} Q(b_s - x) dx ds. The x-integral is exact
// via F (difference of two tail integrals); the s-integral is the
// left-endpoint Riemann sum on the path grid, matching the Hamiltonian
// discretization. Deterministic: no field realization involved.
inline WeightedVector v_vector(const Kernel& kernel, const BlockGeometry& geom,
                               const Path& path, int center = 0,
                               double tau = 0.5) {
  const std::size_t n_steps = path.n_steps();
  if (n_steps % 2 != 0)
    throw std::invalid_argument("v_vector: need an even number of time steps");
  WeightedVector v(geom.trunc, center, tau);
  const double t = path.t();
  for (int l = -geom.trunc; l <= geom.trunc; ++l) {
    const double lo = geom.block_lo(l);
    const double hi = geom.block_hi(l);
    double s = 0.0;
    for (std::size_t i = n_steps / 2; i < n_steps; ++i) {
      const double b = path.values[i];
      s += tail_integral(kernel, b - hi) - tail_integral(kernel, b - lo);
    }
    v.at(l) = (2.0 / t) * s * path.dt;
    if (!std::isfinite(v.at(l)))
      throw std::runtime_error("v_vector: non-finite quadrature");
  }
  return v;
}

// Upper estimate of the operator norm of A(t) = Id - lambda C(t) on l_{tau,k},
// via the two-term column-bound split: ||A|| <= 3 lambda S with
// S = max_j sum_{i != j} |C_ij| |i-j|^tau. An upper bound, not the exact norm.
inline double operator_weighted_norm(const BlockMatrix& C, double tau,
                                     int /*k*/ = 0) {
  return 3.0 * C.lambda() * C.weighted_offdiag_sum(tau);
}

struct DeltaSolution {
  WeightedVector v;
  WeightedVector delta;
  int neumann_terms = 0;
  double residual_norm = 0.0;
  double contraction_bound = 0.0;  // certified ||A||_{tau,k} upper bound
};

namespace detail {

inline std::vector<double> toeplitz_matvec(const BlockMatrix& C,
                                           const std::vector<double>& x) {
  const int M = C.trunc();
  std::vector<double> y(x.size(), 0.0);
  for (int i = -M; i <= M; ++i) {
    double s = 0.0;
    for (int j = -M; j <= M; ++j)
      s += C.entry(i, j) * x[static_cast<std::size_t>(j + M)];
    y[static_cast<std::size_t>(i + M)] = s;
  }
  return y;
}

}  // namespace detail

// delta = C^{-1} v by the Neumann series lambda sum_j A^j v, stopped when the
// certified term bound lambda ||A||^j ||v|| drops below the tolerance. The
// residual ||C delta - v||_{tau,k} is reported.
inline DeltaSolution delta_solve(const BlockMatrix& C, const WeightedVector& v,
                                 double tol = 1e-10) {
  if (v.trunc != C.trunc())
    throw std::invalid_argument("delta_solve: truncation mismatch");
  const double a_norm = operator_weighted_norm(C, v.tau, v.center);
  if (!(a_norm < 1.0))
    throw std::runtime_error(
        "delta_solve: ||A(t)|| bound >= 1 (no contraction); increase t or "
        "reduce the truncation M");
  const double lambda = C.lambda();
  const double v_norm = weighted_norm(v);
  const int M = C.trunc();
  const std::size_t n = v.entries.size();

  DeltaSolution sol;
  sol.v = v;
  sol.delta = WeightedVector(M, v.center, v.tau);
  sol.contraction_bound = a_norm;

  std::vector<double> term = v.entries;  // A^j v, j = 0
  std::vector<double> acc(n, 0.0);
  double term_bound = lambda * v_norm;
  int j = 0;
  while (true) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += term[i];
    ++j;
    term_bound *= a_norm;
    if (term_bound < tol || j > 10000) break;
    // A x = x - lambda C x, with zero diagonal handled by the identity part
    const std::vector<double> cx = detail::toeplitz_matvec(C, term);
    for (std::size_t i = 0; i < n; ++i) term[i] = term[i] - lambda * cx[i];
  }
  for (std::size_t i = 0; i < n; ++i) sol.delta.entries[i] = lambda * acc[i];
  sol.neumann_terms = j;

  const std::vector<double> cd = detail::toeplitz_matvec(C, sol.delta.entries);
  WeightedVector resid(M, v.center, v.tau);
  for (std::size_t i = 0; i < n; ++i) resid.entries[i] = cd[i] - v.entries[i];
  sol.residual_norm = weighted_norm(resid);
  return sol;
}

inline bool delta_bracket_ok(const DeltaSolution& sol, double d_lo, double d_hi) {
  const double dk = sol.delta.at(sol.delta.center);
  return dk >= d_lo && dk <= d_hi;
}

// X(W, b) = -H_t(b) - sum_j delta_j eta_j; independent of the eta family when
// delta solves C delta = v.
inline double independence_residual(const FieldRealization& field,
                                    const Path& path, const DeltaSolution& delta,
                                    const EtaVector& eta) {
  if (delta.delta.trunc != eta.eta.trunc)
    throw std::invalid_argument("independence_residual: truncation mismatch");
  double de = 0.0;
  for (int j = delta.delta.lo(); j <= delta.delta.hi(); ++j)
    de += delta.delta.at(j) * eta.eta.at(j);
  return minus_hamiltonian(field, path) - de;
}

inline double delta_eta_sum(const DeltaSolution& delta, const EtaVector& eta) {
  double de = 0.0;
  for (int j = delta.delta.lo(); j <= delta.delta.hi(); ++j)
    de += delta.delta.at(j) * eta.eta.at(j);
  return de;
}

// eta-check / eta-hat of the truncation step: the extremes of beta d eta over
// the bracket d in {d_lo, d_hi}.
inline double checked_eta0(const EtaVector& eta, double beta, double d_lo,
                           double d_hi) {
  return std::max(beta * d_lo * eta.eta.at(0), beta * d_hi * eta.eta.at(0));
}

inline double hat_eta(const EtaVector& eta, int l, double beta, double d_lo,
                      double d_hi) {
  return std::min(beta * d_lo * eta.eta.at(l), beta * d_hi * eta.eta.at(l));
}

}  // namespace polylab
