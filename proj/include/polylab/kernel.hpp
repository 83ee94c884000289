#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polylab/config.hpp"
#include "polylab/quadrature.hpp"
#include "polylab/stats.hpp"

namespace polylab {

// Spatial covariance of the environment: symmetric, positive, nonincreasing on
// R+, integral 1, with a declared polynomial tail Q(x) <= c |x|^{-3-theta}
// beyond `tail_onset`.
struct Kernel {
  std::string name;
  std::function<double(double)> evaluate;
  double theta = 1.0;
  double tail_constant = 1.0;
  double tail_onset = 1.0;
  // Closed form of F(z) = int_z^inf Q, valid for z >= 0, when available.
  std::function<double(double)> tail_integral_closed_form;
  std::function<double(double)> spectral_density;
  double quad_tol = 1e-9;

  double operator()(double x) const { return evaluate(x); }
  bool has_closed_tail() const { return bool(tail_integral_closed_form); }
};

// F(z) = int_z^infinity Q(u) du. Negative arguments use F(-z) = 1 - F(z),
// which encodes the unit normalization of Remark-style kernels.
inline double tail_integral(const Kernel& kernel, double z) {
  if (z < 0.0) return 1.0 - tail_integral(kernel, -z);
  if (kernel.has_closed_tail()) return kernel.tail_integral_closed_form(z);
  const QuadResult r = integrate_semi_infinite(
      kernel.evaluate, z, kernel.tail_constant, 3.0 + kernel.theta,
      kernel.quad_tol);
  return r.value;
}

// Bound F(z) <= c' min(1, |z|^{-2-theta}) with c' derived from the declared
// tail constant; valid beyond the onset radius.
inline double tail_integral_bound(const Kernel& kernel, double z) {
  const double c_eff = kernel.tail_constant / (2.0 + kernel.theta);
  if (z <= kernel.tail_onset) return std::min(1.0, c_eff);
  return c_eff * std::pow(z, -(2.0 + kernel.theta));
}

struct HypothesisReport {
  bool symmetry_ok = true;
  bool positivity_ok = true;
  bool monotone_ok = true;
  bool normalization_ok = true;
  bool tail_ok = true;
  double normalization = 0.0;
  std::vector<double> symmetry_failures;
  std::vector<double> positivity_failures;
  std::vector<double> monotone_failures;
  std::vector<double> tail_failures;

  bool all_ok() const {
    return symmetry_ok && positivity_ok && monotone_ok && normalization_ok &&
           tail_ok;
  }
};

inline HypothesisReport check_hypothesis(const Kernel& kernel,
                                         const std::vector<double>& grid) {
  if (grid.empty())
    throw std::invalid_argument("check_hypothesis: empty grid");
  HypothesisReport rep;
  const double sym_tol = 1e-10;
  double prev_pos_x = -1.0, prev_pos_q = 0.0;
  for (double x : grid) {
    const double q = kernel(x);
    if (std::fabs(q - kernel(-x)) > sym_tol * std::max(1.0, std::fabs(q))) {
      rep.symmetry_ok = false;
      rep.symmetry_failures.push_back(x);
    }
    if (!(q > 0.0)) {
      rep.positivity_ok = false;
      rep.positivity_failures.push_back(x);
    }
    if (x >= 0.0) {
      if (prev_pos_x >= 0.0 && q > prev_pos_q + sym_tol) {
        rep.monotone_ok = false;
        rep.monotone_failures.push_back(x);
      }
      prev_pos_x = x;
      prev_pos_q = q;
    }
    if (std::fabs(x) >= kernel.tail_onset) {
      const double bound =
          kernel.tail_constant * std::pow(std::fabs(x), -(3.0 + kernel.theta));
      if (q > bound * (1.0 + 1e-10)) {
        rep.tail_ok = false;
        rep.tail_failures.push_back(x);
      }
    }
  }
  const double right =
      integrate_semi_infinite(kernel.evaluate, 0.0, kernel.tail_constant,
                              3.0 + kernel.theta, kernel.quad_tol)
          .value;
  const double left = integrate_semi_infinite(
                          [&kernel](double u) { return kernel(-u); }, 0.0,
                          kernel.tail_constant, 3.0 + kernel.theta,
                          kernel.quad_tol)
                          .value;
  rep.normalization = left + right;
  rep.normalization_ok = std::fabs(rep.normalization - 1.0) < 1e-6;
  return rep;
}

// Q(x) = (3/2)(1+|x|)^{-4}: theta = 1, and F(z) = (1/2)(1+z)^{-3} for z >= 0,
// so every downstream formula has an analytic oracle.
inline Kernel make_polynomial4_kernel() {
  Kernel k;
  k.name = "polynomial4";
  k.evaluate = [](double x) {
    const double d = 1.0 + std::fabs(x);
    return 1.5 / (d * d * d * d);
  };
  k.theta = 1.0;
  k.tail_constant = 1.5;
  k.tail_onset = 1.0;
  k.tail_integral_closed_form = [](double z) {
    const double d = 1.0 + z;
    return 0.5 / (d * d * d);
  };
  return k;
}

inline Kernel make_gaussian_kernel(double sigma = 1.0) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("gaussian kernel: sigma must be positive");
  Kernel k;
  k.name = "gaussian";
  k.evaluate = [sigma](double x) {
    return std::exp(-0.5 * x * x / (sigma * sigma)) /
           (sigma * 2.5066282746310005024);
  };
  k.theta = 1.0;
  // sup_{x>=1} x^4 Q(x) taken at x = 2 sigma; padded slightly.
  k.tail_constant =
      std::max(1.0, 16.0 * sigma * sigma * sigma * std::exp(-2.0) / 2.506628274631) *
      1.1;
  k.tail_onset = std::max(1.0, sigma);
  k.tail_integral_closed_form = [sigma](double z) {
    return normal_tail(z / sigma);
  };
  k.spectral_density = [sigma](double xi) {
    return std::exp(-0.5 * sigma * sigma * xi * xi) / (2.0 * M_PI);
  };
  return k;
}

inline Kernel kernel_by_name(const std::string& name) {
  if (name == "polynomial4") return make_polynomial4_kernel();
  if (name == "gaussian") return make_gaussian_kernel();
  throw std::invalid_argument("unknown kernel: " + name);
}

// Kernel from a config document: `kernel = <name>` plus optional overrides
// (sigma, theta, tail_constant, tail_onset, quad_tol).
inline Kernel kernel_from_config(const ConfigDoc& doc) {
  const auto name = doc.get("kernel");
  if (!name) throw std::invalid_argument("kernel config: missing 'kernel' key");
  Kernel k;
  if (*name == "gaussian")
    k = make_gaussian_kernel(doc.get_double("sigma").value_or(1.0));
  else
    k = kernel_by_name(*name);
  if (auto v = doc.get_double("theta")) k.theta = *v;
  if (auto v = doc.get_double("tail_constant")) k.tail_constant = *v;
  if (auto v = doc.get_double("tail_onset")) k.tail_onset = *v;
  if (auto v = doc.get_double("quad_tol")) k.quad_tol = *v;
  return k;
}

}  // namespace polylab
