#pragma once

#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace polylab {

// Raised when the adaptive scheme cannot reach the requested absolute
// tolerance; carries the tolerance it did achieve.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved abs error ~" +
                           std::to_string(achieved) + ")"),
        achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes/weights (positive half; QUADPACK constants).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr double kGk15Weights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double kG7Weights[4] = {0.129484966168870, 0.279705391489277,
                                         0.381830050505119, 0.417959183673469};

template <typename F>
inline void gk15(const F& f, double a, double b, double& value, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double k15 = kGk15Weights[7] * fc;
  double g7 = kG7Weights[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kGk15Nodes[i];
    const double pair = f(c - dx) + f(c + dx);
    k15 += kGk15Weights[i] * pair;
    if (i % 2 == 1) g7 += kG7Weights[i / 2] * pair;
  }
  value = h * k15;
  err = std::fabs(h * (k15 - g7));
}

}  // namespace detail

// Adaptive bisection driven by the interval with the largest Kronrod-Gauss
// discrepancy. Absolute tolerance semantics.
template <typename F>
QuadResult integrate(const F& f, double a, double b, double abs_tol = 1e-9,
                     std::size_t max_intervals = 4000) {
  if (a == b) return {0.0, 0.0};
  struct Interval {
    double a, b, value, err;
    bool operator<(const Interval& o) const { return err < o.err; }
  };
  auto eval = [&f](double lo, double hi) {
    Interval iv{lo, hi, 0.0, 0.0};
    detail::gk15(f, lo, hi, iv.value, iv.err);
    return iv;
  };
  std::priority_queue<Interval> q;
  q.push(eval(a, b));
  double total_err = q.top().err;
  double total_val = q.top().value;
  std::size_t n_intervals = 1;
  while (total_err > abs_tol && n_intervals < max_intervals) {
    Interval worst = q.top();
    q.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      q.push(worst);  // interval at floating-point resolution
      break;
    }
    Interval left = eval(worst.a, mid);
    Interval right = eval(mid, worst.b);
    total_val += left.value + right.value - worst.value;
    total_err += left.err + right.err - worst.err;
    q.push(left);
    q.push(right);
    ++n_intervals;
  }
  if (total_err > abs_tol && total_err > 1e-12 * std::fabs(total_val))
    throw QuadratureError("quadrature did not converge", total_err);
  return {total_val, total_err};
}

// Integral of f over [z, infinity) for an integrand with a declared power
// tail |f(x)| <= c |x|^{-p}, p > 1. The cutoff R is chosen so the analytic
// remainder bound c R^{1-p}/(p-1) stays below half the tolerance.
template <typename F>
QuadResult integrate_semi_infinite(const F& f, double z, double tail_c,
                                   double tail_p, double abs_tol = 1e-9) {
  if (tail_p <= 1.0)
    throw std::invalid_argument("integrate_semi_infinite: tail power must be > 1");
  double r = std::max({std::fabs(z) + 1.0, 2.0});
  auto remainder = [&](double x) {
    return tail_c * std::pow(x, 1.0 - tail_p) / (tail_p - 1.0);
  };
  while (remainder(r) > 0.5 * abs_tol && r < 1e12) r *= 2.0;
  QuadResult body = integrate(f, z, r, 0.5 * abs_tol);
  body.error_estimate += remainder(r);
  return body;
}

}  // namespace polylab
