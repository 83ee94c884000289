#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace polylab {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
inline double normal_tail(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / 2.5066282746310005024;
}

struct MeanVar {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;  // unbiased sample variance

  double std_error() const { return n > 1 ? std::sqrt(var / double(n)) : 0.0; }
};

inline MeanVar mean_var(std::span<const double> xs) {
  MeanVar out;
  out.n = xs.size();
  if (out.n == 0) return out;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= double(out.n);
  double s2 = 0.0;
  for (double x : xs) s2 += (x - m) * (x - m);
  out.mean = m;
  out.var = out.n > 1 ? s2 / double(out.n - 1) : 0.0;
  return out;
}

inline double sample_covariance(std::span<const double> xs,
                                std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("sample_covariance: need matched n >= 2");
  const double mx = mean_var(xs).mean;
  const double my = mean_var(ys).mean;
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += (xs[i] - mx) * (ys[i] - my);
  return s / double(xs.size() - 1);
}

inline double sample_correlation(std::span<const double> xs,
                                 std::span<const double> ys) {
  const double c = sample_covariance(xs, ys);
  const double vx = mean_var(xs).var;
  const double vy = mean_var(ys).var;
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return c / std::sqrt(vx * vy);
}

// Wilson score interval for a binomial proportion, z = 1.96 by default.
struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
  double point = 0.0;
};

inline WilsonInterval wilson_interval(std::size_t successes, std::size_t n,
                                      double z = 1.96) {
  WilsonInterval w;
  if (n == 0) return w;
  const double p = double(successes) / double(n);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / double(n);
  const double centre = (p + z2 / (2.0 * double(n))) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / double(n) + z2 / (4.0 * double(n) * double(n))) / denom;
  w.point = p;
  w.lo = std::max(0.0, centre - half);
  w.hi = std::min(1.0, centre + half);
  return w;
}

// Two-sided 97.5% Student-t quantiles; exponent fits have few points, so the
// normal 1.96 would understate the interval.
inline double t_quantile_975(std::size_t df) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571,
                                     2.447,  2.365, 2.306, 2.262, 2.228,
                                     2.201,  2.179, 2.160, 2.145, 2.131};
  if (df == 0) return 12.706;
  if (df <= 15) return table[df - 1];
  if (df <= 30) return 2.09;
  return 1.96;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double slope_ci_half = 0.0;  // 95% half-width (Student-t)
  std::size_t n = 0;

  double slope_lo() const { return slope - slope_ci_half; }
  double slope_hi() const { return slope + slope_ci_half; }
};

inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw std::invalid_argument("fit_line: need matched n >= 3");
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_line: degenerate xs");
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (f.intercept + f.slope * xs[i]);
    ssr += r * r;
  }
  const double s2 = ssr / double(n - 2);
  f.slope_stderr = std::sqrt(s2 / sxx);
  f.slope_ci_half = t_quantile_975(n - 2) * f.slope_stderr;
  return f;
}

inline LineFit fit_loglog(std::span<const double> xs, std::span<const double> ys) {
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0.0 || ys[i] <= 0.0)
      throw std::invalid_argument("fit_loglog: values must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  return fit_line(lx, ly);
}

// Kolmogorov distribution tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 lambda^2}.
inline double kolmogorov_tail(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * double(j) * double(j) * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value (Stephens'
// finite-sample correction in the argument).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n1 = a.size(), n2 = b.size();
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < n1 && j < n2) {
    const double x = std::min(a[i], b[j]);
    while (i < n1 && a[i] <= x) ++i;
    while (j < n2 && b[j] <= x) ++j;
    d = std::max(d, std::fabs(double(i) / double(n1) - double(j) / double(n2)));
  }
  const double ne = double(n1) * double(n2) / double(n1 + n2);
  const double sq = std::sqrt(ne);
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
  r.n1 = n1;
  r.n2 = n2;
  return r;
}

}  // namespace polylab
