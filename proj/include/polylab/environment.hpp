#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "polylab/block_covariance.hpp"
#include "polylab/kernel.hpp"
#include "polylab/rng.hpp"
#include "polylab/stats.hpp"

namespace polylab {

struct SpaceGrid {
  double x0 = 0.0;
  double dx = 1.0;
  std::size_t n = 0;

  double x(std::size_t j) const { return x0 + double(j) * dx; }
  double x_max() const { return x0 + double(n - 1) * dx; }
  bool contains(double x) const { return x >= x0 && x <= x_max(); }
};

inline SpaceGrid make_grid(double x0, double dx, std::size_t n) {
  if (!(dx > 0.0) || n < 2)
    throw std::invalid_argument("make_grid: need dx > 0 and n >= 2");
  return SpaceGrid{x0, dx, n};
}

// Grid aligned with the block tiling: dx = 2 t^alpha / cols_per_block with
// cols_per_block even, x0 on the boundary lattice, extent covering all
// truncated blocks plus `margin_cols` on each side. Every block boundary then
// falls on a grid node and shifts by multiples of 2 t^alpha are exact column
// rolls.
inline SpaceGrid make_block_aligned_grid(const BlockGeometry& geom,
                                         double dx_target,
                                         std::size_t margin_cols = 0) {
  const double width = 2.0 * geom.block_scale();
  std::size_t cols_per_block =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(width / dx_target)));
  if (cols_per_block % 2 == 1) ++cols_per_block;
  const double dx = width / double(cols_per_block);
  const std::size_t n_blocks = static_cast<std::size_t>(geom.size());
  const std::size_t n = n_blocks * cols_per_block + 2 * margin_cols + 1;
  const double x0 = geom.block_lo(-geom.trunc) - double(margin_cols) * dx;
  return SpaceGrid{x0, dx, n};
}

// Column range [begin, end) of block l on an aligned grid; throws when the
// grid is not aligned with the block lattice or does not cover the block.
inline std::pair<std::size_t, std::size_t> block_column_range(
    const SpaceGrid& grid, const BlockGeometry& geom, int l) {
  const double lo = geom.block_lo(l);
  const double width = 2.0 * geom.block_scale();
  const double begin_f = (lo - grid.x0) / grid.dx;
  const double count_f = width / grid.dx;
  const long long begin = std::llround(begin_f);
  const long long count = std::llround(count_f);
  if (std::fabs(begin_f - double(begin)) > 1e-6 ||
      std::fabs(count_f - double(count)) > 1e-6)
    throw std::invalid_argument(
        "block_column_range: grid is not aligned with the block lattice");
  if (begin < 0 || begin + count > static_cast<long long>(grid.n))
    throw std::invalid_argument("block_column_range: grid does not cover block " +
                                std::to_string(l));
  return {static_cast<std::size_t>(begin),
          static_cast<std::size_t>(begin + count)};
}

// Piecewise-linear drift of the environment shift: h(s) = min(2s/t, 1) 2k t^a,
// or the constant 2k t^a when ramp is disabled.
struct ShiftProfile {
  int k = 0;
  double t = 1.0;
  double alpha = 0.55;
  bool ramp = true;

  double plateau() const { return 2.0 * double(k) * std::pow(t, alpha); }
  double h(double s) const {
    if (!ramp) return plateau();
    return std::min(2.0 * s / t, 1.0) * plateau();
  }
  static ShiftProfile ramped(int k, double t, double alpha) {
    return ShiftProfile{k, t, alpha, true};
  }
  static ShiftProfile constant(int k, double t, double alpha) {
    return ShiftProfile{k, t, alpha, false};
  }
};

// One realization of the environment: increments of W over time slabs
// ((i dt, (i+1) dt], x_j), white across rows, Q-correlated within a row.
class FieldRealization {
 public:
  FieldRealization(SpaceGrid grid, double dt, std::size_t n_rows,
                   std::uint64_t seed, std::string kernel_name)
      : grid_(grid),
        dt_(dt),
        n_rows_(n_rows),
        seed_(seed),
        kernel_name_(std::move(kernel_name)),
        incr_(n_rows * grid.n, 0.0) {}

  const SpaceGrid& grid() const { return grid_; }
  double dt() const { return dt_; }
  std::size_t n_rows() const { return n_rows_; }
  double t() const { return dt_ * double(n_rows_); }
  std::uint64_t seed() const { return seed_; }
  const std::string& kernel_name() const { return kernel_name_; }
  double row_time(std::size_t i) const { return dt_ * double(i); }

  double at(std::size_t i, std::size_t j) const {
    return incr_[i * grid_.n + j];
  }
  double& at(std::size_t i, std::size_t j) { return incr_[i * grid_.n + j]; }
  const double* row(std::size_t i) const { return incr_.data() + i * grid_.n; }
  double* row(std::size_t i) { return incr_.data() + i * grid_.n; }
  const std::vector<double>& data() const { return incr_; }
  std::vector<double>& data() { return incr_; }

  // Linear interpolation of row i at spatial point x.
  double value(std::size_t i, double x) const {
    const double u = (x - grid_.x0) / grid_.dx;
    if (u < 0.0 || u > double(grid_.n - 1))
      throw std::out_of_range("FieldRealization::value: x outside grid");
    std::size_t j = static_cast<std::size_t>(u);
    if (j >= grid_.n - 1) j = grid_.n - 2;
    const double w = u - double(j);
    const double* r = row(i);
    return (1.0 - w) * r[j] + w * r[j + 1];
  }

 private:
  SpaceGrid grid_;
  double dt_;
  std::size_t n_rows_;
  std::uint64_t seed_;
  std::string kernel_name_;
  std::vector<double> incr_;
};

namespace detail {

inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Eigenvalues of the circulant embedding of the stationary covariance
// c_j = Q(j dx): first row (c_0 .. c_{N/2}, mirrored), transformed in place.
struct CirculantEmbedding {
  std::size_t n_fft = 0;
  std::vector<double> sqrt_eigen;  // sqrt(lambda_k / n_fft), ready for synthesis
  double min_eigen = 0.0;
  double max_eigen = 0.0;
  bool nonneg = false;
};

inline CirculantEmbedding build_embedding(const Kernel& kernel,
                                          const SpaceGrid& grid) {
  std::size_t n_fft = 1;
  while (n_fft < 2 * (grid.n - 1)) n_fft <<= 1;
  n_fft <<= 1;  // padding improves positive definiteness of the embedding
  std::vector<double> in(2 * n_fft, 0.0), out(2 * n_fft, 0.0);
  for (std::size_t j = 0; j <= n_fft / 2; ++j) {
    const double q = kernel(double(j) * grid.dx);
    in[2 * j] = q;
    if (j != 0 && j != n_fft / 2) in[2 * (n_fft - j)] = q;
  }
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_plan plan = fftw_plan_dft_1d(
        static_cast<int>(n_fft), reinterpret_cast<fftw_complex*>(in.data()),
        reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }
  CirculantEmbedding emb;
  emb.n_fft = n_fft;
  emb.sqrt_eigen.resize(n_fft);
  double mn = out[0], mx = out[0];
  for (std::size_t j = 0; j < n_fft; ++j) {
    mn = std::min(mn, out[2 * j]);
    mx = std::max(mx, out[2 * j]);
  }
  emb.min_eigen = mn;
  emb.max_eigen = mx;
  emb.nonneg = mn > -1e-8 * std::max(mx, 1e-300);
  if (emb.nonneg)
    for (std::size_t j = 0; j < n_fft; ++j)
      emb.sqrt_eigen[j] = std::sqrt(std::max(0.0, out[2 * j]) / double(n_fft));
  return emb;
}

// Dense Cholesky of the Toeplitz row covariance; fallback when the embedding
// is indefinite. Lower-triangular factor, row-major.
inline std::vector<double> toeplitz_cholesky(const Kernel& kernel,
                                             const SpaceGrid& grid) {
  const std::size_t n = grid.n;
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      a[i * n + j] = kernel(double(i - j) * grid.dx);
  const double jitter = 1e-12 * kernel(0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j] + jitter;
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return {};
    const double s = std::sqrt(d);
    a[j * n + j] = s;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / s;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
  return a;
}

}  // namespace detail

struct SampleFieldOptions {
  bool force_dense = false;
};

// Synthesizes a realization of W on grid x [0, t]: each row is an independent
// stationary Gaussian vector with covariance dt * Q(x_j - x_j'), generated by
// circulant embedding (two rows per FFT: real and imaginary parts are
// independent), with a dense Cholesky fallback when the embedding fails.
// Deterministic in (kernel, grid, t, dt, seed).
inline FieldRealization sample_field(const Kernel& kernel, const SpaceGrid& grid,
                                     double t, double dt, std::uint64_t seed,
                                     const SampleFieldOptions& opts = {}) {
  if (!(dt > 0.0) || !(t > 0.0))
    throw std::invalid_argument("sample_field: t and dt must be positive");
  const double steps_f = t / dt;
  const std::size_t n_rows = static_cast<std::size_t>(std::llround(steps_f));
  if (n_rows == 0 || std::fabs(steps_f - double(n_rows)) > 1e-9 * steps_f)
    throw std::invalid_argument("sample_field: dt must divide t");

  FieldRealization field(grid, dt, n_rows, seed, kernel.name);
  const double scale = std::sqrt(dt);
  Rng rng(seed);

  detail::CirculantEmbedding emb;
  if (!opts.force_dense) emb = detail::build_embedding(kernel, grid);
  if (!opts.force_dense && emb.nonneg) {
    const std::size_t n_fft = emb.n_fft;
    std::vector<double> buf(2 * n_fft), out(2 * n_fft);
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(detail::fftw_mutex());
      plan = fftw_plan_dft_1d(static_cast<int>(n_fft),
                              reinterpret_cast<fftw_complex*>(buf.data()),
                              reinterpret_cast<fftw_complex*>(out.data()),
                              FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n_rows; i += 2) {
      for (std::size_t j = 0; j < n_fft; ++j) {
        buf[2 * j] = emb.sqrt_eigen[j] * rng.normal();
        buf[2 * j + 1] = emb.sqrt_eigen[j] * rng.normal();
      }
      fftw_execute(plan);
      double* r0 = field.row(i);
      for (std::size_t j = 0; j < grid.n; ++j) r0[j] = scale * out[2 * j];
      if (i + 1 < n_rows) {
        double* r1 = field.row(i + 1);
        for (std::size_t j = 0; j < grid.n; ++j) r1[j] = scale * out[2 * j + 1];
      }
    }
    {
      std::lock_guard<std::mutex> lock(detail::fftw_mutex());
      fftw_destroy_plan(plan);
    }
    return field;
  }

  const std::vector<double> chol = detail::toeplitz_cholesky(kernel, grid);
  if (chol.empty())
    throw std::runtime_error(
        "sample_field: circulant embedding indefinite and dense factorization "
        "failed for kernel '" +
        kernel.name + "' on grid [" + std::to_string(grid.x0) + ", " +
        std::to_string(grid.x_max()) + "], dx=" + std::to_string(grid.dx));
  const std::size_t n = grid.n;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) g[j] = rng.normal();
    double* r = field.row(i);
    for (std::size_t row = 0; row < n; ++row) {
      double v = 0.0;
      for (std::size_t kcol = 0; kcol <= row; ++kcol)
        v += chol[row * n + kcol] * g[kcol];
      r[row] = scale * v;
    }
  }
  return field;
}

// W^{k,t}: row i translated by h(s_i), s_i = i dt (left endpoint, matching the
// Hamiltonian discretization). The output grid is the sub-grid on which every
// shifted query stays inside the original extent. Shifts that are exact
// multiples of dx reduce to column rolls.
inline FieldRealization shift_environment(const FieldRealization& field,
                                          const ShiftProfile& profile) {
  const SpaceGrid& g = field.grid();
  double h_min = 0.0, h_max = 0.0;
  for (std::size_t i = 0; i < field.n_rows(); ++i) {
    const double h = profile.h(field.row_time(i));
    h_min = std::min(h_min, h);
    h_max = std::max(h_max, h);
  }
  const auto cols = [&](double h) {
    return static_cast<long long>(std::ceil(h / g.dx - 1e-9));
  };
  const long long drop_right = std::max<long long>(0, cols(h_max));
  const long long drop_left = std::max<long long>(0, cols(-h_min));
  if (drop_left + drop_right >= static_cast<long long>(g.n) - 1)
    throw std::invalid_argument(
        "shift_environment: grid extent too small for the requested shift");
  SpaceGrid out_grid{g.x0 + double(drop_left) * g.dx, g.dx,
                     g.n - static_cast<std::size_t>(drop_left + drop_right)};
  FieldRealization out(out_grid, field.dt(), field.n_rows(), field.seed(),
                       field.kernel_name());
  for (std::size_t i = 0; i < field.n_rows(); ++i) {
    const double h = profile.h(field.row_time(i));
    const double off = (out_grid.x0 - g.x0 + h) / g.dx;
    const long long base = static_cast<long long>(std::floor(off + 1e-9));
    const double frac = off - double(base);
    const double* src = field.row(i);
    double* dst = out.row(i);
    if (std::fabs(frac) < 1e-9) {
      for (std::size_t j = 0; j < out_grid.n; ++j)
        dst[j] = src[static_cast<std::size_t>(base + static_cast<long long>(j))];
    } else {
      for (std::size_t j = 0; j < out_grid.n; ++j) {
        const std::size_t s0 = static_cast<std::size_t>(base + static_cast<long long>(j));
        dst[j] = (1.0 - frac) * src[s0] + frac * src[s0 + 1];
      }
    }
  }
  return out;
}

struct LagCovariance {
  double lag = 0.0;
  double empirical = 0.0;
  double expected = 0.0;
  double std_error = 0.0;
  bool ok = true;
};

struct FieldCovarianceReport {
  std::vector<LagCovariance> lags;
  LagCovariance cross_row;  // white-in-time check, expected 0
  bool all_ok = true;
};

// Empirical covariance of synthesized increments at the requested space lags,
// pooled over rows and replicas, with 3-sigma flags against dt * Q(lag).
inline FieldCovarianceReport estimate_field_covariance(
    const Kernel& kernel, std::size_t n_replicas, const std::vector<double>& lags,
    const SpaceGrid& grid, double t, double dt, std::uint64_t seed) {
  if (n_replicas < 100)
    throw std::invalid_argument("estimate_field_covariance: need >= 100 replicas");
  const std::size_t j0 = grid.n / 4;
  std::vector<std::size_t> offsets;
  offsets.reserve(lags.size());
  for (double lag : lags) {
    const auto off = static_cast<std::size_t>(std::llround(lag / grid.dx));
    if (j0 + off >= grid.n)
      throw std::invalid_argument("estimate_field_covariance: lag beyond grid");
    offsets.push_back(off);
  }
  std::vector<std::vector<double>> products(lags.size());
  std::vector<double> cross;
  for (std::size_t r = 0; r < n_replicas; ++r) {
    FieldRealization f =
        sample_field(kernel, grid, t, dt, substream_seed(seed, r));
    for (std::size_t i = 0; i < f.n_rows(); ++i) {
      const double* row = f.row(i);
      for (std::size_t li = 0; li < offsets.size(); ++li)
        products[li].push_back(row[j0] * row[j0 + offsets[li]]);
      if (i + 1 < f.n_rows()) cross.push_back(row[j0] * f.row(i + 1)[j0]);
    }
  }
  FieldCovarianceReport rep;
  for (std::size_t li = 0; li < offsets.size(); ++li) {
    const MeanVar mv = mean_var(products[li]);
    LagCovariance lc;
    lc.lag = double(offsets[li]) * grid.dx;
    lc.empirical = mv.mean;
    lc.expected = dt * kernel(lc.lag);
    lc.std_error = mv.std_error();
    lc.ok = std::fabs(lc.empirical - lc.expected) <= 3.0 * lc.std_error;
    rep.all_ok = rep.all_ok && lc.ok;
    rep.lags.push_back(lc);
  }
  const MeanVar mv = mean_var(cross);
  rep.cross_row = {0.0, mv.mean, 0.0, mv.std_error(),
                   std::fabs(mv.mean) <= 3.0 * mv.std_error()};
  rep.all_ok = rep.all_ok && rep.cross_row.ok;
  return rep;
}

// --- binary cache ------------------------------------------------------------

// Layout: "PLWF", version u32, n_rows u64, n_cols u64, dt f64, dx f64, x0 f64,
// seed u64, kernel-name length u32 + bytes, then row-major f64, little-endian.
inline void save_field(const FieldRealization& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_field: cannot open " + path);
  const char magic[4] = {'P', 'L', 'W', 'F'};
  out.write(magic, 4);
  auto put = [&out](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  const std::uint32_t version = 1;
  const std::uint64_t n_rows = field.n_rows();
  const std::uint64_t n_cols = field.grid().n;
  const double dt = field.dt(), dx = field.grid().dx, x0 = field.grid().x0;
  const std::uint64_t seed = field.seed();
  const std::uint32_t name_len =
      static_cast<std::uint32_t>(field.kernel_name().size());
  put(&version, 4);
  put(&n_rows, 8);
  put(&n_cols, 8);
  put(&dt, 8);
  put(&dx, 8);
  put(&x0, 8);
  put(&seed, 8);
  put(&name_len, 4);
  put(field.kernel_name().data(), name_len);
  put(field.data().data(), field.data().size() * sizeof(double));
  if (!out) throw std::runtime_error("save_field: write failed for " + path);
}

inline FieldRealization load_field(const std::string& path);

// Deterministic cache name for one synthesis request.
inline std::string field_cache_name(const Kernel& kernel, const SpaceGrid& grid,
                                    double t, double dt, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ULL;
    }
  };
  auto mixd = [&mix](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    mix(bits);
  };
  for (char c : kernel.name) mix(static_cast<std::uint64_t>(c));
  mixd(grid.x0);
  mixd(grid.dx);
  mix(grid.n);
  mixd(t);
  mixd(dt);
  mix(seed);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string("plwf_") + buf + ".bin";
}

// sample_field with reuse through a cache directory; an existing cache file
// with matching parameters is loaded instead of re-synthesized.
inline FieldRealization sample_field_cached(const Kernel& kernel,
                                            const SpaceGrid& grid, double t,
                                            double dt, std::uint64_t seed,
                                            const std::string& cache_dir,
                                            const SampleFieldOptions& opts = {}) {
  if (cache_dir.empty()) return sample_field(kernel, grid, t, dt, seed, opts);
  const std::string path =
      cache_dir + "/" + field_cache_name(kernel, grid, t, dt, seed);
  {
    std::ifstream probe(path, std::ios::binary);
    if (probe) {
      FieldRealization f = load_field(path);
      if (f.seed() == seed && f.grid().n == grid.n && f.dt() == dt)
        return f;
    }
  }
  FieldRealization f = sample_field(kernel, grid, t, dt, seed, opts);
  save_field(f, path);
  return f;
}

inline FieldRealization load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_field: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PLWF", 4) != 0)
    throw std::runtime_error("load_field: bad magic in " + path);
  auto get = [&in, &path](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("load_field: truncated file " + path);
  };
  std::uint32_t version = 0, name_len = 0;
  std::uint64_t n_rows = 0, n_cols = 0, seed = 0;
  double dt = 0, dx = 0, x0 = 0;
  get(&version, 4);
  if (version != 1) throw std::runtime_error("load_field: unsupported version");
  get(&n_rows, 8);
  get(&n_cols, 8);
  get(&dt, 8);
  get(&dx, 8);
  get(&x0, 8);
  get(&seed, 8);
  get(&name_len, 4);
  std::string name(name_len, '\0');
  if (name_len) get(name.data(), name_len);
  FieldRealization field(SpaceGrid{x0, dx, n_cols}, dt, n_rows, seed, name);
  get(field.data().data(), field.data().size() * sizeof(double));
  return field;
}

}  // namespace polylab
