#pragma once

// Zero-padded FFT convolution with the Landau kernel on the velocity grid.

#include <fftw3.h>

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "vpl/grid.hpp"

namespace vpl {

namespace detail {

struct FftPlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

/** @brief In-place 3-D plans for an m^3 complex array, created once per size. */
inline const FftPlanPair& plans_for(int m) {
  static std::mutex mutex;
  static std::map<int, FftPlanPair> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  std::size_t len = std::size_t(m) * m * m;
  auto* tmp = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * len));
  if (!tmp) throw NumericalError("FFT size overflow: cannot allocate work array");
  FftPlanPair p;
  p.forward = fftw_plan_dft_3d(m, m, m, tmp, tmp, FFTW_FORWARD, FFTW_ESTIMATE);
  p.backward = fftw_plan_dft_3d(m, m, m, tmp, tmp, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(tmp);
  if (!p.forward || !p.backward) throw NumericalError("FFTW planning failed");
  return cache.emplace(m, p).first->second;
}

/** @brief Aligned complex buffer owned by the calling thread. */
struct FftBuffer {
  fftw_complex* data = nullptr;
  std::size_t len = 0;
  FftBuffer() = default;
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
  ~FftBuffer() {
    if (data) fftw_free(data);
  }
  void reserve(std::size_t n) {
    if (n == len) return;
    if (data) fftw_free(data);
    data = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!data) throw NumericalError("FFT size overflow: cannot allocate work array");
    len = n;
  }
  cplx* ptr() { return reinterpret_cast<cplx*>(data); }
};

/** @brief Per-thread scratch (never shared between threads). */
inline std::array<FftBuffer, 3>& thread_buffers() {
  thread_local std::array<FftBuffer, 3> bufs;
  return bufs;
}

}  // namespace detail

/** @brief Symmetric-tensor component index for (a, b): xx, yy, zz, xy, xz, yz. */
inline constexpr int sym_index(int a, int b) {
  if (a == b) return a;
  int lo = a < b ? a : b, hi = a < b ? b : a;
  return lo == 0 ? (hi == 1 ? 3 : 4) : 5;
}

/**
 * @brief Madelung-type constant of the simple cubic lattice for 1/|z|.
 *
 * h^3 sum_{m != 0} f(mh)/|mh| + C h^2 f(0) integrates f/|z| with an error of
 * higher order than the plain cell-average correction.
 */
inline constexpr double cubic_lattice_coulomb_constant = 2.8372974794806;

/** @brief The Landau kernel Phi_ij(z) = |z|^{-1}(delta_ij - z_i z_j/|z|^2) away from 0. */
inline std::array<std::array<double, 3>, 3> phi_kernel_offaxis(const std::array<double, 3>& z) {
  double r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
  double r = std::sqrt(r2);
  std::array<std::array<double, 3>, 3> m{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m[a][b] = ((a == b ? 1.0 : 0.0) - z[a] * z[b] / r2) / r;
  return m;
}

/**
 * @brief Quadrature weight of the kernel on lattice displacement m (integer
 * vector) for spacing h: h^3 Phi(mh) off the origin, and the isotropic
 * lattice correction (2/3) C h^2 delta_ij at the origin.
 */
inline double kernel_weight(int m0, int m1, int m2, double h, int a, int b) {
  if (m0 == 0 && m1 == 0 && m2 == 0) return a == b ? (2.0 / 3.0) * cubic_lattice_coulomb_constant * h * h : 0.0;
  std::array<double, 3> z{m0 * h, m1 * h, m2 * h};
  double r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
  double r = std::sqrt(r2);
  return h * h * h * ((a == b ? 1.0 : 0.0) - z[a] * z[b] / r2) / r;
}

/** @brief Transform of the kernel on the (2N)^3 padded grid (real by evenness). */
struct KernelSpectrum {
  int n = 0;
  int m = 0;
  std::array<std::vector<double>, 6> hat;  // normalized by 1/m^3
};

inline std::shared_ptr<const KernelSpectrum> build_kernel_spectrum(const VelocityGrid& g) {
  auto ks = std::make_shared<KernelSpectrum>();
  ks->n = g.n;
  ks->m = 2 * g.n;
  const int m = ks->m;
  const std::size_t len = std::size_t(m) * m * m;
  const auto& plans = detail::plans_for(m);
  detail::FftBuffer buf;
  buf.reserve(len);
  cplx* b = buf.ptr();
  auto wrap = [m](int i) { return i < m / 2 ? i : i - m; };
  for (int a = 0; a < 3; ++a) {
    for (int c = a; c < 3; ++c) {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          for (int l = 0; l < m; ++l)
            b[(std::size_t(i) * m + j) * m + l] = kernel_weight(wrap(i), wrap(j), wrap(l), g.spacing, a, c);
      fftw_execute_dft(plans.forward, buf.data, buf.data);
      auto& out = ks->hat[sym_index(a, c)];
      out.resize(len);
      const double scale = 1.0 / double(len);
      for (std::size_t q = 0; q < len; ++q) out[q] = b[q].real() * scale;
    }
  }
  return ks;
}

namespace detail {

inline void pad_into(const cplx* src, cplx* dst, int n, int m) {
  std::fill(dst, dst + std::size_t(m) * m * m, cplx(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx* s = src + (std::size_t(i) * n + j) * n;
      cplx* d = dst + (std::size_t(i) * m + j) * m;
      std::copy(s, s + n, d);
    }
}

inline void extract_from(const cplx* src, cplx* dst, int n, int m) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx* s = src + (std::size_t(i) * m + j) * m;
      cplx* d = dst + (std::size_t(i) * n + j) * n;
      std::copy(s, s + n, d);
    }
}

}  // namespace detail

/**
 * @brief W_i = sum_j Phi_ij (*) U_j for three complex grid arrays (aperiodic
 * discrete convolution, exact via padding to 2N per axis).
 */
inline std::array<Field, 3> convolve_vector(const KernelSpectrum& ks, const std::array<const cplx*, 3>& u) {
  const int n = ks.n, m = ks.m;
  const std::size_t len = std::size_t(m) * m * m, n3 = std::size_t(n) * n * n;
  const auto& plans = detail::plans_for(m);
  auto& bufs = detail::thread_buffers();
  for (auto& b : bufs) b.reserve(len);
  for (int j = 0; j < 3; ++j) {
    detail::pad_into(u[j], bufs[j].ptr(), n, m);
    fftw_execute_dft(plans.forward, bufs[j].data, bufs[j].data);
  }
  // In place: (W_0, W_1, W_2) = Khat (U_0, U_1, U_2) per frequency.
  cplx* u0 = bufs[0].ptr();
  cplx* u1 = bufs[1].ptr();
  cplx* u2 = bufs[2].ptr();
  const double *kxx = ks.hat[0].data(), *kyy = ks.hat[1].data(), *kzz = ks.hat[2].data();
  const double *kxy = ks.hat[3].data(), *kxz = ks.hat[4].data(), *kyz = ks.hat[5].data();
  for (std::size_t q = 0; q < len; ++q) {
    cplx a = u0[q], b = u1[q], c = u2[q];
    u0[q] = kxx[q] * a + kxy[q] * b + kxz[q] * c;
    u1[q] = kxy[q] * a + kyy[q] * b + kyz[q] * c;
    u2[q] = kxz[q] * a + kyz[q] * b + kzz[q] * c;
  }
  std::array<Field, 3> w;
  for (int i = 0; i < 3; ++i) {
    fftw_execute_dft(plans.backward, bufs[i].data, bufs[i].data);
    w[i].resize(n3);
    detail::extract_from(bufs[i].ptr(), w[i].data(), n, m);
  }
  return w;
}

/** @brief T_ij = Phi_ij (*) u for one complex array (six components). */
inline std::array<Field, 6> convolve_scalar(const KernelSpectrum& ks, const cplx* u) {
  const int n = ks.n, m = ks.m;
  const std::size_t len = std::size_t(m) * m * m, n3 = std::size_t(n) * n * n;
  const auto& plans = detail::plans_for(m);
  auto& bufs = detail::thread_buffers();
  for (auto& b : bufs) b.reserve(len);
  detail::pad_into(u, bufs[0].ptr(), n, m);
  fftw_execute_dft(plans.forward, bufs[0].data, bufs[0].data);
  std::array<Field, 6> out;
  for (int c = 0; c < 6; ++c) {
    cplx* src = bufs[0].ptr();
    cplx* dst = bufs[1].ptr();
    const double* kh = ks.hat[c].data();
    for (std::size_t q = 0; q < len; ++q) dst[q] = kh[q] * src[q];
    fftw_execute_dft(plans.backward, bufs[1].data, bufs[1].data);
    out[c].resize(n3);
    detail::extract_from(dst, out[c].data(), n, m);
  }
  return out;
}

}  // namespace vpl
