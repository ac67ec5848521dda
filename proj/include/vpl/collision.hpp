#pragma once

// Coulomb-Landau collision fields and the linearized operators.
//
// Discretization. With D the skew central difference and s = sqrt(mu), the
// shifted gradient in the frame of a field with twist tau is
//   G_a h = s D_a(h / s) - i k_a tau h,
// the discrete form of d_a h + v_a h = s d_a(h/s) (exact on polynomial
// multiples of s away from the boundary), and G* is its adjoint. The operators
//   A h = -G* (sigma G h)
//   K h =  G* (P^* sqrt(mu) Phi (*) (sqrt(mu) P G h)),  P = e^{-i k.v tau}
//   L h = -K h - A h = G* ([sigma - P^* sqrt(mu) Phi (*) sqrt(mu) P] G h)
// agree with the divergence forms of A and K in the continuum and
// make L exactly Hermitian positive semi-definite on the grid, with
// sigma = Phi (*) mu computed by the same discrete convolution.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "vpl/fft_convolution.hpp"
#include "vpl/grid.hpp"

namespace vpl {

/** @brief Phi_ij(z); at z = 0 the lattice-corrected zero-cell weight divided by h^3. */
inline std::array<std::array<double, 3>, 3> phi_kernel(const std::array<double, 3>& z, double cell = 0.0) {
  double r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
  if (r2 > 0.0) return phi_kernel_offaxis(z);
  std::array<std::array<double, 3>, 3> m{};
  if (cell > 0.0)
    for (int a = 0; a < 3; ++a) m[a][a] = (2.0 / 3.0) * cubic_lattice_coulomb_constant / cell;
  return m;
}

/**
 * @brief Precomputed collision coefficients on one grid.
 *
 * sigma holds the six independent components (xx, yy, zz, xy, xz, yz).
 */
struct CollisionFields {
  VelocityGrid grid;
  std::array<std::vector<double>, 6> sigma;
  std::array<std::vector<double>, 3> sigma_vec;  // sigma_ij v_j
  std::vector<double> lambda1;                   // along v
  std::vector<double> lambda2;                   // across v
  std::array<std::vector<double>, 3> div_sigma;  // d_i sigma_ij (index j)
  std::vector<double> div_sigma_vec;             // d_i sigma_i
  std::vector<double> sqrt_mu;
  std::shared_ptr<const KernelSpectrum> kernel;

  double s(int a, int b, std::size_t n) const { return sigma[sym_index(a, b)][n]; }
};

inline void finish_collision_fields(CollisionFields& cf) {
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  for (int a = 0; a < 3; ++a) cf.sigma_vec[a].assign(N3, 0.0);
  cf.lambda1.assign(N3, 0.0);
  cf.lambda2.assign(N3, 0.0);
  for (std::size_t n = 0; n < N3; ++n) {
    auto v = g.velocity(n);
    double r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    double quad = 0.0, tr = 0.0;
    for (int a = 0; a < 3; ++a) {
      double sv = 0.0;
      for (int b = 0; b < 3; ++b) sv += cf.s(a, b, n) * v[b];
      cf.sigma_vec[a][n] = sv;
      quad += sv * v[a];
      tr += cf.s(a, a, n);
    }
    cf.lambda1[n] = quad / r2;
    cf.lambda2[n] = 0.5 * (tr - cf.lambda1[n]);
  }
  std::vector<double> tmp(N3);
  for (int b = 0; b < 3; ++b) {
    cf.div_sigma[b].assign(N3, 0.0);
    for (int a = 0; a < 3; ++a) {
      boundary_derivative(cf.sigma[sym_index(a, b)].data(), tmp.data(), g.n, g.spacing, a);
      for (std::size_t n = 0; n < N3; ++n) cf.div_sigma[b][n] += tmp[n];
    }
  }
  cf.div_sigma_vec.assign(N3, 0.0);
  for (int a = 0; a < 3; ++a) {
    boundary_derivative(cf.sigma_vec[a].data(), tmp.data(), g.n, g.spacing, a);
    for (std::size_t n = 0; n < N3; ++n) cf.div_sigma_vec[n] += tmp[n];
  }
  cf.sqrt_mu = sqrt_mu_values(g);
}

/** @brief sigma_ij = Phi_ij (*) mu by zero-padded FFT convolution, plus derived fields. */
inline CollisionFields compute_sigma(const VelocityGrid& g) {
  CollisionFields cf;
  cf.grid = g;
  cf.kernel = build_kernel_spectrum(g);
  Field mu(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) mu[n] = std::exp(-speed2(g, n));
  auto t = convolve_scalar(*cf.kernel, mu.data());
  for (int c = 0; c < 6; ++c) {
    cf.sigma[c].resize(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) cf.sigma[c][n] = t[c][n].real();
  }
  finish_collision_fields(cf);
  return cf;
}

/**
 * @brief sigma_ij at an arbitrary point p, by the same lattice quadrature
 * (lattice through p with the grid spacing, same zero-cell weight).
 */
inline std::array<std::array<double, 3>, 3> sigma_at(const VelocityGrid& g, const std::array<double, 3>& p) {
  const double h = g.spacing, L = g.half_width;
  std::array<std::array<double, 3>, 3> out{};
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = int(std::ceil((p[a] - L) / h));
    hi[a] = int(std::floor((p[a] + L) / h));
  }
  for (int i = lo[0]; i <= hi[0]; ++i)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int l = lo[2]; l <= hi[2]; ++l) {
        std::array<double, 3> q{p[0] - i * h, p[1] - j * h, p[2] - l * h};
        double mu = std::exp(-(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]));
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) out[a][b] += kernel_weight(i, j, l, h, a, b) * mu;
      }
  return out;
}

// ---------------------------------------------------------------------------
// Shifted gradient and its adjoint
// ---------------------------------------------------------------------------

namespace detail {

/** @brief Per-axis twist shift k_a tau (zero in the lab frame). */
inline std::array<double, 3> twist_shift(const Mode& k, double tau) {
  return {k[0] * tau, k[1] * tau, k[2] * tau};
}

/** @brief G_a h = s D_a(h / s) - i k_a tau h for a = 1, 2, 3. */
inline void shifted_gradient(const CollisionFields& cf, const Field& h, const std::array<double, 3>& shift,
                             std::array<Field, 3>& out) {
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  Field q(N3);
  for (std::size_t n = 0; n < N3; ++n) q[n] = h[n] / cf.sqrt_mu[n];
  for (int a = 0; a < 3; ++a) {
    out[a].resize(N3);
    central_derivative(q.data(), out[a].data(), g.n, g.spacing, a);
    const cplx c(0.0, -shift[a]);
    for (std::size_t n = 0; n < N3; ++n) out[a][n] = out[a][n] * cf.sqrt_mu[n] + c * h[n];
  }
}

/** @brief G* X = sum_a [ -s^{-1} D_a(s X_a) + i k_a tau X_a ]. */
inline Field shifted_gradient_adjoint(const CollisionFields& cf, const std::array<Field, 3>& x,
                                      const std::array<double, 3>& shift) {
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  Field acc(N3, cplx(0.0)), q(N3), d(N3);
  for (int a = 0; a < 3; ++a) {
    for (std::size_t n = 0; n < N3; ++n) q[n] = x[a][n] * cf.sqrt_mu[n];
    central_derivative(q.data(), d.data(), g.n, g.spacing, a);
    for (std::size_t n = 0; n < N3; ++n) acc[n] += d[n];
  }
  Field out(N3);
  for (std::size_t n = 0; n < N3; ++n) {
    out[n] = -acc[n] / cf.sqrt_mu[n];
    for (int a = 0; a < 3; ++a)
      if (shift[a] != 0.0) out[n] += cplx(0.0, shift[a]) * x[a][n];
  }
  return out;
}

inline void check_cf(const ModeField& h, const CollisionFields& cf, const char* where) {
  check_same_grid(h.grid, cf.grid, where);
}

/** @brief sigma G, the local flux. */
inline std::array<Field, 3> sigma_times(const CollisionFields& cf, const std::array<Field, 3>& gr) {
  const std::size_t N3 = cf.grid.size();
  std::array<Field, 3> out;
  for (int a = 0; a < 3; ++a) out[a].resize(N3);
  const auto &sxx = cf.sigma[0], &syy = cf.sigma[1], &szz = cf.sigma[2];
  const auto &sxy = cf.sigma[3], &sxz = cf.sigma[4], &syz = cf.sigma[5];
  for (std::size_t n = 0; n < N3; ++n) {
    cplx a = gr[0][n], b = gr[1][n], c = gr[2][n];
    out[0][n] = sxx[n] * a + sxy[n] * b + sxz[n] * c;
    out[1][n] = sxy[n] * a + syy[n] * b + syz[n] * c;
    out[2][n] = sxz[n] * a + syz[n] * b + szz[n] * c;
  }
  return out;
}

/** @brief P^* sqrt(mu) Phi (*) (sqrt(mu) P G), the nonlocal flux. */
inline std::array<Field, 3> nonlocal_flux(const CollisionFields& cf, const Mode& k, double tau,
                                          const std::array<Field, 3>& gr) {
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  const bool twisted = tau != 0.0 && (k[0] != 0 || k[1] != 0 || k[2] != 0);
  std::vector<cplx> phase;
  if (twisted) {
    phase.resize(N3);
    for (std::size_t n = 0; n < N3; ++n) phase[n] = transport_phase(g, k, tau, n);
  }
  std::array<Field, 3> u;
  for (int a = 0; a < 3; ++a) {
    u[a].resize(N3);
    for (std::size_t n = 0; n < N3; ++n) u[a][n] = cf.sqrt_mu[n] * (twisted ? phase[n] * gr[a][n] : gr[a][n]);
  }
  auto w = convolve_vector(*cf.kernel, {u[0].data(), u[1].data(), u[2].data()});
  for (int a = 0; a < 3; ++a)
    for (std::size_t n = 0; n < N3; ++n)
      w[a][n] = cf.sqrt_mu[n] * (twisted ? std::conj(phase[n]) * w[a][n] : w[a][n]);
  return w;
}

inline ModeField wrap_result(const ModeField& like, Field values, const char* what) {
  ModeField out(like.grid, like.k, like.twist);
  out.values = std::move(values);
  check_finite(out, what);
  return out;
}

}  // namespace detail

/** @brief A h = d_i(sigma_ij d_j h) - sigma_ij v_i v_j h + d_i sigma_i h (discrete form above). */
inline ModeField apply_A(const ModeField& h, const CollisionFields& cf) {
  detail::check_cf(h, cf, "apply_A");
  auto c = detail::twist_shift(h.k, h.twist);
  std::array<Field, 3> gr;
  detail::shifted_gradient(cf, h.values, c, gr);
  auto flux = detail::sigma_times(cf, gr);
  Field out = detail::shifted_gradient_adjoint(cf, flux, c);
  for (auto& x : out) x = -x;
  return detail::wrap_result(h, std::move(out), "apply_A");
}

/** @brief K h = -mu^{-1/2} d_i{ mu Phi_ij (*) (sqrt(mu)(d_j h + v_j h)) } (discrete form above). */
inline ModeField apply_K(const ModeField& h, const CollisionFields& cf) {
  detail::check_cf(h, cf, "apply_K");
  auto c = detail::twist_shift(h.k, h.twist);
  std::array<Field, 3> gr;
  detail::shifted_gradient(cf, h.values, c, gr);
  auto flux = detail::nonlocal_flux(cf, h.k, h.twist, gr);
  return detail::wrap_result(h, detail::shifted_gradient_adjoint(cf, flux, c), "apply_K");
}

/** @brief L h = -K h - A h. */
inline ModeField apply_L(const ModeField& h, const CollisionFields& cf) {
  detail::check_cf(h, cf, "apply_L");
  auto c = detail::twist_shift(h.k, h.twist);
  std::array<Field, 3> gr;
  detail::shifted_gradient(cf, h.values, c, gr);
  auto local = detail::sigma_times(cf, gr);
  auto nonlocal = detail::nonlocal_flux(cf, h.k, h.twist, gr);
  for (int a = 0; a < 3; ++a)
    for (std::size_t n = 0; n < local[a].size(); ++n) local[a][n] -= nonlocal[a][n];
  return detail::wrap_result(h, detail::shifted_gradient_adjoint(cf, local, c), "apply_L");
}

/** @brief Fokker-Planck surrogate -Delta h + (|v|^2 - 3) h = G* G h. */
inline ModeField apply_fokker_planck(const ModeField& h, const CollisionFields& cf) {
  detail::check_cf(h, cf, "apply_fokker_planck");
  auto c = detail::twist_shift(h.k, h.twist);
  std::array<Field, 3> gr;
  detail::shifted_gradient(cf, h.values, c, gr);
  return detail::wrap_result(h, detail::shifted_gradient_adjoint(cf, gr, c), "apply_fokker_planck");
}

/**
 * @brief Gamma(g1, g2) = (d_i - v_i) J_i with
 * J_i = [Phi_ij (*) (sqrt(mu) g1)] d_j g2 - [Phi_ij (*) (sqrt(mu) d_j g1)] g2.
 *
 * This is the four-term bilinear form after the identity
 * Phi (*) (v_i sqrt(mu) g) = v_i Phi (*) (sqrt(mu) g); v is replaced by the
 * discrete log-derivative so that the mass invariant holds exactly. Fields are
 * materialized first; the result carries mode k1 + k2.
 */
inline ModeField apply_Gamma(const ModeField& g1_in, const ModeField& g2_in, const CollisionFields& cf) {
  detail::check_cf(g1_in, cf, "apply_Gamma");
  detail::check_cf(g2_in, cf, "apply_Gamma");
  ModeField g1 = materialize(g1_in), g2 = materialize(g2_in);
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  Field a(N3);
  for (std::size_t n = 0; n < N3; ++n) a[n] = cf.sqrt_mu[n] * g1.values[n];
  auto t = convolve_scalar(*cf.kernel, a.data());
  std::array<Field, 3> d1, d2;
  for (int b = 0; b < 3; ++b) {
    d1[b].resize(N3);
    d2[b].resize(N3);
    central_derivative(g1.values.data(), d1[b].data(), g.n, g.spacing, b);
    central_derivative(g2.values.data(), d2[b].data(), g.n, g.spacing, b);
    for (std::size_t n = 0; n < N3; ++n) d1[b][n] *= cf.sqrt_mu[n];
  }
  auto v = convolve_vector(*cf.kernel, {d1[0].data(), d1[1].data(), d1[2].data()});
  std::array<Field, 3> j;
  for (int i = 0; i < 3; ++i) {
    j[i].resize(N3);
    for (std::size_t n = 0; n < N3; ++n) {
      cplx s = 0.0;
      for (int b = 0; b < 3; ++b) s += t[sym_index(i, b)][n] * d2[b][n];
      j[i][n] = s - v[i][n] * g2.values[n];
    }
  }
  auto c = detail::twist_shift({0, 0, 0}, 0.0);
  Field out = detail::shifted_gradient_adjoint(cf, j, c);
  for (auto& x : out) x = -x;
  ModeField r(g, {g1.k[0] + g2.k[0], g1.k[1] + g2.k[1], g1.k[2] + g2.k[2]}, 0.0);
  r.values = std::move(out);
  check_finite(r, "apply_Gamma");
  return r;
}

/**
 * @brief Dissipation norm
 * ( int W^2 [d_i h sigma_ij conj(d_j h) + sigma_ij (v_i/2)(v_j/2) |h|^2] )^{1/2}
 * with W the velocity weight of spec and the central-difference derivative.
 */
inline double dissipation_norm(const ModeField& h, const WeightSpec& spec, const CollisionFields& cf) {
  detail::check_cf(h, cf, "dissipation_norm");
  WeightSpec s = spec.validated(h.grid);
  auto gr = twisted_gradient(h);
  const auto& g = h.grid;
  double acc = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    double q = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) q += cf.s(a, b, n) * (gr[a][n] * std::conj(gr[b][n])).real();
    double r2 = speed2(g, n);
    q += 0.25 * cf.lambda1[n] * r2 * std::norm(h.values[n]);
    if (!std::isfinite(q)) throw NumericalError("dissipation_norm: non-finite derivative values");
    acc += s.weight2(r2) * q;
  }
  return std::sqrt(std::max(acc, 0.0) * g.cell_volume());
}

/** @brief Null-space floor max_b ||L b|| / ||b|| over the five collision invariants. */
inline double null_space_floor(const CollisionFields& cf) {
  double f = 0.0;
  for (const auto& b : collision_invariants(cf.grid)) f = std::max(f, norm(apply_L(b, cf)) / norm(b));
  return f;
}

/**
 * @brief Diagonal of the local part G* Sigma G in the frame (k, tau), with
 * Sigma = sigma (Landau) or the identity (Fokker-Planck). Used as a Jacobi
 * preconditioner for implicit solves.
 */
inline std::vector<double> operator_diagonal(const CollisionFields& cf, const Mode& k, double tau, bool landau) {
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  const auto shift = detail::twist_shift(k, tau);
  const double inv_h2 = 1.0 / (g.spacing * g.spacing);
  std::vector<double> d(N3);
  for (std::size_t n = 0; n < N3; ++n) {
    auto ci = g.coords(n);
    double val = 0.0;
    for (int a = 0; a < 3; ++a) {
      const std::size_t st = axis_stride(g.n, a);
      const double va = g.node(ci[a]);
      for (int m = 1; m <= stencil_radius; ++m)
        for (int sign : {-1, 1}) {
          int j = ci[a] + sign * m;
          if (j < 0 || j >= g.n) continue;
          std::size_t nm = std::size_t(std::ptrdiff_t(n) + sign * m * std::ptrdiff_t(st));
          double vj = g.node(j);
          double ratio = std::exp(-0.5 * (vj * vj - va * va));
          double saa = landau ? cf.s(a, a, nm) : 1.0;
          val += saa * ratio * ratio * central_weights[m - 1] * central_weights[m - 1] * inv_h2;
        }
      for (int b = 0; b < 3; ++b) {
        double sab = landau ? cf.s(a, b, n) : (a == b ? 1.0 : 0.0);
        val += sab * shift[a] * shift[b];
      }
    }
    d[n] = val;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Binary cache of collision fields
// ---------------------------------------------------------------------------

/** @brief FNV-1a 64-bit hash of a byte range. */
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace vpl
