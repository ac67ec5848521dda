#pragma once

// Density Volterra equation rho + K * rho = N for one Fourier mode: the
// kernel, its Laplace transform and Penrose margin, the resolvent kernel, and
// three independent routes to rho(t).

#include <fftw3.h>

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vpl/collision.hpp"
#include "vpl/grid.hpp"
#include "vpl/semigroup.hpp"
#include "vpl/series.hpp"

namespace vpl {

/** @brief Sampled K_k(t) with run metadata. */
struct KernelSeries {
  Mode k{1, 0, 0};
  double nu = 0.0;
  TimeSeries series;
  double imag_residue = 0.0;  // max |Im K| / max |K| removed by realness enforcement
  std::string scheme = "strang-cn";
};

/** @brief rho(t) with the route that produced it. */
struct DensitySolution {
  TimeSeries rho;
  TimeSeries forcing;
  std::string provenance;  // volterra | resolvent | direct-pde
};

/** @brief The nu = 0 kernel pi^{3/2} t e^{-|k|^2 t^2 / 4}. */
inline double analytic_kernel_vp(const Mode& k, double t) {
  const double k2 = mode_norm2(k);
  if (k2 == 0.0) throw ConfigError("analytic_kernel_vp requires k != 0");
  return std::pow(pi, 1.5) * t * std::exp(-0.25 * k2 * t * t);
}

/** @brief The field (k.v) sqrt(mu) on mode k. */
inline ModeField k_dot_v_sqrt_mu(const VelocityGrid& g, const Mode& k) {
  return sample_field(
      g,
      [&](double a, double b, double c) { return (k[0] * a + k[1] * b + k[2] * c) * std::exp(-0.5 * (a * a + b * b + c * c)); },
      k);
}

// ---------------------------------------------------------------------------
// Density propagation
// ---------------------------------------------------------------------------

/**
 * @brief Representation used to propagate a mode when only its density is
 * wanted. `twisted` is evolve_mode (H = e^{i k.v t} f): rho(t) then reads the
 * velocity-Fourier content of H at |xi| = |k| t, where finite differences lose
 * accuracy. `folded` keeps the twist in [0, pi/L) (see folded_solve), so rho
 * always reads well-resolved content near xi = 0.
 */
enum class DensityFrame { folded, twisted };

inline std::string to_string(DensityFrame f) { return f == DensityFrame::folded ? "folded" : "twisted"; }

inline DensityFrame parse_density_frame(const std::string& s) {
  if (s == "folded") return DensityFrame::folded;
  if (s == "twisted") return DensityFrame::twisted;
  throw ConfigError("unknown density frame '" + s + "' (expected folded or twisted)");
}

/** @brief Options shared by the density routes. */
struct PropagationOptions {
  DensityFrame frame = DensityFrame::folded;
  CollisionModel model = CollisionModel::landau;
  int substeps = 4;            // kick/transport substeps per half step (coupled solve)
  double cut_fraction = 0.8;   // drop velocity-Fourier content above this fraction of pi/h
  double empty_ratio = 1e-13;  // uncoupled runs stop once ||H|| falls below this fraction of ||H(0)||
};

namespace detail {

/**
 * @brief Zero the velocity-Fourier coefficients with |xi| > fraction * pi/h
 * (periodic 3-D FFT). Applied only right after an exact cyclic bin shift, so
 * content is removed before it can wrap around the periodic spectrum.
 */
inline void spectral_cut(ModeField& f, double fraction) {
  const int n = f.grid.n;
  const std::size_t N3 = f.grid.size();
  const auto& plans = plans_for(n);
  FftBuffer buf;
  buf.reserve(N3);
  std::copy(f.values.begin(), f.values.end(), buf.ptr());
  fftw_execute_dft(plans.forward, buf.data, buf.data);
  cplx* b = buf.ptr();
  std::vector<double> x2(n);
  for (int i = 0; i < n; ++i) {
    int m = i < n / 2 ? i : i - n;
    x2[i] = std::pow(2.0 * m / n, 2);  // (xi / xi_N)^2 along one axis
  }
  const double scale = 1.0 / double(N3), cut2 = fraction * fraction;
  for (std::size_t idx = 0; idx < N3; ++idx) {
    auto c = f.grid.coords(idx);
    b[idx] *= (x2[c[0]] + x2[c[1]] + x2[c[2]] > cut2) ? 0.0 : scale;
  }
  fftw_execute_dft(plans.backward, buf.data, buf.data);
  std::copy(b, b + N3, f.values.begin());
}

/**
 * @brief Time-step d_t f + i k.v f + nu L f = c rho(t) (k.v) sqrt(mu) in the
 * folded frame and return rho(t_i) = int f sqrt(mu) dv (c = -2i/|k|^2 when
 * coupled, 0 otherwise).
 *
 * The state is f = e^{-i k.v tau} H with tau kept in [0, pi/L): transport
 * advances tau exactly and the collision operator acts in the twisted frame.
 * When tau reaches pi/L the phase e^{-i k.v pi/L}, which is periodic on the
 * velocity box for integer k, is folded into H; on the grid this is an exact
 * cyclic shift of the velocity-Fourier coefficients, after which content
 * above cut_fraction * pi/h (unresolvable, and carrying no density) is
 * dropped. Each step: [kick + transport](dt/2), Crank-Nicolson collision over
 * dt, [kick + transport](dt/2); each bracket is a Strang sequence of
 * `substeps` kick/transport substeps.
 */
inline std::vector<cplx> folded_solve(const ModeField& f0, const Mode& k, double nu, double T, double dt,
                                      const CollisionFields& cf, const PropagationOptions& opt, bool coupled) {
  const double k2 = mode_norm2(k);
  if (k2 == 0.0) throw ConfigError("folded_solve requires k != 0");
  if (opt.substeps < 1) throw ConfigError("substeps must be >= 1");
  if (!(opt.cut_fraction > 0.0 && opt.cut_fraction < 1.0)) throw ConfigError("cut_fraction must lie in (0, 1)");
  EvolutionConfig c;
  c.T = T;
  c.dt = dt;
  const std::size_t nsteps = c.steps();
  const auto& g = cf.grid;
  const std::size_t N3 = g.size();
  check_same_grid(f0.grid, g, "folded_solve");
  ModeField H = materialize(f0);
  H.k = k;
  H.twist = 0.0;
  const double period = pi / g.half_width;
  const int substeps = coupled ? opt.substeps : 1;
  const double ds = 0.5 * dt / substeps;
  std::vector<double> kv(N3);
  std::vector<cplx> kick_shape(N3), fold(N3), step_phase(N3), twist_phase(N3, cplx(1.0));
  for (std::size_t n = 0; n < N3; ++n) {
    auto v = g.velocity(n);
    kv[n] = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    kick_shape[n] = coupled ? (-2.0 * I * kv[n] / k2) * cf.sqrt_mu[n] : cplx(0.0);
    fold[n] = std::polar(1.0, -kv[n] * period);
    step_phase[n] = std::polar(1.0, kv[n] * ds);
  }
  // twist_phase = e^{+i k.v tau}: updated incrementally, recomputed on each fold.
  auto density = [&]() {
    cplx acc = 0.0;
    for (std::size_t n = 0; n < N3; ++n) acc += H.values[n] * cf.sqrt_mu[n] * std::conj(twist_phase[n]);
    return acc * g.cell_volume();
  };
  auto kick = [&](double tau) {
    if (!coupled) return;
    const cplx rho = density();
    for (std::size_t n = 0; n < N3; ++n) H.values[n] += tau * rho * kick_shape[n] * twist_phase[n];
  };
  auto advance = [&]() {
    H.twist += ds;
    if (H.twist >= period * (1.0 - 1e-12)) {
      for (std::size_t n = 0; n < N3; ++n) H.values[n] *= fold[n];
      H.twist = std::max(0.0, H.twist - period);
      spectral_cut(H, opt.cut_fraction);
      for (std::size_t n = 0; n < N3; ++n) twist_phase[n] = std::polar(1.0, kv[n] * H.twist);
    } else {
      for (std::size_t n = 0; n < N3; ++n) twist_phase[n] *= step_phase[n];
    }
  };
  auto kick_transport = [&]() {
    for (int s = 0; s < substeps; ++s) {
      kick(0.5 * ds);
      advance();
      kick(0.5 * ds);
    }
  };
  const double n0 = norm(H);
  std::vector<cplx> rho(nsteps + 1, cplx(0.0));
  rho[0] = density();
  for (std::size_t s = 1; s <= nsteps; ++s) {
    kick_transport();
    collision_step(H, nu, dt, cf, opt.model);
    kick_transport();
    check_finite(H, "folded_solve");
    rho[s] = density();
    if (!coupled && norm(H) <= opt.empty_ratio * n0) break;  // everything has been cut; rho stays 0
  }
  return rho;
}

}  // namespace detail

/**
 * @brief rho(t_i) = int S_k(t_i)[h0] sqrt(mu) dv on [0, T] in the chosen frame
 * (the twisted frame uses evolve_mode and the band-limited velocity average).
 */
inline std::vector<cplx> density_response(const ModeField& h0, const Mode& k, double nu, double T, double dt,
                                          const CollisionFields& cf, const PropagationOptions& opt = {}) {
  if (opt.frame == DensityFrame::folded) return detail::folded_solve(h0, k, nu, T, dt, cf, opt, false);
  EvolutionConfig c;
  c.k = k;
  c.nu = nu;
  c.T = T;
  c.dt = dt;
  c.model = opt.model;
  c.snapshot_stride = 0;
  return evolve_mode(h0, c, cf).rho;
}

/**
 * @brief K_k(t) = (2/|k|^2) int i k.S_k(t)[v sqrt(mu)] sqrt(mu) dv, evaluated
 * as (2i/|k|^2) velocity_average(S_k(t)[(k.v) sqrt(mu)]) by linearity. The
 * imaginary residue is removed and reported.
 */
inline KernelSeries compute_kernel(const Mode& k, double nu, double T, double dt, const CollisionFields& cf,
                                   const PropagationOptions& opt = {}) {
  const double k2 = mode_norm2(k);
  if (k2 == 0.0) throw ConfigError("compute_kernel requires k != 0");
  auto rho = density_response(k_dot_v_sqrt_mu(cf.grid, k), k, nu, T, dt, cf, opt);
  KernelSeries ks;
  ks.k = k;
  ks.nu = nu;
  ks.scheme = "strang-cn/" + to_string(opt.frame);
  ks.series.dt = dt;
  ks.series.values.resize(rho.size());
  double mx = 0.0, im = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    cplx v = (2.0 * I / k2) * rho[i];
    mx = std::max(mx, std::abs(v));
    im = std::max(im, std::abs(v.imag()));
    ks.series.values[i] = v.real();
  }
  ks.imag_residue = mx > 0.0 ? im / mx : 0.0;
  if (ks.imag_residue > 1e-6)
    warn("compute_kernel: imaginary residue " + std::to_string(ks.imag_residue) + " of max|K| exceeds 1e-6");
  return ks;
}

/** @brief Cubic B-spline resampling of a series onto step dt/refine (real and imaginary parts separately). */
inline TimeSeries resample(const TimeSeries& s, int refine) {
  if (refine < 1) throw ConfigError("resample: refinement factor must be >= 1");
  if (refine == 1) return s;
  if (s.size() < 4) throw ConfigError("resample: need at least four samples");
  std::vector<double> re(s.size()), im(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    re[i] = s.values[i].real();
    im[i] = s.values[i].imag();
  }
  boost::math::interpolators::cardinal_cubic_b_spline<double> sr(re.begin(), re.end(), s.t0, s.dt);
  boost::math::interpolators::cardinal_cubic_b_spline<double> si(im.begin(), im.end(), s.t0, s.dt);
  TimeSeries out;
  out.t0 = s.t0;
  out.dt = s.dt / refine;
  const std::size_t n = (s.size() - 1) * std::size_t(refine) + 1;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = std::min(out.time(i), s.end_time());
    out.values[i] = cplx(sr(t), si(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Laplace transform and Penrose margin
// ---------------------------------------------------------------------------

/** @brief L[K](lambda) with its pieces for auditing. */
struct LaplaceValue {
  cplx value = 0.0;
  cplx tail = 0.0;          // analytic continuation of the fitted envelope beyond T
  double error_bar = 0.0;   // estimate of the tail uncertainty
  bool tail_flagged = false;
};

/** @brief Exponential envelope |K(t)| ~ A e^{b t} fitted to the last 20% of the samples. */
struct TailEnvelope {
  double rate = 0.0;  // b
  bool ok = false;
};

inline TailEnvelope fit_tail_envelope(const TimeSeries& K) {
  TailEnvelope env;
  const std::size_t n = K.size();
  const std::size_t start = n - std::max<std::size_t>(n / 5, 2);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t i = start; i < n; ++i) {
    double a = std::abs(K.values[i]);
    if (!(a > 0.0)) continue;
    double t = K.time(i), y = std::log(a);
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
    m += 1;
  }
  if (m < 2) return env;
  double den = m * sxx - sx * sx;
  if (!(den > 0.0)) return env;
  env.rate = (m * sxy - sx * sy) / den;
  env.ok = std::isfinite(env.rate) && env.rate < 0.0;
  return env;
}

/**
 * @brief int_0^infty e^{-lambda t} K(t) dt: trapezoid on [0, T] with the
 * Euler-Maclaurin endpoint correction, plus K(T) e^{-lambda T}/(lambda - b)
 * from the fitted envelope. A failed fit yields a flagged, widened error bar.
 */
inline LaplaceValue laplace_transform(const KernelSeries& K, cplx lambda) {
  if (lambda.real() < 0.0) throw ConfigError("laplace_transform requires Re(lambda) >= 0");
  const auto& s = K.series;
  const std::size_t n = s.size();
  if (n < 5) throw ConfigError("laplace_transform: kernel series too short");
  const double dt = s.dt;
  auto g = [&](std::size_t i) { return std::exp(-lambda * s.time(i)) * s.values[i]; };
  cplx sum = 0.5 * (g(0) + g(n - 1));
  for (std::size_t i = 1; i + 1 < n; ++i) sum += g(i);
  sum *= dt;
  // Second-order one-sided derivatives at the endpoints.
  cplx d0 = (-3.0 * g(0) + 4.0 * g(1) - g(2)) / (2.0 * dt);
  cplx d1 = (3.0 * g(n - 1) - 4.0 * g(n - 2) + g(n - 3)) / (2.0 * dt);
  sum -= dt * dt / 12.0 * (d1 - d0);
  LaplaceValue out;
  const double T = s.end_time();
  const cplx KT = s.values[n - 1];
  if (std::abs(KT) > 0.0) {
    auto env = fit_tail_envelope(s);
    if (env.ok) {
      out.tail = KT * std::exp(-lambda * T) / (lambda - env.rate);
      out.error_bar = 0.5 * std::abs(out.tail);
    } else {
      out.tail_flagged = true;
      // Bounded but unresolved tail: assume it persists for another horizon T.
      out.error_bar = std::abs(KT) * T;
    }
  }
  out.value = sum + out.tail;
  return out;
}

struct PenroseReport {
  double kappa = 0.0;
  double argmin_tau = 0.0;
  double tail_fraction = 0.0;  // |tail| / |L[K]| at the argmin
  bool tail_flagged = false;
};

/**
 * @brief min over the tau grid of |1 + L[K](i tau)|, refined by Brent's method
 * on the bracket around the discrete argmin.
 */
inline PenroseReport penrose_margin(const KernelSeries& K, const std::vector<double>& tau_grid) {
  if (tau_grid.size() < 3) throw ConfigError("penrose_margin: tau grid needs at least three points");
  auto f = [&](double tau) { return std::abs(1.0 + laplace_transform(K, cplx(0.0, tau)).value); };
  std::size_t best = 0;
  double fbest = f(tau_grid[0]);
  for (std::size_t i = 1; i < tau_grid.size(); ++i) {
    double v = f(tau_grid[i]);
    if (v < fbest) {
      fbest = v;
      best = i;
    }
  }
  PenroseReport rep;
  double lo = tau_grid[best == 0 ? 0 : best - 1];
  double hi = tau_grid[std::min(best + 1, tau_grid.size() - 1)];
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, 40);
  if (r.second < fbest) {
    rep.kappa = r.second;
    rep.argmin_tau = r.first;
  } else {
    rep.kappa = fbest;
    rep.argmin_tau = tau_grid[best];
  }
  auto lv = laplace_transform(K, cplx(0.0, rep.argmin_tau));
  rep.tail_fraction = std::abs(lv.value) > 0.0 ? std::abs(lv.tail) / std::abs(lv.value) : 0.0;
  rep.tail_flagged = lv.tail_flagged;
  return rep;
}

/** @brief Uniform tau grid on [lo, hi] with the given spacing. */
inline std::vector<double> tau_grid(double lo, double hi, double spacing) {
  std::vector<double> g;
  const auto n = std::size_t(std::ceil((hi - lo) / spacing));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + double(i) * spacing);
  return g;
}

// ---------------------------------------------------------------------------
// Resolvent kernel
// ---------------------------------------------------------------------------

struct ResolventKernel {
  TimeSeries G;
  double min_denominator = 0.0;    // min |1 + L[K](i tau)| on the frequency grid
  double tail_value = 0.0;         // |G~(i tau_max)|
  bool tau_max_flagged = false;
  std::vector<double> tau;         // frequency samples (non-negative half)
  std::vector<cplx> k_hat;         // L[K](i tau) on that half
  std::vector<cplx> g_hat;         // G~(i tau)
};

/**
 * @brief G = inverse Laplace transform of -L[K]/(1 + L[K]) on the imaginary
 * axis. L[K](i tau_j) is the trapezoid transform on tau_j = 2 pi j/(M dt),
 * M = smallest power of two with spacing <= dtau; tau_max = pi/dt is fixed by
 * the sampling, requested tau_max larger than that is rejected.
 */
inline ResolventKernel resolvent_kernel(const KernelSeries& K, double tau_max, double dtau, double margin_guard = 0.05) {
  const auto& s = K.series;
  const double dt = s.dt;
  if (tau_max > pi / dt * (1.0 + 1e-12))
    throw ConfigError("resolvent_kernel: tau_max exceeds the Nyquist frequency pi/dt of the kernel samples");
  std::size_t M = 1;
  while (2.0 * pi / (double(M) * dt) > dtau || M < 2 * s.size()) M *= 2;
  std::vector<cplx> buf(M, cplx(0.0));
  for (std::size_t i = 0; i < s.size(); ++i) buf[i] = s.values[i] * dt;
  buf[0] *= 0.5;
  buf[s.size() - 1] *= 0.5;
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  // FFTW_ESTIMATE never overwrites the arrays during planning.
  fftw_plan fwd = fftw_plan_dft_1d(int(M), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(fwd);
  fftw_destroy_plan(fwd);
  ResolventKernel out;
  out.min_denominator = 1e300;
  std::vector<cplx> gh(M);
  for (std::size_t j = 0; j < M; ++j) {
    cplx kh = buf[j];  // sum K_n e^{-i tau_j t_n} dt
    cplx den = 1.0 + kh;
    out.min_denominator = std::min(out.min_denominator, std::abs(den));
    gh[j] = -kh / den;
  }
  if (out.min_denominator < margin_guard)
    throw NumericalError("resolvent_kernel: Penrose margin " + std::to_string(out.min_denominator) +
                         " is below the guard " + std::to_string(margin_guard));
  // Hermitian symmetry for a real kernel: G~(-i tau) = conj G~(i tau).
  for (std::size_t j = 1; j < M / 2; ++j) {
    cplx a = gh[j], b = std::conj(gh[M - j]);
    gh[j] = 0.5 * (a + b);
    gh[M - j] = std::conj(gh[j]);
  }
  gh[0] = gh[0].real();
  gh[M / 2] = gh[M / 2].real();
  const std::size_t jmax = std::min<std::size_t>(M / 2, std::size_t(std::floor(tau_max * M * dt / (2.0 * pi))));
  for (std::size_t j = 0; j <= jmax; ++j) {
    out.tau.push_back(2.0 * pi * double(j) / (double(M) * dt));
    out.k_hat.push_back(buf[j]);
    out.g_hat.push_back(gh[j]);
  }
  out.tail_value = std::abs(gh[jmax]);
  out.tau_max_flagged = out.tail_value > 1e-4;
  if (out.tau_max_flagged)
    warn("resolvent_kernel: |G~(i tau_max)| = " + std::to_string(out.tail_value) + " exceeds 1e-4");
  std::vector<cplx> g = gh;
  auto* gd = reinterpret_cast<fftw_complex*>(g.data());
  fftw_plan bwd = fftw_plan_dft_1d(int(M), gd, gd, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_execute(bwd);
  fftw_destroy_plan(bwd);
  out.G.t0 = s.t0;
  out.G.dt = dt;
  out.G.values.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out.G.values[i] = g[i].real() / (double(M) * dt);
  return out;
}

/** @brief (a * b)(t_n) = int_0^{t_n} a(t_n - s) b(s) ds by the trapezoid rule. */
inline TimeSeries trapezoid_convolution(const TimeSeries& a, const TimeSeries& b) {
  check_same_sampling(a, b, "trapezoid_convolution");
  TimeSeries out = b;
  for (std::size_t n = 0; n < b.size(); ++n) {
    cplx acc = 0.0;
    if (n > 0) {
      acc = 0.5 * (a.values[n] * b.values[0] + a.values[0] * b.values[n]);
      for (std::size_t m = 1; m < n; ++m) acc += a.values[n - m] * b.values[m];
    }
    out.values[n] = acc * b.dt;
  }
  return out;
}

/** @brief rho = N + G * N (trapezoid), the resolvent representation. */
inline DensitySolution resolvent_solution(const TimeSeries& G, const TimeSeries& N) {
  DensitySolution sol;
  sol.forcing = N;
  sol.rho = trapezoid_convolution(G, N);
  for (std::size_t i = 0; i < N.size(); ++i) sol.rho.values[i] += N.values[i];
  sol.provenance = "resolvent";
  return sol;
}

// ---------------------------------------------------------------------------
// Volterra marching
// ---------------------------------------------------------------------------

/**
 * @brief Product-trapezoid solution of rho + K * rho = N:
 * rho_n = [N_n - dt(K_n rho_0 / 2 + sum_{m=1}^{n-1} K_{n-m} rho_m)] / (1 + dt K_0 / 2).
 */
inline DensitySolution solve_volterra(const TimeSeries& K, const TimeSeries& N) {
  check_same_sampling(K, N, "solve_volterra");
  const double dt = K.dt;
  const cplx diag = 1.0 + 0.5 * dt * K.values[0];
  if (std::abs(diag) < 1e-8) throw NumericalError("solve_volterra: implicit diagonal weight 1 + dt K(0)/2 is near zero");
  DensitySolution sol;
  sol.forcing = N;
  sol.rho = N;
  auto& rho = sol.rho.values;
  rho[0] = N.values[0];
  for (std::size_t n = 1; n < N.size(); ++n) {
    cplx acc = 0.5 * K.values[n] * rho[0];
    for (std::size_t m = 1; m < n; ++m) acc += K.values[n - m] * rho[m];
    rho[n] = (N.values[n] - dt * acc) / diag;
  }
  sol.provenance = "volterra";
  return sol;
}

inline DensitySolution solve_volterra(const KernelSeries& K, const TimeSeries& N) { return solve_volterra(K.series, N); }

// ---------------------------------------------------------------------------
// Source assembly
// ---------------------------------------------------------------------------

/** @brief Optional forcing F(t_i) sampled on the solver's time grid (empty entries are zero). */
struct Forcing {
  std::vector<std::optional<ModeField>> samples;
};

/**
 * @brief N_k(t) = <S_k(t) f0> + int_0^t <S_k(t - s) F(s)> ds, where <.> is the
 * velocity average; the Duhamel integral is the trapezoid rule over the
 * forcing samples, each propagated separately.
 */
inline TimeSeries source_from_data(const ModeField& f0, const Forcing* forcing, const Mode& k, double nu, double T,
                                   double dt, const CollisionFields& cf, const PropagationOptions& opt = {},
                                   std::size_t max_snapshots = 256) {
  EvolutionConfig c;
  c.T = T;
  c.dt = dt;
  const std::size_t nsteps = c.steps();
  TimeSeries N;
  N.dt = dt;
  N.values.assign(nsteps + 1, cplx(0.0));
  if (norm(f0) > 0.0) {
    auto rho = density_response(f0, k, nu, T, dt, cf, opt);
    for (std::size_t i = 0; i <= nsteps; ++i) N.values[i] = rho[i];
  }
  if (forcing) {
    if (forcing->samples.size() != nsteps + 1)
      throw ConfigError("source_from_data: forcing must be sampled on the solver's time grid");
    std::size_t active = 0;
    for (const auto& f : forcing->samples) active += (f && norm(*f) > 0.0) ? 1 : 0;
    std::size_t stride = 1;
    while (active / stride > max_snapshots) stride *= 2;
    if (stride > 1)
      warn("source_from_data: " + std::to_string(active) + " forcing samples exceed the snapshot limit; using every " +
           std::to_string(stride) + "-th sample");
    std::size_t seen = 0;
    for (std::size_t m = 0; m <= nsteps; ++m) {
      const auto& f = forcing->samples[m];
      if (!f || !(norm(*f) > 0.0)) continue;
      if (seen++ % stride != 0) continue;
      const double w = (m == 0 || m == nsteps ? 0.5 : 1.0) * dt * double(stride);
      if (m == nsteps) {
        N.values[m] += w * velocity_average(*f);
        continue;
      }
      auto rho = density_response(*f, k, nu, double(nsteps - m) * dt, dt, cf, opt);
      for (std::size_t i = m; i <= nsteps; ++i) N.values[i] += w * rho[i - m];
    }
  }
  return N;
}

// ---------------------------------------------------------------------------
// Direct coupled solve
// ---------------------------------------------------------------------------

/** @brief Options for the direct coupled solve. */
struct DirectOptions {
  bool coupling = true;  // false drops the self-consistent field (then rho is the free response)
  PropagationOptions propagation;
};

/**
 * @brief Direct solve of d_t f + i k.v f + nu L f = 2 E.v sqrt(mu),
 * E = -i k rho/|k|^2, by time-stepping the coupled mode equation in the
 * folded frame (see detail::folded_solve); the field term is applied each
 * substep from the current rho.
 */
inline DensitySolution linear_vpl_mode(const ModeField& f0, const Mode& k, double nu, double T, double dt,
                                       const CollisionFields& cf, const DirectOptions& opt = {}) {
  if (mode_norm2(k) == 0.0) throw ConfigError("linear_vpl_mode requires k != 0");
  DensitySolution sol;
  sol.provenance = "direct-pde";
  sol.rho.dt = dt;
  sol.rho.values = detail::folded_solve(f0, k, nu, T, dt, cf, opt.propagation, opt.coupling);
  return sol;
}
}  // namespace vpl
