#pragma once

// Velocity-space discretization: the cell-centered tensor grid, mode fields,
// the Maxwellian, finite-difference stencils, weighted norms and the
// projection onto the collision invariants.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpl {

using cplx = std::complex<double>;
using Field = std::vector<cplx>;
using Mode = std::array<int, 3>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/** @brief Invalid parameters or configuration (CLI exit code 2). */
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/** @brief Solver or discretization failure (CLI exit code 3). */
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/** @brief Emit a diagnostic warning on the log stream. */
inline void warn(const std::string& msg) { std::clog << "[vpl] warning: " << msg << '\n'; }

inline double mode_norm2(const Mode& k) {
  return double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
}

/**
 * @brief Uniform cell-centered grid on [-L, L]^3.
 *
 * Node i along an axis sits at -L + (i + 1/2) h with h = 2L/N, so the node
 * set is symmetric under v -> -v and never contains the origin. Flat index
 * of node (i, j, l) is (i N + j) N + l with i running along v_1.
 */
struct VelocityGrid {
  double half_width = 6.0;
  int n = 32;
  double spacing = 0.375;

  std::size_t size() const { return std::size_t(n) * n * n; }
  double node(int i) const { return -half_width + (i + 0.5) * spacing; }
  double cell_volume() const { return spacing * spacing * spacing; }
  std::size_t index(int i, int j, int l) const { return (std::size_t(i) * n + j) * n + l; }
  std::array<int, 3> coords(std::size_t idx) const {
    int l = int(idx % n);
    int j = int((idx / n) % n);
    int i = int(idx / (std::size_t(n) * n));
    return {i, j, l};
  }
  std::array<double, 3> velocity(std::size_t idx) const {
    auto c = coords(idx);
    return {node(c[0]), node(c[1]), node(c[2])};
  }
  bool operator==(const VelocityGrid& o) const { return n == o.n && half_width == o.half_width; }
};

/** @brief Build the grid; N even in [8, 128], L in [3, 10]. */
inline VelocityGrid build_grid(double half_width, int n) {
  if (!(half_width > 0.0)) throw ConfigError("grid half-width must be positive");
  if (n % 2 != 0) throw ConfigError("grid points per axis must be even (got " + std::to_string(n) + ")");
  if (n < 8 || n > 128) throw ConfigError("grid points per axis must lie in [8, 128]");
  if (half_width < 3.0 || half_width > 10.0) throw ConfigError("grid half-width must lie in [3, 10]");
  return VelocityGrid{half_width, n, 2.0 * half_width / n};
}

/**
 * @brief Complex field on the grid for one spatial Fourier mode k.
 *
 * The represented function is h(v) = exp(-i k.v twist) values(v). A zero
 * twist is the plain (lab-frame) representation; evolution keeps the exact
 * free-transport phase in the twist so that the stored values stay smooth.
 */
struct ModeField {
  VelocityGrid grid;
  Mode k{0, 0, 0};
  double twist = 0.0;
  Field values;

  ModeField() = default;
  ModeField(const VelocityGrid& g, const Mode& mode = {0, 0, 0}, double tw = 0.0)
      : grid(g), k(mode), twist(tw), values(g.size(), cplx(0.0)) {}
};

/** @brief Sample a callable f(v1, v2, v3) -> complex onto the grid. */
template <class F>
ModeField sample_field(const VelocityGrid& g, F&& f, const Mode& k = {0, 0, 0}) {
  ModeField h(g, k);
  for (std::size_t n = 0; n < g.size(); ++n) {
    auto v = g.velocity(n);
    h.values[n] = cplx(f(v[0], v[1], v[2]));
  }
  return h;
}

/** @brief The normalized Maxwellian square root e^{-|v|^2/2}. */
inline ModeField sqrt_maxwellian(const VelocityGrid& g, const Mode& k = {0, 0, 0}) {
  return sample_field(
      g, [](double a, double b, double c) { return std::exp(-0.5 * (a * a + b * b + c * c)); }, k);
}

inline std::vector<double> sqrt_mu_values(const VelocityGrid& g) {
  std::vector<double> s(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    auto v = g.velocity(n);
    s[n] = std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
  }
  return s;
}

/** @brief exp(-i k.v t) at node n. */
inline cplx transport_phase(const VelocityGrid& g, const Mode& k, double t, std::size_t n) {
  auto v = g.velocity(n);
  return std::polar(1.0, -(k[0] * v[0] + k[1] * v[1] + k[2] * v[2]) * t);
}

/** @brief Pointwise values of the represented function (twist folded in). */
inline ModeField materialize(const ModeField& h) {
  if (h.twist == 0.0) return h;
  ModeField out(h.grid, h.k, 0.0);
  for (std::size_t n = 0; n < h.values.size(); ++n)
    out.values[n] = transport_phase(h.grid, h.k, h.twist, n) * h.values[n];
  return out;
}

inline void check_same_grid(const VelocityGrid& a, const VelocityGrid& b, const char* where) {
  if (!(a == b)) throw ConfigError(std::string(where) + ": fields live on different grids");
}

/** @brief Grid inner product <a, b> = h^3 sum a conj(b) of the represented functions. */
inline cplx inner(const ModeField& a, const ModeField& b) {
  check_same_grid(a.grid, b.grid, "inner");
  if (a.twist != b.twist || (a.twist != 0.0 && a.k != b.k)) return inner(materialize(a), materialize(b));
  cplx s = 0.0;
  for (std::size_t n = 0; n < a.values.size(); ++n) s += a.values[n] * std::conj(b.values[n]);
  return s * a.grid.cell_volume();
}

inline double norm(const ModeField& a) {
  double s = 0.0;
  for (const auto& x : a.values) s += std::norm(x);
  return std::sqrt(s * a.grid.cell_volume());
}

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (const auto& x : f) m = std::max(m, std::abs(x));
  return m;
}

/** @brief a + c b for fields sharing grid, mode and twist. */
inline ModeField axpy(const ModeField& a, cplx c, const ModeField& b) {
  check_same_grid(a.grid, b.grid, "axpy");
  if (a.twist != b.twist) return axpy(materialize(a), c, materialize(b));
  ModeField out = a;
  for (std::size_t n = 0; n < a.values.size(); ++n) out.values[n] += c * b.values[n];
  return out;
}

inline ModeField scaled(const ModeField& a, cplx c) {
  ModeField out = a;
  for (auto& x : out.values) x *= c;
  return out;
}

inline void check_finite(const ModeField& h, const char* what) {
  for (std::size_t n = 0; n < h.values.size(); ++n) {
    if (!std::isfinite(h.values[n].real()) || !std::isfinite(h.values[n].imag())) {
      auto v = h.grid.velocity(n);
      throw NumericalError(std::string(what) + ": non-finite value at v = (" + std::to_string(v[0]) + ", " +
                           std::to_string(v[1]) + ", " + std::to_string(v[2]) + ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline std::size_t axis_stride(int n, int axis) {
  return axis == 0 ? std::size_t(n) * n : (axis == 1 ? std::size_t(n) : 1);
}

/** @brief Half-width of the central difference stencil (fourth order). */
inline constexpr int stencil_radius = 2;

/** @brief Antisymmetric central-difference weights c_m (offsets m = 1, 2), unit spacing. */
inline constexpr std::array<double, stencil_radius> central_weights{8.0 / 12.0, -1.0 / 12.0};

/**
 * @brief Fourth-order central difference along one axis with zero extension.
 *
 * Values outside the box are taken as zero. The resulting matrix is exactly
 * skew-symmetric; it presumes fields that are negligible at the boundary.
 */
template <class T>
void central_derivative(const T* in, T* out, int n, double h, int axis) {
  const std::size_t s = axis_stride(n, axis);
  const std::size_t total = std::size_t(n) * n * n;
  const double inv = 1.0 / h;
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int c = int((idx / s) % n);
    T acc(0);
    for (int m = 1; m <= stencil_radius; ++m) {
      T fp = c + m < n ? in[idx + m * s] : T(0);
      T fm = c - m >= 0 ? in[idx - m * s] : T(0);
      acc += central_weights[m - 1] * (fp - fm);
    }
    out[idx] = inv * acc;
  }
}

/**
 * @brief Fourth-order difference with one-sided stencils in the two boundary
 * layers, for data that does not decay at the boundary (e.g. sigma).
 */
inline void boundary_derivative(const double* in, double* out, int n, double h, int axis) {
  const std::size_t s = axis_stride(n, axis);
  const std::size_t total = std::size_t(n) * n * n;
  auto at = [&](std::size_t idx, int c, int m) { return in[idx + std::ptrdiff_t(m - c) * std::ptrdiff_t(s)]; };
  for (std::size_t idx = 0; idx < total; ++idx) {
    int c = int((idx / s) % n);
    double d;
    if (c == 0)
      d = -25 * at(idx, c, 0) + 48 * at(idx, c, 1) - 36 * at(idx, c, 2) + 16 * at(idx, c, 3) - 3 * at(idx, c, 4);
    else if (c == 1)
      d = -3 * at(idx, c, 0) - 10 * at(idx, c, 1) + 18 * at(idx, c, 2) - 6 * at(idx, c, 3) + at(idx, c, 4);
    else if (c == n - 1)
      d = 25 * at(idx, c, n - 1) - 48 * at(idx, c, n - 2) + 36 * at(idx, c, n - 3) - 16 * at(idx, c, n - 4) +
          3 * at(idx, c, n - 5);
    else if (c == n - 2)
      d = 3 * at(idx, c, n - 1) + 10 * at(idx, c, n - 2) - 18 * at(idx, c, n - 3) + 6 * at(idx, c, n - 4) -
          at(idx, c, n - 5);
    else
      d = 8 * (at(idx, c, c + 1) - at(idx, c, c - 1)) - (at(idx, c, c + 2) - at(idx, c, c - 2));
    out[idx] = d / (12.0 * h);
  }
}

/**
 * @brief Velocity gradient of the represented function, expressed in the
 * field's own frame: component a is (D_a - i k_a twist) values.
 */
inline std::array<Field, 3> twisted_gradient(const ModeField& h) {
  std::array<Field, 3> g;
  const std::size_t N3 = h.grid.size();
  for (int a = 0; a < 3; ++a) {
    g[a].assign(N3, cplx(0.0));
    central_derivative(h.values.data(), g[a].data(), h.grid.n, h.grid.spacing, a);
    const double shift = h.k[a] * h.twist;
    if (shift != 0.0)
      for (std::size_t n = 0; n < N3; ++n) g[a][n] -= I * shift * h.values[n];
  }
  return g;
}

/** @brief Ratio of the largest |h| in the two outermost layers to max |h|. */
inline double tail_ratio(const ModeField& h) {
  const int n = h.grid.n;
  double edge = 0.0, all = 0.0;
  for (std::size_t idx = 0; idx < h.values.size(); ++idx) {
    double a = std::abs(h.values[idx]);
    all = std::max(all, a);
    auto c = h.grid.coords(idx);
    bool boundary = false;
    for (int ax = 0; ax < 3; ++ax) boundary = boundary || c[ax] < 2 || c[ax] >= n - 2;
    if (boundary) edge = std::max(edge, a);
  }
  return all > 0.0 ? edge / all : 0.0;
}

/** @brief Warn when a field is not negligible at the box boundary. */
inline bool check_tail(const ModeField& h, const std::string& what, double threshold = 1e-6) {
  double r = tail_ratio(h);
  if (r > threshold) {
    warn(what + ": boundary tail ratio " + std::to_string(r) + " exceeds " + std::to_string(threshold));
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Weights and norms
// ---------------------------------------------------------------------------

/** @brief Velocity weight <v>^ell e^{q |v|^theta / 2}. */
struct WeightSpec {
  double ell = 0.0;
  int theta = 0;
  double q = 0.0;

  /** @brief Reject invalid combinations; q is forced to 0 when theta = 0. */
  WeightSpec validated(const VelocityGrid& g) const {
    WeightSpec s = *this;
    if (s.theta != 0 && s.theta != 2) throw ConfigError("weight exponent theta must be 0 or 2");
    if (s.theta == 0) s.q = 0.0;
    if (s.theta == 2) {
      if (!(s.q > 0.0 && s.q < 1.0)) throw ConfigError("Gaussian weight rate q must lie in (0, 1)");
      if (s.q * 3.0 * g.half_width * g.half_width > 200.0)
        throw ConfigError("overflow guard: q * 3 L_v^2 = " + std::to_string(s.q * 3.0 * g.half_width * g.half_width) +
                          " exceeds the exponent budget 200");
    }
    return s;
  }
  /** @brief The primed weight, with q replaced by q/2. */
  WeightSpec primed() const { return {ell, theta, q / 2.0}; }
  /** @brief Square of the weight at speed^2 = r2. */
  double weight2(double r2) const {
    double w = std::pow(1.0 + r2, ell);
    if (theta == 2) w *= std::exp(q * r2);
    return w;
  }
};

inline double speed2(const VelocityGrid& g, std::size_t n) {
  auto v = g.velocity(n);
  return v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
}

/** @brief ||<v>^ell e^{q|v|^theta/2} h||_{L^2_v} by grid quadrature. */
inline double weighted_norm(const ModeField& h, const WeightSpec& spec) {
  WeightSpec s = spec.validated(h.grid);
  double acc = 0.0;
  for (std::size_t n = 0; n < h.values.size(); ++n) acc += s.weight2(speed2(h.grid, n)) * std::norm(h.values[n]);
  return std::sqrt(acc * h.grid.cell_volume());
}

/** @brief The five collision invariants sqrt(mu), v_i sqrt(mu), |v|^2 sqrt(mu). */
inline std::array<ModeField, 5> collision_invariants(const VelocityGrid& g) {
  std::array<ModeField, 5> b;
  b[0] = sqrt_maxwellian(g);
  for (int a = 0; a < 3; ++a)
    b[a + 1] = sample_field(g, [a](double x, double y, double z) {
      double v[3] = {x, y, z};
      return v[a] * std::exp(-0.5 * (x * x + y * y + z * z));
    });
  b[4] = sample_field(g, [](double x, double y, double z) {
    double r2 = x * x + y * y + z * z;
    return r2 * std::exp(-0.5 * r2);
  });
  return b;
}

/** @brief Orthonormal basis of the null space by modified Gram-Schmidt. */
inline std::array<ModeField, 5> null_space_basis(const VelocityGrid& g) {
  auto b = collision_invariants(g);
  for (int i = 0; i < 5; ++i) {
    double before = norm(b[i]);
    for (int j = 0; j < i; ++j) b[i] = axpy(b[i], -inner(b[i], b[j]), b[j]);
    double after = norm(b[i]);
    if (after < 1e-8 * before) throw NumericalError("degenerate Gram matrix for the null-space basis (grid too coarse)");
    b[i] = scaled(b[i], 1.0 / after);
  }
  return b;
}

/** @brief Orthogonal projection onto span{sqrt(mu), v sqrt(mu), |v|^2 sqrt(mu)}. */
inline ModeField project_null(const ModeField& h) {
  ModeField lab = materialize(h);
  auto basis = null_space_basis(h.grid);
  ModeField out(h.grid, h.k, 0.0);
  for (const auto& e : basis) out = axpy(out, inner(lab, e), e);
  return out;
}

/**
 * @brief Velocity average of h against sqrt(mu).
 *
 * For a twisted field the integrand e^{-ik.v t} H sqrt(mu) is integrated as the
 * band-limited (sinc) interpolant of the samples H sqrt(mu), which is the
 * trapezoid sum while every |k_a t| < pi/h and zero beyond. This removes the
 * spurious recurrence of the sampled phase without affecting resolved data.
 */
inline cplx velocity_average(const ModeField& h) {
  const auto& g = h.grid;
  const double nyquist = pi / g.spacing;
  for (int a = 0; a < 3; ++a)
    if (std::abs(h.k[a] * h.twist) >= nyquist) return 0.0;
  cplx acc = 0.0;
  for (std::size_t n = 0; n < h.values.size(); ++n) {
    auto v = g.velocity(n);
    double s = std::exp(-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
    cplx phase = h.twist == 0.0 ? cplx(1.0) : transport_phase(g, h.k, h.twist, n);
    acc += phase * h.values[n] * s;
  }
  return acc * g.cell_volume();
}

}  // namespace vpl
