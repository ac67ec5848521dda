#pragma once

// Uniformly sampled scalar time series.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpl/grid.hpp"

namespace vpl {

/** @brief Samples y_i = y(t0 + i dt). */
struct TimeSeries {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<cplx> values;

  std::size_t size() const { return values.size(); }
  double time(std::size_t i) const { return t0 + double(i) * dt; }
  double end_time() const { return values.empty() ? t0 : time(values.size() - 1); }
};

/** @brief Sample a callable y(t) on [0, T] with step dt (T/dt rounded to the nearest integer). */
template <class F>
TimeSeries sample_series(F&& f, double T, double dt) {
  TimeSeries s;
  s.dt = dt;
  const auto n = std::size_t(std::llround(T / dt));
  s.values.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) s.values[i] = cplx(f(double(i) * dt));
  return s;
}

/** @brief Check that two series share the same sampling. */
inline void check_same_sampling(const TimeSeries& a, const TimeSeries& b, const char* where) {
  if (a.size() != b.size() || std::abs(a.dt - b.dt) > 1e-12 * a.dt || std::abs(a.t0 - b.t0) > 1e-12)
    throw ConfigError(std::string(where) + ": time grids do not match");
}

/** @brief max_i |a_i - b_i| / max_i |b_i|. */
inline double relative_linf(const TimeSeries& a, const TimeSeries& b) {
  check_same_sampling(a, b, "relative_linf");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a.values[i] - b.values[i]));
    den = std::max(den, std::abs(b.values[i]));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace vpl
