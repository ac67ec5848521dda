#pragma once

// Reproducible random probes keyed by (seed, probe index).

#include <cmath>
#include <cstdint>
#include <random>

#include "vpl/grid.hpp"

namespace vpl {

/** @brief splitmix64 finalizer; mixes a 64-bit key into a well-spread seed. */
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/** @brief Generator for probe number `probe` under `seed`, independent of evaluation order. */
inline std::mt19937_64 probe_engine(std::uint64_t seed, std::uint64_t probe) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (probe * 0xD1B54A32D192ED03ULL)));
}

/**
 * @brief Random smooth field: sqrt(mu) times a random polynomial of degree
 * <= 3 plus a random Gaussian bump c e^{-|v - v0|^2}. Real unless `complex_values`.
 */
inline ModeField random_smooth_field(const VelocityGrid& g, std::uint64_t seed, std::uint64_t probe,
                                     bool complex_values = false, const Mode& k = {0, 0, 0}) {
  auto eng = probe_engine(seed, probe);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto draw = [&]() { return complex_values ? cplx(nd(eng), nd(eng)) : cplx(nd(eng), 0.0); };
  // Monomials v^p with |p| <= 3: 20 coefficients.
  std::vector<std::array<int, 3>> pw;
  for (int a = 0; a <= 3; ++a)
    for (int b = 0; a + b <= 3; ++b)
      for (int c = 0; a + b + c <= 3; ++c) pw.push_back({a, b, c});
  std::vector<cplx> coef(pw.size());
  for (std::size_t i = 0; i < pw.size(); ++i) coef[i] = draw() / double(1 + pw[i][0] + pw[i][1] + pw[i][2]);
  cplx bump = draw();
  std::array<double, 3> v0{nd(eng) * 0.7, nd(eng) * 0.7, nd(eng) * 0.7};
  ModeField h(g, k);
  for (std::size_t n = 0; n < g.size(); ++n) {
    auto v = g.velocity(n);
    cplx p = 0.0;
    for (std::size_t i = 0; i < pw.size(); ++i)
      p += coef[i] * std::pow(v[0], pw[i][0]) * std::pow(v[1], pw[i][1]) * std::pow(v[2], pw[i][2]);
    double r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) d2 += (v[a] - v0[a]) * (v[a] - v0[a]);
    h.values[n] = p * std::exp(-0.5 * r2) + bump * std::exp(-d2);
  }
  return h;
}

}  // namespace vpl
