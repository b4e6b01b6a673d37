#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "filmflow/grid.hpp"

namespace filmflow::testing {

/// d plus a few random low Fourier modes with total amplitude about `amp`.
inline GridProfile random_profile(const GridSpec& spec, std::mt19937_64& rng, double d, double amp, int kmax = 3) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GridProfile h(spec, d);
  const double w = 2.0 * std::numbers::pi / spec.ell;
  for (int a = 0; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b) {
      if (a == 0 && b <= 0) continue;
      const double c = amp * u(rng) / (a * a + b * b), phase = std::numbers::pi * u(rng);
      for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.n; ++j) h(i, j) += c * std::cos(w * (a * h.x1(i) + b * h.x2(j)) + phase);
    }
  return h;
}

inline Field random_field(std::size_t size, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Field f(size);
  for (double& v : f) v = g(rng);
  return f;
}

inline GridProfile shifted(const GridProfile& h, const Field& dir, double s) {
  GridProfile out = h;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += s * dir[k];
  return out;
}

}  // namespace filmflow::testing
