#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "helmfluid/field.hpp"

namespace helmfluid::testing {

/// Sum of a few low Fourier modes with random amplitudes and phases; smooth and periodic.
inline ScalarField2D random_smooth(const GridSpec& g, std::uint64_t seed, int modes = 4, bool zero_mean = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0), phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> freq(0, modes);
  struct Mode { int kx, ky; double a, p; };
  std::vector<Mode> ms;
  for (int i = 0; i < 6; ++i) {
    Mode m{freq(rng), freq(rng), amp(rng), phase(rng)};
    if (m.kx == 0 && m.ky == 0) m.kx = 1;
    ms.push_back(m);
  }
  const double offset = zero_mean ? 0.0 : amp(rng);
  std::vector<double> d(g.size());
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      double v = offset;
      for (const auto& m : ms) {
        v += m.a * std::cos(2.0 * std::numbers::pi * (m.kx * c / double(g.width) + m.ky * r / double(g.height)) + m.p);
      }
      d[g.index(r, c)] = v;
    }
  }
  return ScalarField2D(g, std::move(d));
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double l2_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double vec_l2(const VectorField2D& f) {
  return std::sqrt(std::pow(l2(f.u()), 2) + std::pow(l2(f.v()), 2));
}

inline double vec_l2_diff(const VectorField2D& a, const VectorField2D& b) {
  return std::sqrt(std::pow(l2_diff(a.u(), b.u()), 2) + std::pow(l2_diff(a.v(), b.v()), 2));
}

}  // namespace helmfluid::testing
