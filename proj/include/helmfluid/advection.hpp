#pragma once

#include <span>
#include <vector>

#include "helmfluid/field.hpp"

namespace helmfluid::advection {

/// Accumulated splat weight below which a cell counts as empty.
inline constexpr double kSplatEps = 1e-6;

/// Per-cell target coordinates (x = column, y = row) in cell units.
struct PositionMap {
  GridSpec grid;
  std::vector<double> x;
  std::vector<double> y;

  static PositionMap identity(const GridSpec& grid);
};

// ---------------------------------------------------------------------------
// Raw kernels shared with the differentiable path.

/// out = r + dt * v(r + dt/2 * v(r)); velocity fetched bilinearly at non-grid points.
template <class T>
void rk2_kernel(std::span<const T> vu, std::span<const T> vv, int height, int width, BoundaryMode mode,
                std::span<const T> rx, std::span<const T> ry, T dt, std::span<T> ox, std::span<T> oy) {
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const T k1x = sample_bilinear<T>(vu, height, width, mode, rx[i], ry[i]);
    const T k1y = sample_bilinear<T>(vv, height, width, mode, rx[i], ry[i]);
    const T mx = rx[i] + k1x * (dt / 2);
    const T my = ry[i] + k1y * (dt / 2);
    ox[i] = rx[i] + dt * sample_bilinear<T>(vu, height, width, mode, mx, my);
    oy[i] = ry[i] + dt * sample_bilinear<T>(vv, height, width, mode, mx, my);
  }
}

/// Scatters each source cell of a C x H x W feature block to the four cells enclosing
/// its target with bilinear weights. Accumulates into `mass` (C x H x W) and `weight` (H x W).
template <class T>
void splat_accumulate(std::span<const T> feature, int channels, int height, int width, BoundaryMode mode,
                      std::span<const T> px, std::span<const T> py, std::span<T> mass, std::span<T> weight) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (std::size_t s = 0; s < hw; ++s) {
    const auto st = bilinear_stencil<T>(height, width, mode, px[s], py[s]);
    for (int k = 0; k < 4; ++k) {
      const T w = st.weight[k];
      if (w == T(0)) continue;
      weight[st.index[k]] += w;
      for (int c = 0; c < channels; ++c) mass[c * hw + st.index[k]] += w * feature[c * hw + s];
    }
  }
}

/// out = mass / weight where weight > eps, else fallback.
template <class T>
void splat_normalize(std::span<const T> mass, std::span<const T> weight, std::span<const T> fallback, int channels,
                     std::size_t hw, T eps, std::span<T> out) {
  for (int c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < hw; ++t) {
      const std::size_t i = c * hw + t;
      out[i] = weight[t] > eps ? mass[i] / weight[t] : fallback[i];
    }
  }
}

// ---------------------------------------------------------------------------

/// Midpoint rule r' = r + v(r + v(r) dt/2) dt from every cell center.
PositionMap rk2_positions(const VectorField2D& v, double dt);
/// RK2 started from arbitrary positions.
PositionMap rk2_from(const PositionMap& start, const VectorField2D& v, double dt);

/// Back-and-forth error compensation: forward RK2, backward RK2 with -v, correct the
/// origin by half the round-trip discrepancy, then a final forward RK2.
PositionMap bfecc_positions(const VectorField2D& v, double dt);

/// Bilinear samples of each channel at the given positions (backward warp).
std::vector<double> warp(std::span<const double> feature, int channels, const PositionMap& pos);

/// Forward splat with weight normalization; empty cells take `fallback`.
std::vector<double> forward_splat(std::span<const double> feature, int channels, const PositionMap& pos,
                                  std::span<const double> fallback);
/// Forward splat whose fallback is the backward-warp value at BFECC(r, -v).
std::vector<double> forward_splat(std::span<const double> feature, int channels, const PositionMap& pos,
                                  const VectorField2D& v, double dt);

/// Semi-Lagrangian step: value at r = field(RK2(r, -v)).
ScalarField2D semi_lagrangian_backtrace(const ScalarField2D& field, const VectorField2D& v, double dt);

}  // namespace helmfluid::advection
