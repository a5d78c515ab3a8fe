#pragma once

#include <cstddef>
#include <span>

#include "helmfluid/field.hpp"

namespace helmfluid::diffops {

/// Discretization used for the model's gradient/curl: second-order central
/// differences, one-sided second-order at replicate edges.
inline constexpr const char* kScheme = "central2";

/// Calls f(j, coeff) for each tap of the first-derivative stencil at index i of a
/// length-n line. Coefficients are in units of 1/(2*spacing).
template <class F>
inline void for_each_tap(int n, int i, BoundaryMode mode, F&& f) {
  if (mode == BoundaryMode::periodic) {
    f(i + 1 == n ? 0 : i + 1, 1.0);
    f(i == 0 ? n - 1 : i - 1, -1.0);
    return;
  }
  if (i == 0) {
    f(0, -3.0);
    f(1, 4.0);
    f(2, -1.0);
  } else if (i == n - 1) {
    f(n - 1, 3.0);
    f(n - 2, -4.0);
    f(n - 3, 1.0);
  } else {
    f(i + 1, 1.0);
    f(i - 1, -1.0);
  }
}

/// out = d/dx (along columns) of a row-major H x W raster.
template <class T>
void derivative_x(std::span<const T> in, int height, int width, double spacing, BoundaryMode mode, std::span<T> out) {
  const T scale = static_cast<T>(1.0 / (2.0 * spacing));
  for (int r = 0; r < height; ++r) {
    const T* row = in.data() + static_cast<std::size_t>(r) * width;
    T* dst = out.data() + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < width; ++c) {
      T acc = 0;
      for_each_tap(width, c, mode, [&](int j, double w) { acc += static_cast<T>(w) * row[j]; });
      dst[c] = acc * scale;
    }
  }
}

/// out = d/dy (along rows, y downward).
template <class T>
void derivative_y(std::span<const T> in, int height, int width, double spacing, BoundaryMode mode, std::span<T> out) {
  const T scale = static_cast<T>(1.0 / (2.0 * spacing));
  for (int r = 0; r < height; ++r) {
    T* dst = out.data() + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < width; ++c) dst[c] = 0;
    for_each_tap(height, r, mode, [&](int j, double w) {
      const T* src = in.data() + static_cast<std::size_t>(j) * width;
      const T tw = static_cast<T>(w);
      for (int c = 0; c < width; ++c) dst[c] += tw * src[c];
    });
    for (int c = 0; c < width; ++c) dst[c] *= scale;
  }
}

/// Adjoint of derivative_x: out += D_x^T g.
template <class T>
void derivative_x_adjoint(std::span<const T> g, int height, int width, double spacing, BoundaryMode mode,
                          std::span<T> out) {
  const T scale = static_cast<T>(1.0 / (2.0 * spacing));
  for (int r = 0; r < height; ++r) {
    const T* grow = g.data() + static_cast<std::size_t>(r) * width;
    T* dst = out.data() + static_cast<std::size_t>(r) * width;
    for (int c = 0; c < width; ++c) {
      const T gc = grow[c] * scale;
      for_each_tap(width, c, mode, [&](int j, double w) { dst[j] += static_cast<T>(w) * gc; });
    }
  }
}

/// Adjoint of derivative_y: out += D_y^T g.
template <class T>
void derivative_y_adjoint(std::span<const T> g, int height, int width, double spacing, BoundaryMode mode,
                          std::span<T> out) {
  const T scale = static_cast<T>(1.0 / (2.0 * spacing));
  for (int r = 0; r < height; ++r) {
    const T* grow = g.data() + static_cast<std::size_t>(r) * width;
    for_each_tap(height, r, mode, [&](int j, double w) {
      T* dst = out.data() + static_cast<std::size_t>(j) * width;
      const T tw = static_cast<T>(w) * scale;
      for (int c = 0; c < width; ++c) dst[c] += tw * grow[c];
    });
  }
}

/// (dphi/dx, dphi/dy)
VectorField2D gradient(const ScalarField2D& phi);
/// (dA/dy, -dA/dx)
VectorField2D curl_of_scalar(const ScalarField2D& a);
/// du/dx + dv/dy
ScalarField2D divergence(const VectorField2D& f);
/// dv/dx - du/dy
ScalarField2D vorticity(const VectorField2D& f);

}  // namespace helmfluid::diffops
