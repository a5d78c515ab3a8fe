#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "helmfluid/error.hpp"

namespace helmfluid {

/// How out-of-range indices resolve: wrap around the torus, or clamp to the edge.
enum class BoundaryMode { periodic, replicate };

std::string to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(const std::string& name);

/// Uniform H x W raster. Coordinates are (x, y) = (column, row) with y increasing downward.
struct GridSpec {
  int height = 0;
  int width = 0;
  double spacing = 1.0;
  BoundaryMode boundary = BoundaryMode::replicate;

  GridSpec() = default;
  GridSpec(int h, int w, double dx = 1.0, BoundaryMode mode = BoundaryMode::replicate);

  std::size_t size() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
  }
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

class ScalarField2D {
 public:
  ScalarField2D() = default;
  /// Zero-filled field.
  explicit ScalarField2D(const GridSpec& grid);
  ScalarField2D(const GridSpec& grid, std::vector<double> data);

  const GridSpec& grid() const { return grid_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }
  double at(int row, int col) const { return data_[grid_.index(row, col)]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return data_.size(); }

 private:
  GridSpec grid_;
  std::vector<double> data_;
};

class VectorField2D {
 public:
  VectorField2D() = default;
  explicit VectorField2D(const GridSpec& grid);
  VectorField2D(const GridSpec& grid, std::vector<double> u, std::vector<double> v);

  const GridSpec& grid() const { return grid_; }
  std::span<const double> u() const { return u_; }
  std::span<const double> v() const { return v_; }
  const std::vector<double>& u_values() const { return u_; }
  const std::vector<double>& v_values() const { return v_; }
  ScalarField2D u_field() const { return ScalarField2D(grid_, u_); }
  ScalarField2D v_field() const { return ScalarField2D(grid_, v_); }

 private:
  GridSpec grid_;
  std::vector<double> u_;
  std::vector<double> v_;
};

/// 1 = fluid-accessible cell (member of the boundary set S), 0 = obstacle.
class BoundaryMask {
 public:
  BoundaryMask() = default;
  /// All-ones mask.
  explicit BoundaryMask(const GridSpec& grid);
  BoundaryMask(const GridSpec& grid, std::vector<std::uint8_t> inside);

  const GridSpec& grid() const { return grid_; }
  std::span<const std::uint8_t> inside() const { return inside_; }
  bool at(int row, int col) const { return inside_[grid_.index(row, col)] != 0; }
  std::size_t count_inside() const;

  /// Coarse cell is fluid iff any of its 2x2 children is fluid.
  BoundaryMask downsample2() const;

 private:
  GridSpec grid_;
  std::vector<std::uint8_t> inside_;
};

struct FieldStats {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Population statistics (std divides by count).
FieldStats field_stats(std::span<const double> values);
FieldStats field_stats(const ScalarField2D& field);

// ---------------------------------------------------------------------------
// Bilinear sampling

/// Four-corner bilinear stencil at a continuous position. `dwdx`/`dwdy` are the
/// weight derivatives with respect to the query coordinates (zero when clamped).
template <class T>
struct BilinearStencil {
  std::size_t index[4];
  T weight[4];
  T dwdx[4];
  T dwdy[4];
};

template <class T>
inline BilinearStencil<T> bilinear_stencil(int height, int width, BoundaryMode mode, T x, T y) {
  BilinearStencil<T> s{};
  T dxs = 1, dys = 1;
  if (mode == BoundaryMode::replicate) {
    const T xmax = static_cast<T>(width - 1);
    const T ymax = static_cast<T>(height - 1);
    if (x < 0) { x = 0; dxs = 0; }
    if (x > xmax) { x = xmax; dxs = 0; }
    if (y < 0) { y = 0; dys = 0; }
    if (y > ymax) { y = ymax; dys = 0; }
  }
  const T xf = std::floor(x);
  const T yf = std::floor(y);
  const T fx = x - xf;
  const T fy = y - yf;
  long x0 = static_cast<long>(xf);
  long y0 = static_cast<long>(yf);
  long x1 = x0 + 1;
  long y1 = y0 + 1;
  if (mode == BoundaryMode::periodic) {
    auto wrap = [](long i, long n) { i %= n; return i < 0 ? i + n : i; };
    x0 = wrap(x0, width); x1 = wrap(x1, width);
    y0 = wrap(y0, height); y1 = wrap(y1, height);
  } else {
    if (x1 > width - 1) x1 = width - 1;
    if (y1 > height - 1) y1 = height - 1;
  }
  const auto idx = [width](long r, long c) {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c);
  };
  s.index[0] = idx(y0, x0);
  s.index[1] = idx(y0, x1);
  s.index[2] = idx(y1, x0);
  s.index[3] = idx(y1, x1);
  s.weight[0] = (1 - fx) * (1 - fy);
  s.weight[1] = fx * (1 - fy);
  s.weight[2] = (1 - fx) * fy;
  s.weight[3] = fx * fy;
  s.dwdx[0] = -(1 - fy) * dxs;
  s.dwdx[1] = (1 - fy) * dxs;
  s.dwdx[2] = -fy * dxs;
  s.dwdx[3] = fy * dxs;
  s.dwdy[0] = -(1 - fx) * dys;
  s.dwdy[1] = -fx * dys;
  s.dwdy[2] = (1 - fx) * dys;
  s.dwdy[3] = fx * dys;
  return s;
}

/// Raw-array bilinear sample; (x, y) = (column, row).
template <class T>
inline T sample_bilinear(std::span<const T> data, int height, int width, BoundaryMode mode, T x, T y) {
  const auto s = bilinear_stencil<T>(height, width, mode, x, y);
  T acc = 0;
  for (int k = 0; k < 4; ++k) acc += s.weight[k] * data[s.index[k]];
  return acc;
}

double bilinear_sample(const ScalarField2D& field, double x, double y);

}  // namespace helmfluid
