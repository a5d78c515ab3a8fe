#include "helmfluid/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace helmfluid {

std::string to_string(BoundaryMode mode) {
  return mode == BoundaryMode::periodic ? "periodic" : "replicate";
}

BoundaryMode boundary_mode_from_string(const std::string& name) {
  if (name == "periodic") return BoundaryMode::periodic;
  if (name == "replicate") return BoundaryMode::replicate;
  throw ConfigError("unknown boundary mode '" + name + "'");
}

GridSpec::GridSpec(int h, int w, double dx, BoundaryMode mode)
    : height(h), width(w), spacing(dx), boundary(mode) {
  validate();
}

void GridSpec::validate() const {
  if (height < 4 || width < 4) {
    throw ShapeError("grid must be at least 4x4, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ShapeError("grid spacing must be positive");
}

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError(std::string(what) + " contains non-finite values");
  }
}

void require_length(const GridSpec& grid, std::size_t n, const char* what) {
  if (n != grid.size()) {
    throw ShapeError(std::string(what) + " length " + std::to_string(n) + " does not match grid size " +
                     std::to_string(grid.size()));
  }
}

}  // namespace

ScalarField2D::ScalarField2D(const GridSpec& grid) : grid_(grid), data_(grid.size(), 0.0) { grid_.validate(); }

ScalarField2D::ScalarField2D(const GridSpec& grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
  grid_.validate();
  require_length(grid_, data_.size(), "scalar field");
  require_finite(data_, "scalar field");
}

VectorField2D::VectorField2D(const GridSpec& grid)
    : grid_(grid), u_(grid.size(), 0.0), v_(grid.size(), 0.0) {
  grid_.validate();
}

VectorField2D::VectorField2D(const GridSpec& grid, std::vector<double> u, std::vector<double> v)
    : grid_(grid), u_(std::move(u)), v_(std::move(v)) {
  grid_.validate();
  require_length(grid_, u_.size(), "vector field u");
  require_length(grid_, v_.size(), "vector field v");
  require_finite(u_, "vector field u");
  require_finite(v_, "vector field v");
}

BoundaryMask::BoundaryMask(const GridSpec& grid) : grid_(grid), inside_(grid.size(), 1) { grid_.validate(); }

BoundaryMask::BoundaryMask(const GridSpec& grid, std::vector<std::uint8_t> inside)
    : grid_(grid), inside_(std::move(inside)) {
  grid_.validate();
  require_length(grid_, inside_.size(), "boundary mask");
  for (auto& b : inside_) b = b ? 1 : 0;
}

std::size_t BoundaryMask::count_inside() const {
  return static_cast<std::size_t>(std::count(inside_.begin(), inside_.end(), std::uint8_t{1}));
}

BoundaryMask BoundaryMask::downsample2() const {
  GridSpec coarse = grid_;
  coarse.height = grid_.height / 2;
  coarse.width = grid_.width / 2;
  coarse.spacing = grid_.spacing * 2.0;
  if (coarse.height < 1 || coarse.width < 1) throw ShapeError("mask too small to downsample");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(coarse.height) * coarse.width, 0);
  for (int r = 0; r < coarse.height; ++r) {
    for (int c = 0; c < coarse.width; ++c) {
      bool any = false;
      for (int dr = 0; dr < 2; ++dr)
        for (int dc = 0; dc < 2; ++dc) any = any || at(2 * r + dr, 2 * c + dc);
      out[static_cast<std::size_t>(r) * coarse.width + c] = any ? 1 : 0;
    }
  }
  // Coarse grids may drop below the 4x4 minimum; bypass validation by building in place.
  BoundaryMask m;
  m.grid_ = coarse;
  m.inside_ = std::move(out);
  return m;
}

FieldStats field_stats(std::span<const double> values) {
  if (values.empty()) throw InputError("field_stats requires a nonempty field");
  FieldStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

FieldStats field_stats(const ScalarField2D& field) { return field_stats(field.data()); }

double bilinear_sample(const ScalarField2D& field, double x, double y) {
  const auto& g = field.grid();
  return sample_bilinear<double>(field.data(), g.height, g.width, g.boundary, x, y);
}

}  // namespace helmfluid
