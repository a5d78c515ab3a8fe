#include "helmfluid/advection.hpp"

namespace helmfluid::advection {

PositionMap PositionMap::identity(const GridSpec& grid) {
  PositionMap p{grid, std::vector<double>(grid.size()), std::vector<double>(grid.size())};
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      p.x[grid.index(r, c)] = c;
      p.y[grid.index(r, c)] = r;
    }
  }
  return p;
}

PositionMap rk2_from(const PositionMap& start, const VectorField2D& v, double dt) {
  const auto& g = v.grid();
  if (!(start.grid == g)) throw ShapeError("rk2: position map and velocity grids differ");
  PositionMap out{g, std::vector<double>(g.size()), std::vector<double>(g.size())};
  rk2_kernel<double>(v.u(), v.v(), g.height, g.width, g.boundary, start.x, start.y, dt, out.x, out.y);
  return out;
}

PositionMap rk2_positions(const VectorField2D& v, double dt) {
  return rk2_from(PositionMap::identity(v.grid()), v, dt);
}

namespace {

VectorField2D negated(const VectorField2D& v) {
  std::vector<double> u(v.u_values()), w(v.v_values());
  for (double& a : u) a = -a;
  for (double& a : w) a = -a;
  return VectorField2D(v.grid(), std::move(u), std::move(w));
}

}  // namespace

PositionMap bfecc_positions(const VectorField2D& v, double dt) {
  const auto r = PositionMap::identity(v.grid());
  const auto forth = rk2_from(r, v, dt);
  const auto back = rk2_from(forth, negated(v), dt);
  PositionMap corrected = r;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    corrected.x[i] = r.x[i] + (r.x[i] - back.x[i]) / 2;
    corrected.y[i] = r.y[i] + (r.y[i] - back.y[i]) / 2;
  }
  return rk2_from(corrected, v, dt);
}

std::vector<double> warp(std::span<const double> feature, int channels, const PositionMap& pos) {
  const auto& g = pos.grid;
  const std::size_t hw = g.size();
  if (feature.size() != hw * static_cast<std::size_t>(channels)) throw ShapeError("warp: feature size mismatch");
  std::vector<double> out(feature.size());
  for (int c = 0; c < channels; ++c) {
    const auto plane = feature.subspan(c * hw, hw);
    for (std::size_t t = 0; t < hw; ++t) {
      out[c * hw + t] = sample_bilinear<double>(plane, g.height, g.width, g.boundary, pos.x[t], pos.y[t]);
    }
  }
  return out;
}

std::vector<double> forward_splat(std::span<const double> feature, int channels, const PositionMap& pos,
                                  std::span<const double> fallback) {
  const auto& g = pos.grid;
  const std::size_t hw = g.size();
  if (feature.size() != hw * static_cast<std::size_t>(channels) || fallback.size() != feature.size()) {
    throw ShapeError("forward_splat: feature/fallback size mismatch");
  }
  std::vector<double> mass(feature.size(), 0.0), weight(hw, 0.0), out(feature.size());
  splat_accumulate<double>(feature, channels, g.height, g.width, g.boundary, pos.x, pos.y, mass, weight);
  splat_normalize<double>(mass, weight, fallback, channels, hw, kSplatEps, out);
  return out;
}

std::vector<double> forward_splat(std::span<const double> feature, int channels, const PositionMap& pos,
                                  const VectorField2D& v, double dt) {
  const auto back = bfecc_positions(negated(v), dt);
  return forward_splat(feature, channels, pos, warp(feature, channels, back));
}

ScalarField2D semi_lagrangian_backtrace(const ScalarField2D& field, const VectorField2D& v, double dt) {
  if (!(field.grid() == v.grid())) throw ShapeError("semi_lagrangian_backtrace: grid mismatch");
  const auto src = rk2_positions(negated(v), dt);
  return ScalarField2D(field.grid(), warp(field.data(), 1, src));
}

}  // namespace helmfluid::advection
