#include "helmfluid/diffops.hpp"

#include <vector>

namespace helmfluid::diffops {

namespace {

std::vector<double> dx(std::span<const double> f, const GridSpec& g) {
  std::vector<double> out(g.size());
  derivative_x<double>(f, g.height, g.width, g.spacing, g.boundary, out);
  return out;
}

std::vector<double> dy(std::span<const double> f, const GridSpec& g) {
  std::vector<double> out(g.size());
  derivative_y<double>(f, g.height, g.width, g.spacing, g.boundary, out);
  return out;
}

}  // namespace

VectorField2D gradient(const ScalarField2D& phi) {
  const auto& g = phi.grid();
  return VectorField2D(g, dx(phi.data(), g), dy(phi.data(), g));
}

VectorField2D curl_of_scalar(const ScalarField2D& a) {
  const auto& g = a.grid();
  auto u = dy(a.data(), g);
  auto v = dx(a.data(), g);
  for (double& x : v) x = -x;
  return VectorField2D(g, std::move(u), std::move(v));
}

ScalarField2D divergence(const VectorField2D& f) {
  const auto& g = f.grid();
  auto out = dx(f.u(), g);
  const auto vy = dy(f.v(), g);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vy[i];
  return ScalarField2D(g, std::move(out));
}

ScalarField2D vorticity(const VectorField2D& f) {
  const auto& g = f.grid();
  auto out = dx(f.v(), g);
  const auto uy = dy(f.u(), g);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= uy[i];
  return ScalarField2D(g, std::move(out));
}

}  // namespace helmfluid::diffops
