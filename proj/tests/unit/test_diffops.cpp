#include "doctest.h"

#include <numbers>

#include "helmfluid/diffops.hpp"
#include "test_support.hpp"

using namespace helmfluid;
using namespace helmfluid::diffops;
using helmfluid::testing::max_abs;
using helmfluid::testing::random_smooth;

namespace {

ScalarField2D from_fn(const GridSpec& g, auto fn) {
  std::vector<double> d(g.size());
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) d[g.index(r, c)] = fn(c * g.spacing, r * g.spacing);
  return ScalarField2D(g, std::move(d));
}

}  // namespace

TEST_CASE("gradient of constant and linear potentials") {
  GridSpec g(8, 8);
  const auto zero = gradient(ScalarField2D(g, std::vector<double>(g.size(), 4.0)));
  CHECK(max_abs(zero.u()) == 0.0);
  CHECK(max_abs(zero.v()) == 0.0);

  const auto ramp = gradient(from_fn(g, [](double x, double) { return x; }));
  // One-sided edges are exact for linear data as well.
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(ramp.u()[i] == doctest::Approx(1.0));
    CHECK(ramp.v()[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("gradient of a periodic sine is within the central-difference bound") {
  const int n = 64;
  GridSpec g(n, n, 1.0, BoundaryMode::periodic);
  const double k = 2.0 * std::numbers::pi / n;
  const auto grad = gradient(from_fn(g, [k](double x, double) { return std::sin(k * x); }));
  double err = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) err = std::max(err, std::abs(grad.u()[g.index(r, c)] - k * std::cos(k * c)));
  CHECK(err <= std::pow(k, 3) / 6.0);
  CHECK(max_abs(grad.v()) < 1e-15);
}

TEST_CASE("curl of a linear stream function is uniform flow") {
  GridSpec g(8, 8);
  const auto f = curl_of_scalar(from_fn(g, [](double, double y) { return y; }));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(f.u()[i] == doctest::Approx(1.0));
    CHECK(f.v()[i] == doctest::Approx(0.0));
  }
  const auto z = curl_of_scalar(ScalarField2D(g, std::vector<double>(g.size(), -2.0)));
  CHECK(max_abs(z.u()) == 0.0);
}

TEST_CASE("curl of a doubly periodic mode matches the analytic derivative to second order") {
  // A = sin(2 pi x/W) sin(2 pi y/H); (dA/dy, -dA/dx) in closed form.
  for (int n : {32, 64}) {
    GridSpec g(n, n, 1.0, BoundaryMode::periodic);
    const double k = 2.0 * std::numbers::pi / n;
    const auto f = curl_of_scalar(from_fn(g, [k](double x, double y) { return std::sin(k * x) * std::sin(k * y); }));
    const double scheme = std::sin(k) / k;  // exact symbol of the central stencil
    double err = 0.0;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double eu = k * std::sin(k * c) * std::cos(k * r);
        const double ev = -k * std::cos(k * c) * std::sin(k * r);
        err = std::max({err, std::abs(f.u()[g.index(r, c)] - eu), std::abs(f.v()[g.index(r, c)] - ev)});
        CHECK(f.u()[g.index(r, c)] == doctest::Approx(eu * scheme).epsilon(1e-12).scale(1.0));
      }
    }
    CHECK(err <= std::pow(k, 3) / 6.0 + 1e-15);
  }
}

TEST_CASE("divergence examples") {
  GridSpec g(8, 8);
  VectorField2D uniform(g, std::vector<double>(g.size(), 2.0), std::vector<double>(g.size(), -1.0));
  CHECK(max_abs(divergence(uniform).data()) <= 1e-15);

  std::vector<double> u(g.size()), v(g.size());
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      u[g.index(r, c)] = c;
      v[g.index(r, c)] = r;
    }
  const auto d = divergence(VectorField2D(g, u, v));
  for (int r = 1; r < 7; ++r)
    for (int c = 1; c < 7; ++c) CHECK(d.at(r, c) == doctest::Approx(2.0));
}

TEST_CASE("vorticity of solid-body rotation is 2") {
  GridSpec g(16, 16);
  const double cx = 7.5, cy = 7.5;
  std::vector<double> u(g.size()), v(g.size());
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      u[g.index(r, c)] = -(r - cy);
      v[g.index(r, c)] = c - cx;
    }
  const auto w = vorticity(VectorField2D(g, u, v));
  for (int r = 1; r < 15; ++r)
    for (int c = 1; c < 15; ++c) CHECK(w.at(r, c) == doctest::Approx(2.0));
  VectorField2D uniform(g, std::vector<double>(g.size(), 0.3), std::vector<double>(g.size(), 0.1));
  CHECK(max_abs(vorticity(uniform).data()) <= 1e-15);
}

TEST_CASE("discrete identities curl(grad) = 0 and div(curl) = 0") {
  for (auto mode : {BoundaryMode::periodic, BoundaryMode::replicate}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      GridSpec g(64, 64, 1.0 / 64, mode);
      const auto phi = random_smooth(g, seed);
      const auto a = random_smooth(g, seed + 100);
      // Tensor-product stencils commute, so the identities hold up to rounding everywhere,
      // including the one-sided replicate edges.
      CHECK(max_abs(vorticity(gradient(phi)).data()) <= 1e-10);
      CHECK(max_abs(divergence(curl_of_scalar(a)).data()) <= 1e-10);
    }
  }
}

TEST_CASE("operators are linear") {
  GridSpec g(16, 12, 0.5, BoundaryMode::replicate);
  const auto f = random_smooth(g, 7), h = random_smooth(g, 8);
  const double alpha = 1.7, beta = -0.4;
  std::vector<double> mix(g.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * f[i] + beta * h[i];
  const auto gm = gradient(ScalarField2D(g, mix));
  const auto gf = gradient(f), gh = gradient(h);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(gm.u()[i] == doctest::Approx(alpha * gf.u()[i] + beta * gh.u()[i]).epsilon(1e-12).scale(1.0));
    CHECK(gm.v()[i] == doctest::Approx(alpha * gf.v()[i] + beta * gh.v()[i]).epsilon(1e-12).scale(1.0));
  }
  const auto dm = divergence(VectorField2D(g, mix, f.values()));
  const auto d1 = divergence(VectorField2D(g, f.values(), std::vector<double>(g.size()))),
             d2 = divergence(VectorField2D(g, h.values(), std::vector<double>(g.size()))),
             d3 = divergence(VectorField2D(g, std::vector<double>(g.size()), f.values()));
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(dm[i] == doctest::Approx(alpha * d1[i] + beta * d2[i] + d3[i]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("second-order convergence on replicate grids") {
  // Analytic oracle: phi = sin(x) cos(y) on [0, 2) with spacing halved.
  auto max_err = [](int n) {
    GridSpec g(n, n, 2.0 / (n - 1), BoundaryMode::replicate);
    const auto grad = gradient(from_fn(g, [](double x, double y) { return std::sin(x) * std::cos(y); }));
    double err = 0.0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const double x = c * g.spacing, y = r * g.spacing;
        err = std::max(err, std::abs(grad.u()[g.index(r, c)] - std::cos(x) * std::cos(y)));
        err = std::max(err, std::abs(grad.v()[g.index(r, c)] + std::sin(x) * std::sin(y)));
      }
    return err;
  };
  const double coarse = max_err(17), fine = max_err(33);
  CHECK(coarse / fine >= 3.5);
}

TEST_CASE("adjoint kernels are transposes") {
  GridSpec g(6, 7, 1.0, BoundaryMode::replicate);
  const auto a = random_smooth(g, 1, 3, false), b = random_smooth(g, 2, 3, false);
  for (auto mode : {BoundaryMode::periodic, BoundaryMode::replicate}) {
    std::vector<double> da(g.size()), atb(g.size(), 0.0);
    derivative_x<double>(a.data(), 6, 7, 1.0, mode, da);
    derivative_x_adjoint<double>(b.data(), 6, 7, 1.0, mode, atb);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      lhs += da[i] * b[i];
      rhs += a[i] * atb[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    std::fill(atb.begin(), atb.end(), 0.0);
    derivative_y<double>(a.data(), 6, 7, 1.0, mode, da);
    derivative_y_adjoint<double>(b.data(), 6, 7, 1.0, mode, atb);
    lhs = rhs = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      lhs += da[i] * b[i];
      rhs += a[i] * atb[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}
