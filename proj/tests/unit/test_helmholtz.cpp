#include "doctest.h"

#include <numbers>

#include "helmfluid/diffops.hpp"
#include "helmfluid/helmholtz.hpp"
#include "helmfluid/spectral.hpp"
#include "test_support.hpp"

using namespace helmfluid;
using namespace helmfluid::helmholtz;
using namespace helmfluid::testing;

namespace {

double inner(const VectorField2D& a, const VectorField2D& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.u().size(); ++i) s += a.u()[i] * b.u()[i] + a.v()[i] * b.v()[i];
  return s;
}

VectorField2D add(const VectorField2D& a, const VectorField2D& b) {
  std::vector<double> u(a.u_values()), v(a.v_values());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] += b.u()[i];
    v[i] += b.v()[i];
  }
  return VectorField2D(a.grid(), u, v);
}

}  // namespace

TEST_CASE("compose_helm basics") {
  GridSpec g(8, 8);
  const auto z = compose_helm(ScalarField2D(g), ScalarField2D(g));
  CHECK(max_abs(z.u()) == 0.0);
  CHECK(max_abs(z.v()) == 0.0);

  std::vector<double> x(g.size());
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) x[g.index(r, c)] = c;
  const auto f = compose_helm(ScalarField2D(g, x), ScalarField2D(g));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(f.u()[i] == doctest::Approx(1.0));
    CHECK(f.v()[i] == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(compose_helm(ScalarField2D(g), ScalarField2D(GridSpec(8, 9))), ShapeError);
}

TEST_CASE("divergence of the composed field only sees the potential") {
  GridSpec g(64, 64, 1.0 / 64, BoundaryMode::periodic);
  const auto phi = random_smooth(g, 21), a = random_smooth(g, 22);
  const auto f = compose_helm(phi, a);
  const auto lhs = diffops::divergence(f);
  const auto rhs = diffops::divergence(diffops::gradient(phi));
  CHECK(l2_diff(lhs.data(), rhs.data()) / l2(rhs.data()) <= 1e-10);
}

TEST_CASE("uniform field is purely harmonic on the torus") {
  GridSpec g(16, 16, 1.0, BoundaryMode::periodic);
  const auto parts = hodge_decompose_spectral(
      VectorField2D(g, std::vector<double>(g.size(), 3.0), std::vector<double>(g.size(), -1.0)));
  CHECK(parts.mean_u == doctest::Approx(3.0));
  CHECK(parts.mean_v == doctest::Approx(-1.0));
  CHECK(vec_l2(parts.curl_free) < 1e-12);
  CHECK(vec_l2(parts.div_free) < 1e-12);
}

TEST_CASE("non-periodic grids are rejected") {
  GridSpec g(8, 8, 1.0, BoundaryMode::replicate);
  CHECK_THROWS_AS(hodge_decompose_spectral(VectorField2D(g)), UnsupportedDomainError);
}

TEST_CASE("spectral round trip recovers gradient and curl parts") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GridSpec g(64, 64, 1.0 / 64, BoundaryMode::periodic);
    const auto phi = random_smooth(g, 40 + seed), a = random_smooth(g, 80 + seed);
    const auto grad = spectral::gradient(phi), curl = spectral::curl_of_scalar(a);
    const auto f = add(grad, curl);
    const auto parts = hodge_decompose_spectral(f);
    const double nf = vec_l2(f);
    CHECK(vec_l2_diff(parts.curl_free, grad) / vec_l2(grad) <= 1e-10);
    CHECK(vec_l2_diff(parts.div_free, curl) / vec_l2(curl) <= 1e-10);
    CHECK(vec_l2_diff(parts.reconstruct(), f) / nf <= 1e-10);
    CHECK(std::abs(inner(parts.curl_free, parts.div_free)) <= 1e-8 * nf * nf);
  }
}

TEST_CASE("pure gradient input has no solenoidal part") {
  GridSpec g(64, 64, 1.0, BoundaryMode::periodic);
  std::vector<double> s(g.size());
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) s[g.index(r, c)] = std::sin(2 * std::numbers::pi * c / 64.0);
  const auto f = diffops::gradient(ScalarField2D(g, s));
  const auto parts = hodge_decompose_spectral(f);
  CHECK(vec_l2(parts.div_free) / vec_l2(f) <= 1e-10);
}

TEST_CASE("decomposition invariants on a generic field") {
  GridSpec g(32, 48, 0.1, BoundaryMode::periodic);
  const auto f = VectorField2D(g, random_smooth(g, 1, 6, false).values(), random_smooth(g, 2, 6, false).values());
  const auto parts = hodge_decompose_spectral(f);
  const double nf = vec_l2(f);
  CHECK(vec_l2_diff(parts.reconstruct(), f) / nf <= 1e-10);
  CHECK(std::abs(inner(parts.curl_free, parts.div_free)) <= 1e-8 * nf * nf);

  // Idempotence.
  const auto again = hodge_decompose_spectral(parts.curl_free);
  CHECK(vec_l2(again.div_free) / vec_l2(parts.curl_free) <= 1e-10);
  const auto again2 = hodge_decompose_spectral(parts.div_free);
  CHECK(vec_l2(again2.curl_free) / vec_l2(parts.div_free) <= 1e-10);

  // Spectral divergence/curl vanish on the respective parts.
  const double scale_div = l2(spectral::divergence(parts.curl_free).data());
  CHECK(l2(spectral::divergence(parts.div_free).data()) <= 1e-10 * scale_div);
  const double scale_rot = l2(spectral::vorticity(parts.div_free).data());
  CHECK(l2(spectral::vorticity(parts.curl_free).data()) <= 1e-10 * scale_rot);
}

TEST_CASE("white noise with Nyquist content splits into orthogonal real parts") {
  for (auto [h, w] : {std::pair{16, 16}, std::pair{15, 20}, std::pair{9, 7}}) {
    CAPTURE(h);
    CAPTURE(w);
    GridSpec g(h, w, 1.0, BoundaryMode::periodic);
    std::mt19937_64 rng(h * 100 + w);
    std::normal_distribution<double> n01;
    std::vector<double> u(g.size()), v(g.size());
    for (auto& x : u) x = n01(rng);
    for (auto& x : v) x = n01(rng);
    const VectorField2D f(g, u, v);
    const auto parts = hodge_decompose_spectral(f);
    const double nf = vec_l2(f);
    CHECK(vec_l2_diff(parts.reconstruct(), f) / nf <= 1e-12);
    CHECK(std::abs(inner(parts.curl_free, parts.div_free)) <= 1e-10 * nf * nf);
    const auto again = hodge_decompose_spectral(parts.curl_free);
    CHECK(vec_l2_diff(again.curl_free, parts.curl_free) <= 1e-12 * nf);
    const auto again2 = hodge_decompose_spectral(parts.div_free);
    CHECK(vec_l2_diff(again2.div_free, parts.div_free) <= 1e-12 * nf);
  }
}
