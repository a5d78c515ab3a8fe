#include "doctest.h"

#include <random>

#include "helmfluid/field.hpp"

using namespace helmfluid;

TEST_CASE("grid rejects undersized or non-positive spacing") {
  CHECK_THROWS_AS(GridSpec(3, 8), ShapeError);
  CHECK_THROWS_AS(GridSpec(8, 8, 0.0), ShapeError);
  CHECK_NOTHROW(GridSpec(4, 4));
}

TEST_CASE("fields validate length and finiteness") {
  GridSpec g(4, 4);
  CHECK_THROWS_AS(ScalarField2D(g, std::vector<double>(15, 0.0)), ShapeError);
  std::vector<double> bad(16, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(ScalarField2D(g, bad), InputError);
  CHECK_THROWS_AS(VectorField2D(g, std::vector<double>(16), std::vector<double>(12)), ShapeError);
}

TEST_CASE("bilinear_sample of a constant field") {
  GridSpec g(16, 16);
  ScalarField2D f(g, std::vector<double>(g.size(), 7.0));
  CHECK(bilinear_sample(f, 3.4, 8.9) == doctest::Approx(7.0));
  CHECK(bilinear_sample(f, -5.0, 40.0) == doctest::Approx(7.0));
}

TEST_CASE("bilinear midpoint of a 2x2 ramp with clamped edges") {
  const std::vector<double> data{0.0, 1.0, 0.0, 1.0};
  CHECK(sample_bilinear<double>(data, 2, 2, BoundaryMode::replicate, 0.5, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("bilinear_sample reproduces a bilinear function exactly") {
  // Oracle: f(x, y) = x + 2y evaluated in closed form.
  GridSpec g(8, 8);
  std::vector<double> d(g.size());
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) d[g.index(r, c)] = c + 2.0 * r;
  ScalarField2D f(g, d);
  CHECK(bilinear_sample(f, 2.25, 3.75) == doctest::Approx(9.75).epsilon(1e-14));

  // Property: exact for a + b x + c y + d x y anywhere in the interior.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3, 3), pos(0.0, 7.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = coef(rng), b = coef(rng), cc = coef(rng), dd = coef(rng);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) d[g.index(r, c)] = a + b * c + cc * r + dd * c * r;
    ScalarField2D h(g, d);
    const double x = pos(rng), y = pos(rng);
    const double want = a + b * x + cc * y + dd * x * y;
    CHECK(std::abs(bilinear_sample(h, x, y) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("bilinear_sample at cell centers returns stored values") {
  GridSpec g(6, 5, 1.0, BoundaryMode::periodic);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> d(g.size());
  for (auto& x : d) x = n(rng);
  ScalarField2D f(g, d);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) CHECK(bilinear_sample(f, c, r) == f.at(r, c));
}

TEST_CASE("periodic sampling wraps") {
  GridSpec g(4, 4, 1.0, BoundaryMode::periodic);
  std::vector<double> d(16);
  for (int i = 0; i < 16; ++i) d[i] = i;
  ScalarField2D f(g, d);
  CHECK(bilinear_sample(f, -1.0, 0.0) == doctest::Approx(3.0));
  CHECK(bilinear_sample(f, 3.5, 0.0) == doctest::Approx(1.5));  // halfway between col 3 (3) and col 0 (0)
  CHECK(bilinear_sample(f, 0.0, 4.0) == doctest::Approx(0.0));
}

TEST_CASE("field_stats") {
  auto s = field_stats(std::vector<double>(9, 3.0));
  CHECK(s.mean == 3.0);
  CHECK(s.std == 0.0);
  CHECK(s.min == 3.0);
  CHECK(s.max == 3.0);

  s = field_stats(std::vector<double>{0, 1, 2, 3});
  CHECK(s.mean == doctest::Approx(1.5));
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));  // direct summation: (2.25+0.25+0.25+2.25)/4
  CHECK(s.min == 0.0);
  CHECK(s.max == 3.0);

  CHECK_THROWS_AS(field_stats(std::vector<double>{}), InputError);
}

TEST_CASE("mask downsampling keeps thin channels") {
  GridSpec g(4, 4);
  std::vector<std::uint8_t> inside(16, 0);
  inside[g.index(1, 2)] = 1;
  BoundaryMask m(g, inside);
  const auto c = m.downsample2();
  CHECK(c.grid().height == 2);
  CHECK(c.at(0, 1));
  CHECK_FALSE(c.at(0, 0));
  CHECK_FALSE(c.at(1, 1));
}
