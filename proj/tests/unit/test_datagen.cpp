#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "helmfluid/datagen.hpp"
#include "helmfluid/error.hpp"
#include "helmfluid/npy.hpp"
#include "helmfluid/spectral.hpp"
#include "test_support.hpp"

using namespace helmfluid;
using namespace helmfluid::datagen;
using helmfluid::testing::max_abs;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("helmfluid_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("obstacle sampling") {
  BoundedDyeConfig c;
  const auto obs = sample_obstacles(c, 9);
  REQUIRE(obs.size() == 15);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    CHECK(obs[i].radius >= c.radius_min);
    CHECK(obs[i].radius <= c.radius_max);
    CHECK(obs[i].cx - obs[i].radius >= c.inflow_margin - 1e-12);
    for (std::size_t j = i + 1; j < obs.size(); ++j) {
      CHECK(std::hypot(obs[i].cx - obs[j].cx, obs[i].cy - obs[j].cy) >= obs[i].radius + obs[j].radius);
    }
  }
  CHECK(sample_obstacles(c, 9).size() == obs.size());
  CHECK(sample_obstacles(c, 9)[3].cx == obs[3].cx);

  c.n_obstacles = 400;
  CHECK_THROWS_AS(sample_obstacles(c, 1), ConfigError);
}

TEST_CASE("mask matches obstacle geometry") {
  const GridSpec g{32, 32};
  const std::vector<Circle> obs{{16, 16, 5}};
  const auto mask = obstacle_mask(g, obs);
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) CHECK(mask.at(r, c) == !(std::hypot(c - 16.0, r - 16.0) < 5.0));
  const auto vel = potential_flow(g, obs, 1.0);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if (!mask.at(r, c)) {
        CHECK(vel.u()[g.index(r, c)] == 0.0);
        CHECK(vel.v()[g.index(r, c)] == 0.0);
      }
    }
  }
}

TEST_CASE("potential flow has no normal velocity on the circle") {
  // Oracle: u - iv = U (1 - R^2 / z^2) gives u.n = U cos(t)(1 - 1) = 0 at |z| = R.
  const GridSpec g{64, 64};
  const double cx = 32, cy = 32, radius = 6;
  const auto vel = potential_flow(g, {{cx, cy, radius}}, 1.0);
  double far = 0.0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const double dx = c - cx, dy = r - cy, d = std::hypot(dx, dy);
      if (d < radius) continue;
      const double un = (vel.u()[g.index(r, c)] * dx + vel.v()[g.index(r, c)] * dy) / d;
      // Radial velocity = U cos(theta) (1 - R^2/d^2).
      const double expect = dx / d * (1.0 - radius * radius / (d * d));
      CHECK(un == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
      if (d > 28) far = std::max(far, std::abs(vel.u()[g.index(r, c)] - 1.0));
    }
  }
  CHECK(far < 0.05);
}

TEST_CASE("no obstacles: pure translation") {
  BoundedDyeConfig c;
  c.grid = GridSpec{32, 32};
  c.obstacles = std::vector<Circle>{};
  c.substeps = 1;
  c.flow_speed = 1.0;
  c.frames = 6;
  const auto seq = simulate_dye(c, 4);
  REQUIRE(seq.frames.size() == 6);
  CHECK(seq.mask.count_inside() == c.grid.size());
  for (int f = 1; f < c.frames; ++f) {
    for (int r = 0; r < c.grid.height; ++r) {
      for (int col = 0; col < c.grid.width; ++col) {
        const double got = seq.frames[static_cast<std::size_t>(f)].at(r, col);
        // Integer shift of one cell per frame: frame f at column col equals frame 0 at col - f
        // when that column exists.
        if (col - f >= 0) CHECK(got == doctest::Approx(seq.frames[0].at(r, col - f)).epsilon(1e-12));
      }
    }
  }
  // Inflow column continues the pattern: column 0 of frame 2 equals column 1 of frame 3.
  for (int r = 0; r < c.grid.height; ++r)
    CHECK(seq.frames[2].at(r, 0) == doctest::Approx(seq.frames[3].at(r, 1)).epsilon(1e-12));
}

TEST_CASE("leading stagnation point holds dye") {
  BoundedDyeConfig c;
  c.grid = GridSpec{48, 48};
  c.obstacles = std::vector<Circle>{{24, 24, 6}};
  c.frames = 8;
  const auto seq = simulate_dye(c, 17);
  const int sr = 24, sc = 24 - 6;
  CHECK(seq.mask.at(sr, sc));
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    const double a = seq.frames[f - 1].at(sr, sc), b = seq.frames[f].at(sr, sc);
    CHECK(std::abs(b - a) < 0.01 * std::abs(a));
  }
  for (const auto& fr : seq.frames)
    for (int r = 0; r < c.grid.height; ++r)
      for (int col = 0; col < c.grid.width; ++col)
        if (!seq.mask.at(r, col)) CHECK(fr.at(r, col) == 0.0);
}

TEST_CASE("generate_bounded_dye_dataset") {
  BoundedDyeConfig c;
  c.grid = GridSpec{32, 32};
  c.n_obstacles = 3;
  c.frames = 4;
  const auto a = scratch("dye_a"), b = scratch("dye_b");
  const auto m = generate_bounded_dye_dataset(c, 2, a, 5, SplitCounts{1, 1, 0});
  generate_bounded_dye_dataset(c, 2, b, 5, SplitCounts{1, 1, 0}, 2);
  REQUIRE(m.sequences.size() == 2);
  CHECK(m.kind == "bounded_dye");
  CHECK(m.sequences[1].mask.value() == "mask_00001.npy");
  const auto arr = read_npy(a / "seq_00000.npy");
  CHECK(arr.shape == std::vector<std::size_t>{4, 32, 32});
  const auto mask = read_npy(a / "mask_00000.npy");
  CHECK(mask.shape == std::vector<std::size_t>{32, 32});
  const auto md = mask.to_f64(), sd = arr.to_f64();
  for (std::size_t i = 0; i < md.size(); ++i)
    if (md[i] == 0.0) CHECK(sd[i] == 0.0);
  CHECK(read_npy(a / "seq_00001.npy").to_f64() == read_npy(b / "seq_00001.npy").to_f64());
  CHECK(Manifest::load(a).sequences[0].mask.value() == "mask_00000.npy");
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("translating texture") {
  TranslateConfig c;
  SUBCASE("gaussian blobs") {}
  SUBCASE("grf") { c.pattern = TexturePattern::grf; }
  const auto seq = simulate_translate(c, 3);
  REQUIRE(seq.frames.size() == static_cast<std::size_t>(c.frames));
  const double speed = std::hypot(seq.vx, seq.vy);
  CHECK(speed >= c.speed_min);
  CHECK(speed <= c.speed_max);
  CHECK(field_stats(seq.frames[0]).std == doctest::Approx(1.0).epsilon(1e-6));

  // Oracle: a naive DFT evaluation of frame 0 at the shifted points reproduces frame f.
  const auto& g = c.grid;
  const auto hat = spectral::forward(seq.frames[0].data(), g.height, g.width);
  const int f = 3;
  double err = 0.0;
  for (int r = 0; r < g.height; r += 5) {
    for (int col = 0; col < g.width; col += 5) {
      const double x = col - f * seq.vx, y = r - f * seq.vy;
      std::complex<double> s = 0.0;
      for (int kr = 0; kr < g.height; ++kr)
        for (int kc = 0; kc < g.width; ++kc)
          s += hat[g.index(kr, kc)] *
               std::polar(1.0, 2.0 * std::numbers::pi *
                                   (spectral::frequency(kc, g.width) * x / g.width +
                                    spectral::frequency(kr, g.height) * y / g.height));
      err = std::max(err, std::abs(s.real() / static_cast<double>(g.size()) - seq.frames[f].at(r, col)));
    }
  }
  CHECK(err < 1e-10);

  const auto dir = scratch("translate");
  const auto m = generate_translate_dataset(c, 3, dir, 1, SplitCounts{1, 1, 1});
  CHECK(m.kind == (c.pattern == TexturePattern::grf ? "translating_grf" : "translating_gaussian"));
  const auto loaded = Manifest::load(dir);
  REQUIRE(loaded.sequences[2].velocity.has_value());
  const auto again = simulate_translate(c, loaded.sequences[2].seed);
  CHECK(loaded.sequences[2].velocity->first == doctest::Approx(again.vx));
  std::filesystem::remove_all(dir);
}
