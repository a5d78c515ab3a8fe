#include "helmfluid/datagen.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "helmfluid/advection.hpp"
#include "helmfluid/npy.hpp"
#include "helmfluid/parallel.hpp"
#include "helmfluid/spectral.hpp"

namespace helmfluid::datagen {

namespace {

constexpr int kMaxTries = 10000;

void write_frames(const std::filesystem::path& path, const std::vector<ScalarField2D>& frames) {
  const auto& g = frames.front().grid();
  std::vector<float> data;
  data.reserve(frames.size() * g.size());
  for (const auto& f : frames)
    for (double x : f.data()) data.push_back(static_cast<float>(x));
  try {
    write_npy(path, NpyArray::from_f32({frames.size(), static_cast<std::size_t>(g.height),
                                        static_cast<std::size_t>(g.width)},
                                       std::move(data)));
  } catch (const std::exception& e) {
    throw IoError("writing '" + path.string() + "': " + e.what());
  }
}

Manifest base_manifest(const std::string& kind, const GridSpec& grid, int frames, int n, SplitCounts counts,
                       std::uint64_t master_seed) {
  if (n < 1) throw ConfigError("n_sequences must be >= 1");
  if (counts.total() != n) throw ConfigError("split counts do not sum to n_sequences");
  Manifest m;
  m.kind = kind;
  m.grid = grid;
  m.frames = frames;
  m.record_every = 1.0;
  m.splits = counts;
  m.master_seed = master_seed;
  m.sequences.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& e = m.sequences[static_cast<std::size_t>(i)];
    e.file = sequence_filename(static_cast<std::size_t>(i));
    e.seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    e.split = i < counts.train ? Split::train : (i < counts.train + counts.val ? Split::val : Split::test);
  }
  return m;
}

struct DyePattern {
  std::vector<double> amp, kx, ky, phase;

  double operator()(double x, double y) const {
    double p = 0.5;
    for (std::size_t j = 0; j < amp.size(); ++j) p += amp[j] * std::sin(kx[j] * x + ky[j] * y + phase[j]);
    return p;
  }
};

DyePattern sample_pattern(int modes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DyePattern p;
  for (int j = 0; j < modes; ++j) {
    const double wavelength = 8.0 + 24.0 * unit(rng);
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double k = 2.0 * std::numbers::pi / wavelength;
    p.amp.push_back(0.4 / modes * (0.5 + unit(rng)));
    p.kx.push_back(k * std::cos(angle));
    p.ky.push_back(k * std::sin(angle));
    p.phase.push_back(2.0 * std::numbers::pi * unit(rng));
  }
  return p;
}

}  // namespace

void BoundedDyeConfig::validate() const {
  grid.validate();
  if (frames < 1) throw ConfigError("frames must be >= 1");
  if (substeps < 1) throw ConfigError("substeps must be >= 1");
  if (!(flow_speed >= 0.0)) throw ConfigError("flow_speed must be non-negative");
  if (n_obstacles < 0) throw ConfigError("n_obstacles must be >= 0");
  if (!(radius_min > 0.0) || radius_max < radius_min) throw ConfigError("invalid obstacle radius range");
  if (dye_modes < 0) throw ConfigError("dye_modes must be >= 0");
}

std::vector<Circle> sample_obstacles(const BoundedDyeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Circle> out;
  int tries = 0;
  while (static_cast<int>(out.size()) < cfg.n_obstacles) {
    if (++tries > kMaxTries) {
      throw ConfigError("obstacle placement failed after " + std::to_string(kMaxTries) + " tries (" +
                        std::to_string(out.size()) + " of " + std::to_string(cfg.n_obstacles) + " placed)");
    }
    Circle c;
    c.radius = cfg.radius_min + (cfg.radius_max - cfg.radius_min) * unit(rng);
    const double x0 = std::max(cfg.inflow_margin, cfg.gap) + c.radius;
    const double x1 = cfg.grid.width - 1 - cfg.gap - c.radius;
    const double y0 = cfg.gap + c.radius;
    const double y1 = cfg.grid.height - 1 - cfg.gap - c.radius;
    if (x1 < x0 || y1 < y0) continue;
    c.cx = x0 + (x1 - x0) * unit(rng);
    c.cy = y0 + (y1 - y0) * unit(rng);
    bool ok = true;
    for (const auto& o : out) {
      if (std::hypot(c.cx - o.cx, c.cy - o.cy) < c.radius + o.radius + cfg.gap) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(c);
  }
  return out;
}

BoundaryMask obstacle_mask(const GridSpec& grid, const std::vector<Circle>& obstacles) {
  std::vector<std::uint8_t> inside(grid.size(), 1);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      for (const auto& o : obstacles) {
        if (std::hypot(c - o.cx, r - o.cy) < o.radius) {
          inside[grid.index(r, c)] = 0;
          break;
        }
      }
    }
  }
  return BoundaryMask(grid, std::move(inside));
}

VectorField2D potential_flow(const GridSpec& grid, const std::vector<Circle>& obstacles, double speed) {
  const auto mask = obstacle_mask(grid, obstacles);
  std::vector<double> u(grid.size(), 0.0), v(grid.size(), 0.0);
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const std::size_t i = grid.index(r, c);
      if (!mask.at(r, c)) continue;
      std::complex<double> dw(1.0, 0.0);
      const std::complex<double> z(c, r);
      for (const auto& o : obstacles) {
        const auto d = z - std::complex<double>(o.cx, o.cy);
        dw -= o.radius * o.radius / (d * d);
      }
      dw *= speed;
      u[i] = dw.real();
      v[i] = -dw.imag();
    }
  }
  return VectorField2D(grid, std::move(u), std::move(v));
}

DyeSequence simulate_dye(const BoundedDyeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& g = cfg.grid;
  std::mt19937_64 rng(seed);
  DyeSequence seq{cfg.obstacles ? *cfg.obstacles : sample_obstacles(cfg, rng()), BoundaryMask(g), {}};
  seq.mask = obstacle_mask(g, seq.obstacles);
  const auto pattern = sample_pattern(cfg.dye_modes, rng);
  const auto vel = potential_flow(g, seq.obstacles, cfg.flow_speed);
  const double dt = 1.0 / cfg.substeps;

  std::vector<double> dye(g.size());
  for (int r = 0; r < g.height; ++r)
    for (int c = 0; c < g.width; ++c) dye[g.index(r, c)] = seq.mask.at(r, c) ? pattern(c, r) : 0.0;
  seq.frames.emplace_back(g, dye);

  // Backtrace points are fixed because the flow is steady.
  const auto back = advection::rk2_positions(VectorField2D(g, [&] {
    std::vector<double> nu(vel.u().begin(), vel.u().end());
    for (auto& x : nu) x = -x;
    return nu;
  }(), [&] {
    std::vector<double> nv(vel.v().begin(), vel.v().end());
    for (auto& x : nv) x = -x;
    return nv;
  }()), dt);

  double t = 0.0;
  for (int f = 1; f < cfg.frames; ++f) {
    for (int s = 0; s < cfg.substeps; ++s) {
      auto next = advection::semi_lagrangian_backtrace(ScalarField2D(g, dye), vel, dt).values();
      for (std::size_t i = 0; i < next.size(); ++i) {
        if (back.x[i] < 0.0) next[i] = pattern(back.x[i] - cfg.flow_speed * t, back.y[i]);
      }
      for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c)
          if (!seq.mask.at(r, c)) next[g.index(r, c)] = 0.0;
      dye = std::move(next);
      t += dt;
    }
    seq.frames.emplace_back(g, dye);
  }
  return seq;
}

Manifest generate_bounded_dye_dataset(const BoundedDyeConfig& cfg, int n_sequences,
                                      const std::filesystem::path& out_dir, std::uint64_t master_seed,
                                      std::optional<SplitCounts> splits, int workers) {
  cfg.validate();
  Manifest m = base_manifest("bounded_dye", cfg.grid, cfg.frames, n_sequences,
                             splits.value_or(SplitCounts::default_for(n_sequences)), master_seed);
  m.dt_solver = 1.0 / cfg.substeps;
  m.extra = {{"flow_speed", cfg.flow_speed},  {"n_obstacles", cfg.n_obstacles}, {"radius_min", cfg.radius_min},
             {"radius_max", cfg.radius_max},  {"gap", cfg.gap},                 {"inflow_margin", cfg.inflow_margin},
             {"dye_modes", cfg.dye_modes},    {"substeps", cfg.substeps}};
  for (std::size_t i = 0; i < m.sequences.size(); ++i) m.sequences[i].mask = mask_filename(i);
  std::filesystem::create_directories(out_dir);
  parallel_for(m.sequences.size(), workers, [&](std::size_t i) {
    const auto seq = simulate_dye(cfg, m.sequences[i].seed);
    write_frames(out_dir / m.sequences[i].file, seq.frames);
    std::vector<float> mask(cfg.grid.size());
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = seq.mask.inside()[k] ? 1.0f : 0.0f;
    const auto path = out_dir / *m.sequences[i].mask;
    try {
      write_npy(path, NpyArray::from_f32({static_cast<std::size_t>(cfg.grid.height),
                                          static_cast<std::size_t>(cfg.grid.width)},
                                         std::move(mask)));
    } catch (const std::exception& e) {
      throw IoError("writing '" + path.string() + "': " + e.what());
    }
  });
  m.save(out_dir);
  return m;
}

void TranslateConfig::validate() const {
  grid.validate();
  spectral::require_periodic(grid, "translating texture");
  if (frames < 1) throw ConfigError("frames must be >= 1");
  if (!(speed_min >= 0.0) || speed_max < speed_min) throw ConfigError("invalid speed range");
  if (pattern == TexturePattern::gaussian_blobs && (n_blobs < 1 || !(blob_sigma > 0.0))) {
    throw ConfigError("gaussian_blobs needs n_blobs >= 1 and blob_sigma > 0");
  }
}

std::string to_string(TexturePattern p) { return p == TexturePattern::grf ? "grf" : "gaussian_blobs"; }

TexturePattern texture_pattern_from_string(const std::string& s) {
  if (s == "grf") return TexturePattern::grf;
  if (s == "gaussian_blobs") return TexturePattern::gaussian_blobs;
  throw ConfigError("unknown texture pattern '" + s + "' (expected gaussian_blobs or grf)");
}

namespace {

// Sum of periodic Gaussian bumps (minimum-image distance), random centres and signs.
std::vector<double> blob_texture(const TranslateConfig& cfg, std::mt19937_64& rng) {
  const auto& g = cfg.grid;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> tex(g.size(), 0.0);
  for (int b = 0; b < cfg.n_blobs; ++b) {
    const double cx = g.width * unit(rng), cy = g.height * unit(rng);
    const double amp = unit(rng) < 0.5 ? -1.0 : 1.0;
    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        double dx = std::abs(c - cx), dy = std::abs(r - cy);
        dx = std::min(dx, g.width - dx);
        dy = std::min(dy, g.height - dy);
        tex[g.index(r, c)] += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.blob_sigma * cfg.blob_sigma));
      }
    }
  }
  return tex;
}

}  // namespace

TranslateSequence simulate_translate(const TranslateConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto& g = cfg.grid;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TranslateSequence seq;
  const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(rng);
  const double angle = 2.0 * std::numbers::pi * unit(rng);
  seq.vx = speed * std::cos(angle);
  seq.vy = speed * std::sin(angle);

  std::vector<double> tex;
  if (cfg.pattern == TexturePattern::grf) {
    spectral_sim::GRFSpec spec;
    spec.amplitude = 1.0;
    spec.alpha = cfg.alpha;
    spec.tau = cfg.tau;
    spec.seed = rng();
    tex = spectral_sim::sample_grf(spec, g).values();
  } else {
    tex = blob_texture(cfg, rng);
  }
  const auto st = field_stats(tex);
  for (auto& x : tex) x = st.std > 0.0 ? x / st.std : 0.0;

  auto hat = spectral::forward(tex, g.height, g.width);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      if ((g.height % 2 == 0 && r == g.height / 2) || (g.width % 2 == 0 && c == g.width / 2)) hat[g.index(r, c)] = 0.0;
    }
  }
  const auto kx = spectral::wavenumbers(g.width, g.spacing);
  const auto ky = spectral::wavenumbers(g.height, g.spacing);
  for (int f = 0; f < cfg.frames; ++f) {
    std::vector<spectral::Complex> shifted(hat);
    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        const double arg = -(kx[static_cast<std::size_t>(c)] * seq.vx + ky[static_cast<std::size_t>(r)] * seq.vy) *
                           g.spacing * f;
        shifted[g.index(r, c)] *= std::polar(1.0, arg);
      }
    }
    seq.frames.emplace_back(g, spectral::inverse_real(std::move(shifted), g.height, g.width));
  }
  return seq;
}

Manifest generate_translate_dataset(const TranslateConfig& cfg, int n_sequences,
                                    const std::filesystem::path& out_dir, std::uint64_t master_seed,
                                    std::optional<SplitCounts> splits, int workers) {
  cfg.validate();
  Manifest m = base_manifest(cfg.pattern == TexturePattern::grf ? "translating_grf" : "translating_gaussian", cfg.grid, cfg.frames, n_sequences,
                             splits.value_or(SplitCounts::default_for(n_sequences)), master_seed);
  m.extra = {{"pattern", to_string(cfg.pattern)}, {"speed_min", cfg.speed_min}, {"speed_max", cfg.speed_max}};
  if (cfg.pattern == TexturePattern::grf) {
    m.extra["alpha"] = cfg.alpha;
    m.extra["tau"] = cfg.tau;
  } else {
    m.extra["n_blobs"] = cfg.n_blobs;
    m.extra["blob_sigma"] = cfg.blob_sigma;
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::pair<double, double>> vel(m.sequences.size());
  parallel_for(m.sequences.size(), workers, [&](std::size_t i) {
    const auto seq = simulate_translate(cfg, m.sequences[i].seed);
    vel[i] = {seq.vx, seq.vy};
    write_frames(out_dir / m.sequences[i].file, seq.frames);
  });
  for (std::size_t i = 0; i < vel.size(); ++i) m.sequences[i].velocity = vel[i];
  m.save(out_dir);
  return m;
}

}  // namespace helmfluid::datagen
