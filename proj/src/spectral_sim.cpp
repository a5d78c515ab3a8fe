#include "helmfluid/spectral_sim.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "helmfluid/npy.hpp"
#include "helmfluid/parallel.hpp"
#include "helmfluid/spectral.hpp"

namespace helmfluid::spectral_sim {

using spectral::Complex;

void NSConfig::validate() const {
  grid.validate();
  spectral::require_periodic(grid, "navier-stokes solver");
  if (!(nu > 0.0) && !(allow_inviscid && nu == 0.0)) throw ConfigError("nu must be positive");
  if (!(dt_solver > 0.0)) throw ConfigError("dt_solver must be positive");
  const double n = std::max(grid.height, grid.width);
  if (dt_solver > 1e-3 * 256.0 / n + 1e-15) {
    throw ConfigError("dt_solver exceeds the CFL guard (1e-3 at 256^2, scaled by resolution)");
  }
  if (frames < 1) throw ConfigError("frames must be >= 1");
  if (!(record_every >= dt_solver)) throw ConfigError("record_every must be >= dt_solver");
}

int NSConfig::steps_per_frame() const { return static_cast<int>(std::lround(record_every / dt_solver)); }

NSConfig NSConfig::desk_profile() { return NSConfig{}; }

NSConfig NSConfig::paper_profile() {
  NSConfig c;
  c.nu = 1e-5;
  return c;
}

void GRFSpec::validate() const {
  if (!(alpha > 1.0)) throw ConfigError("GRF smoothness exponent alpha must exceed 1");
  if (amplitude < 0.0) throw ConfigError("GRF amplitude must be non-negative");
}

ScalarField2D sample_grf(const GRFSpec& spec, const GridSpec& grid) {
  spec.validate();
  spectral::require_periodic(grid, "sample_grf");
  const int h = grid.height, w = grid.width;
  const auto kx = spectral::wavenumbers(w, grid.spacing);
  const auto ky = spectral::wavenumbers(h, grid.spacing);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<Complex> raw(grid.size());
  for (auto& c : raw) {
    const double re = normal(rng);
    c = Complex(re, normal(rng));
  }
  std::vector<Complex> coef(grid.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int fr = spectral::frequency(r, h), fc = spectral::frequency(c, w);
      const bool nyquist = (h % 2 == 0 && fr == -h / 2) || (w % 2 == 0 && fc == -w / 2);
      if (nyquist || (fr == 0 && fc == 0)) continue;
      const int rr = (h - r) % h, cc = (w - c) % w;
      // Hermitian symmetrization keeps unit variance: (z + conj(z'))/sqrt(2).
      const Complex z = (raw[grid.index(r, c)] + std::conj(raw[grid.index(rr, cc)])) / std::sqrt(2.0);
      const double k2 = kx[static_cast<std::size_t>(c)] * kx[static_cast<std::size_t>(c)] +
                        ky[static_cast<std::size_t>(r)] * ky[static_cast<std::size_t>(r)];
      coef[grid.index(r, c)] = spec.amplitude * std::pow(k2 + spec.tau * spec.tau, -spec.alpha / 2.0) * z;
    }
  }
  // Unnormalized inverse: physical value = sum of modes.
  spectral::fft2(coef, h, w, true);
  std::vector<double> out(grid.size());
  const double n = static_cast<double>(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = coef[i].real() * n;
  return ScalarField2D(grid, std::move(out));
}

namespace {

struct Wavenumbers {
  std::vector<double> kx, ky, k2;
};

Wavenumbers wavenumbers_for(const GridSpec& g) {
  Wavenumbers w;
  const auto kx = spectral::wavenumbers(g.width, g.spacing);
  const auto ky = spectral::wavenumbers(g.height, g.spacing);
  w.kx.resize(g.size());
  w.ky.resize(g.size());
  w.k2.resize(g.size());
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const std::size_t i = g.index(r, c);
      w.kx[i] = kx[static_cast<std::size_t>(c)];
      w.ky[i] = ky[static_cast<std::size_t>(r)];
      w.k2[i] = w.kx[i] * w.kx[i] + w.ky[i] * w.ky[i];
    }
  }
  return w;
}

// Zeroes the mean and Nyquist rows/columns.
void project_resolved(std::vector<Complex>& s, const GridSpec& g) {
  s[0] = 0.0;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const bool nyq = (g.height % 2 == 0 && r == g.height / 2) || (g.width % 2 == 0 && c == g.width / 2);
      if (nyq) s[g.index(r, c)] = 0.0;
    }
  }
}

void velocity_hat(const std::vector<Complex>& w_hat, const Wavenumbers& k, std::vector<Complex>& u_hat,
                  std::vector<Complex>& v_hat) {
  u_hat.resize(w_hat.size());
  v_hat.resize(w_hat.size());
  for (std::size_t i = 0; i < w_hat.size(); ++i) {
    if (k.k2[i] == 0.0) {
      u_hat[i] = v_hat[i] = 0.0;
      continue;
    }
    const Complex psi = w_hat[i] / k.k2[i];
    u_hat[i] = Complex(0.0, k.ky[i]) * psi;
    v_hat[i] = -Complex(0.0, k.kx[i]) * psi;
  }
}

}  // namespace

VectorField2D velocity_from_vorticity(const ScalarField2D& omega) {
  const auto& g = omega.grid();
  spectral::require_periodic(g, "velocity_from_vorticity");
  auto w_hat = spectral::forward(omega.data(), g.height, g.width);
  project_resolved(w_hat, g);
  const auto k = wavenumbers_for(g);
  std::vector<Complex> u_hat, v_hat;
  velocity_hat(w_hat, k, u_hat, v_hat);
  return VectorField2D(g, spectral::inverse_real(std::move(u_hat), g.height, g.width),
                       spectral::inverse_real(std::move(v_hat), g.height, g.width));
}

VorticitySolver::VorticitySolver(NSConfig cfg, const ScalarField2D& omega0) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& g = cfg_.grid;
  if (!(omega0.grid().height == g.height && omega0.grid().width == g.width)) {
    throw ShapeError("initial vorticity does not match solver grid");
  }
  const auto k = wavenumbers_for(g);
  kx_ = k.kx;
  ky_ = k.ky;
  k2_ = k.k2;
  dealias_.assign(g.size(), 1.0);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const int fr = std::abs(spectral::frequency(r, g.height));
      const int fc = std::abs(spectral::frequency(c, g.width));
      const bool keep = !cfg_.dealias || (3 * fr < g.height && 3 * fc < g.width);
      dealias_[g.index(r, c)] = keep ? 1.0 : 0.0;
    }
  }
  omega_hat_ = spectral::forward(omega0.data(), g.height, g.width);
  project_resolved(omega_hat_, g);

  forcing_hat_.assign(g.size(), 0.0);
  if (cfg_.forcing == Forcing::fixed_trig && cfg_.forcing_amplitude != 0.0) {
    const double length = g.width * g.spacing;
    std::vector<double> f(g.size());
    for (int r = 0; r < g.height; ++r) {
      for (int c = 0; c < g.width; ++c) {
        const double arg = 2.0 * std::numbers::pi * (c * g.spacing + r * g.spacing) / length;
        f[g.index(r, c)] = cfg_.forcing_amplitude * (std::sin(arg) + std::cos(arg));
      }
    }
    forcing_hat_ = spectral::forward(f, g.height, g.width);
  }
}

std::vector<Complex> VorticitySolver::nonlinear(const std::vector<Complex>& w_hat) const {
  const auto& g = cfg_.grid;
  std::vector<Complex> u_hat, v_hat;
  velocity_hat(w_hat, Wavenumbers{kx_, ky_, k2_}, u_hat, v_hat);
  std::vector<Complex> wx(w_hat.size()), wy(w_hat.size());
  for (std::size_t i = 0; i < w_hat.size(); ++i) {
    wx[i] = Complex(0.0, kx_[i]) * w_hat[i];
    wy[i] = Complex(0.0, ky_[i]) * w_hat[i];
  }
  const auto u = spectral::inverse_real(std::move(u_hat), g.height, g.width);
  const auto v = spectral::inverse_real(std::move(v_hat), g.height, g.width);
  const auto dwx = spectral::inverse_real(std::move(wx), g.height, g.width);
  const auto dwy = spectral::inverse_real(std::move(wy), g.height, g.width);
  std::vector<double> adv(g.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = u[i] * dwx[i] + v[i] * dwy[i];
  auto n_hat = spectral::forward(adv, g.height, g.width);
  for (std::size_t i = 0; i < n_hat.size(); ++i) n_hat[i] *= dealias_[i];
  n_hat[0] = 0.0;
  return n_hat;
}

void VorticitySolver::step() {
  const double dt = cfg_.dt_solver;
  auto nl = nonlinear(omega_hat_);
  const bool first = prev_nl_.empty();
  for (std::size_t i = 0; i < omega_hat_.size(); ++i) {
    const Complex advect = first ? nl[i] : 1.5 * nl[i] - 0.5 * prev_nl_[i];
    const double lap = cfg_.nu * k2_[i] * dt / 2.0;
    omega_hat_[i] = ((1.0 - lap) * omega_hat_[i] + dt * (forcing_hat_[i] - advect)) / (1.0 + lap);
  }
  omega_hat_[0] = 0.0;
  prev_nl_ = std::move(nl);
  ++steps_;
  for (const auto& c : omega_hat_) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw DivergenceError("vorticity solver produced non-finite state at step " + std::to_string(steps_));
    }
  }
}

void VorticitySolver::advance(long steps) {
  for (long s = 0; s < steps; ++s) step();
}

ScalarField2D VorticitySolver::vorticity() const {
  const auto& g = cfg_.grid;
  return ScalarField2D(g, spectral::inverse_real(omega_hat_, g.height, g.width));
}

VectorField2D VorticitySolver::velocity() const {
  const auto& g = cfg_.grid;
  std::vector<Complex> u_hat, v_hat;
  velocity_hat(omega_hat_, Wavenumbers{kx_, ky_, k2_}, u_hat, v_hat);
  return VectorField2D(g, spectral::inverse_real(std::move(u_hat), g.height, g.width),
                       spectral::inverse_real(std::move(v_hat), g.height, g.width));
}

double VorticitySolver::kinetic_energy() const {
  const auto vel = velocity();
  double e = 0.0;
  for (std::size_t i = 0; i < vel.u().size(); ++i) e += vel.u()[i] * vel.u()[i] + vel.v()[i] * vel.v()[i];
  return 0.5 * e * cfg_.grid.spacing * cfg_.grid.spacing;
}

double VorticitySolver::enstrophy() const {
  const auto w = vorticity();
  double e = 0.0;
  for (double x : w.data()) e += x * x;
  return e * cfg_.grid.spacing * cfg_.grid.spacing;
}

ScalarField2D step_vorticity(const ScalarField2D& omega, const NSConfig& cfg) {
  VorticitySolver solver(cfg, omega);
  solver.step();
  return solver.vorticity();
}

std::vector<ScalarField2D> simulate_sequence(const NSConfig& cfg, const ScalarField2D& omega0) {
  VorticitySolver solver(cfg, omega0);
  std::vector<ScalarField2D> frames;
  frames.reserve(static_cast<std::size_t>(cfg.frames));
  const int per = cfg.steps_per_frame();
  for (int f = 0; f < cfg.frames; ++f) {
    solver.advance(per);
    frames.push_back(solver.vorticity());
  }
  return frames;
}

Manifest plan_ns_dataset(const NSConfig& cfg, const GRFSpec& grf, int n_sequences, std::uint64_t master_seed,
                         std::optional<SplitCounts> splits) {
  cfg.validate();
  grf.validate();
  if (n_sequences < 1) throw ConfigError("n_sequences must be >= 1");
  const SplitCounts counts = splits.value_or(SplitCounts::default_for(n_sequences));
  if (counts.total() != n_sequences) throw ConfigError("split counts do not sum to n_sequences");

  Manifest m;
  m.kind = "navier_stokes";
  m.grid = cfg.grid;
  m.nu = cfg.nu;
  m.dt_solver = cfg.dt_solver;
  m.record_every = cfg.record_every;
  m.frames = cfg.frames;
  m.forcing = cfg.forcing == Forcing::fixed_trig ? "fixed_trig" : "none";
  m.forcing_amplitude = cfg.forcing == Forcing::fixed_trig ? cfg.forcing_amplitude : 0.0;
  m.splits = counts;
  m.master_seed = master_seed;
  m.extra = {{"grf", {{"amplitude", grf.amplitude}, {"alpha", grf.alpha}, {"tau", grf.tau}}},
             {"dealias", cfg.dealias}};
  m.sequences.resize(static_cast<std::size_t>(n_sequences));
  for (int i = 0; i < n_sequences; ++i) {
    auto& e = m.sequences[static_cast<std::size_t>(i)];
    e.file = sequence_filename(static_cast<std::size_t>(i));
    e.seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    e.split = i < counts.train ? Split::train : (i < counts.train + counts.val ? Split::val : Split::test);
  }
  return m;
}

Manifest generate_ns_dataset(const NSConfig& cfg, const GRFSpec& grf, int n_sequences,
                             const std::filesystem::path& out_dir, std::uint64_t master_seed,
                             std::optional<SplitCounts> splits, int workers) {
  Manifest m = plan_ns_dataset(cfg, grf, n_sequences, master_seed, splits);
  std::filesystem::create_directories(out_dir);

  parallel_for(static_cast<std::size_t>(n_sequences), workers, [&](std::size_t i) {
    GRFSpec spec = grf;
    spec.seed = m.sequences[i].seed;
    const auto frames = simulate_sequence(cfg, sample_grf(spec, cfg.grid));
    std::vector<float> data;
    data.reserve(frames.size() * cfg.grid.size());
    for (const auto& f : frames)
      for (double x : f.data()) data.push_back(static_cast<float>(x));
    const auto path = out_dir / m.sequences[i].file;
    try {
      write_npy(path, NpyArray::from_f32({frames.size(), static_cast<std::size_t>(cfg.grid.height),
                                          static_cast<std::size_t>(cfg.grid.width)},
                                         std::move(data)));
    } catch (const std::exception& e) {
      throw IoError("writing '" + path.string() + "': " + e.what());
    }
  });
  m.save(out_dir);
  return m;
}

}  // namespace helmfluid::spectral_sim
