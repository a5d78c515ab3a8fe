#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "helmfluid/field.hpp"
#include "helmfluid/manifest.hpp"

namespace helmfluid::spectral_sim {

enum class Forcing { none, fixed_trig };

/// Periodic vorticity Navier-Stokes configuration (rho = 1, pressure eliminated).
struct NSConfig {
  GridSpec grid{64, 64, 1.0 / 64, BoundaryMode::periodic};
  double nu = 1e-4;
  double dt_solver = 1e-3;
  double record_every = 1.0;
  int frames = 20;
  Forcing forcing = Forcing::fixed_trig;
  /// curl(g) = amplitude * (sin(2 pi (x + y) / L) + cos(2 pi (x + y) / L)).
  double forcing_amplitude = 0.1;
  bool dealias = true;
  /// Permits nu = 0 (conservation checks only).
  bool allow_inviscid = false;

  void validate() const;
  int steps_per_frame() const;

  /// 64^2, nu = 1e-4, 20 one-second frames.
  static NSConfig desk_profile();
  /// 64^2 output, nu = 1e-5.
  static NSConfig paper_profile();
};

/// Gaussian random field spectrum: coefficient std = amplitude * (|k|^2 + tau^2)^(-alpha/2),
/// with |k| the angular wavenumber of the grid.
struct GRFSpec {
  double amplitude = 37.04;
  double alpha = 2.5;
  double tau = 7.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Real, zero-mean field with Hermitian-symmetric Gaussian Fourier coefficients (Nyquist modes zeroed).
ScalarField2D sample_grf(const GRFSpec& spec, const GridSpec& grid);

/// Streamfunction inversion lap(psi) = -omega, u = (dpsi/dy, -dpsi/dx), spectral.
VectorField2D velocity_from_vorticity(const ScalarField2D& omega);

/// Pseudo-spectral vorticity stepper: Crank-Nicolson diffusion, AB2 advection (Euler on
/// the first step), optional 2/3-rule dealiasing.
class VorticitySolver {
 public:
  VorticitySolver(NSConfig cfg, const ScalarField2D& omega0);

  /// Advances one dt_solver step. Throws DivergenceError on non-finite state.
  void step();
  void advance(long steps);

  ScalarField2D vorticity() const;
  VectorField2D velocity() const;
  long steps_taken() const { return steps_; }
  double time() const { return static_cast<double>(steps_) * cfg_.dt_solver; }
  const NSConfig& config() const { return cfg_; }

  /// 0.5 * sum(u^2 + v^2) * cell area.
  double kinetic_energy() const;
  /// sum(omega^2) * cell area.
  double enstrophy() const;

 private:
  std::vector<std::complex<double>> nonlinear(const std::vector<std::complex<double>>& w_hat) const;

  NSConfig cfg_;
  std::vector<double> kx_, ky_, k2_;
  std::vector<double> dealias_;
  std::vector<std::complex<double>> omega_hat_;
  std::vector<std::complex<double>> forcing_hat_;
  std::vector<std::complex<double>> prev_nl_;
  long steps_ = 0;
};

/// Single step from a fresh state (Euler advection start).
ScalarField2D step_vorticity(const ScalarField2D& omega, const NSConfig& cfg);

/// Runs one sequence: frame i is the vorticity at t = (i + 1) * record_every.
std::vector<ScalarField2D> simulate_sequence(const NSConfig& cfg, const ScalarField2D& omega0);

/// Manifest for a dataset without generating it (seeds and splits assigned).
Manifest plan_ns_dataset(const NSConfig& cfg, const GRFSpec& grf, int n_sequences, std::uint64_t master_seed,
                         std::optional<SplitCounts> splits = std::nullopt);

/// Writes `seq_%05d.npy` (frames, H, W) float32 files and manifest.json.
/// Sequence i is a pure function of (cfg, grf, derive_seed(master_seed, i)).
Manifest generate_ns_dataset(const NSConfig& cfg, const GRFSpec& grf, int n_sequences,
                             const std::filesystem::path& out_dir, std::uint64_t master_seed,
                             std::optional<SplitCounts> splits = std::nullopt, int workers = 1);

}  // namespace helmfluid::spectral_sim
