#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "helmfluid/field.hpp"
#include "helmfluid/manifest.hpp"
#include "helmfluid/spectral_sim.hpp"

namespace helmfluid::datagen {

struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

/// Dye carried by potential flow past circular obstacles, uniform left-to-right stream.
/// Coordinates are in cells; velocities in cells/frame.
struct BoundedDyeConfig {
  GridSpec grid{64, 64, 1.0, BoundaryMode::replicate};
  int frames = 20;
  int substeps = 4;
  double flow_speed = 1.0;
  int n_obstacles = 15;
  double radius_min = 2.0;
  double radius_max = 4.0;
  /// Minimum gap between obstacle surfaces and from the domain edges.
  double gap = 2.0;
  /// Obstacles are kept right of this column so inflow enters undisturbed.
  double inflow_margin = 8.0;
  int dye_modes = 4;
  /// When set, these obstacles are used instead of random placement.
  std::optional<std::vector<Circle>> obstacles;

  void validate() const;
};

/// Rejection-samples non-overlapping circles. Throws ConfigError after 1e4 failed tries.
std::vector<Circle> sample_obstacles(const BoundedDyeConfig& cfg, std::uint64_t seed);

/// 1 for fluid cells, 0 where the cell center lies strictly inside an obstacle.
BoundaryMask obstacle_mask(const GridSpec& grid, const std::vector<Circle>& obstacles);

/// u - i v = U (1 - sum R^2 / (z - z_k)^2), zero inside obstacles.
VectorField2D potential_flow(const GridSpec& grid, const std::vector<Circle>& obstacles, double speed);

struct DyeSequence {
  std::vector<Circle> obstacles;
  BoundaryMask mask;
  std::vector<ScalarField2D> frames;  // frame i at t = i frames
};

DyeSequence simulate_dye(const BoundedDyeConfig& cfg, std::uint64_t seed);

Manifest generate_bounded_dye_dataset(const BoundedDyeConfig& cfg, int n_sequences,
                                      const std::filesystem::path& out_dir, std::uint64_t master_seed,
                                      std::optional<SplitCounts> splits = std::nullopt, int workers = 1);

enum class TexturePattern { gaussian_blobs, grf };

/// Smooth periodic texture translated at a constant per-sequence velocity (exact Fourier shift).
struct TranslateConfig {
  GridSpec grid{32, 32, 1.0, BoundaryMode::periodic};
  int frames = 12;
  double speed_min = 0.5;
  double speed_max = 1.5;
  TexturePattern pattern = TexturePattern::gaussian_blobs;
  int n_blobs = 4;
  double blob_sigma = 2.5;  // cells
  double alpha = 3.0;       // grf only
  double tau = 0.5;         // grf only

  void validate() const;
};

std::string to_string(TexturePattern p);
TexturePattern texture_pattern_from_string(const std::string& s);

struct TranslateSequence {
  double vx = 0.0;
  double vy = 0.0;
  std::vector<ScalarField2D> frames;  // frame i = texture(x - i v)
};

TranslateSequence simulate_translate(const TranslateConfig& cfg, std::uint64_t seed);

Manifest generate_translate_dataset(const TranslateConfig& cfg, int n_sequences,
                                    const std::filesystem::path& out_dir, std::uint64_t master_seed,
                                    std::optional<SplitCounts> splits = std::nullopt, int workers = 1);

}  // namespace helmfluid::datagen
