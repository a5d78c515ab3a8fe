#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "helmfluid/field.hpp"

namespace helmfluid {

enum class Split { train, val, test };
std::string to_string(Split s);
Split split_from_string(const std::string& name);

struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;

  int total() const { return train + val + test; }
  /// 5:1:1 train/val/test proportions (floor(n/7) each for val and test).
  static SplitCounts default_for(int n);
};

struct ManifestEntry {
  std::string file;
  std::optional<std::string> mask;
  Split split = Split::train;
  std::uint64_t seed = 0;
  /// Generator velocity in cells/frame, for datasets with a known constant translation.
  std::optional<std::pair<double, double>> velocity;
};

/// Dataset directory descriptor written as manifest.json next to seq_%05d.npy files.
struct Manifest {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::string kind;  // "navier_stokes", "bounded_dye", "translating_grf"
  GridSpec grid;
  double nu = 0.0;
  double dt_solver = 0.0;
  double record_every = 0.0;
  int frames = 0;
  std::string forcing = "none";
  double forcing_amplitude = 0.0;
  SplitCounts splits;
  std::uint64_t master_seed = 0;
  std::vector<ManifestEntry> sequences;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& dir) const;
  static Manifest load(const std::filesystem::path& path_or_dir);
};

std::string sequence_filename(std::size_t index);
std::string mask_filename(std::size_t index);

}  // namespace helmfluid
