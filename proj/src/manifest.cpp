#include "helmfluid/manifest.hpp"

#include <cstdio>
#include <fstream>

namespace helmfluid {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val" || name == "valid" || name == "validation") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + name + "'");
}

SplitCounts SplitCounts::default_for(int n) {
  SplitCounts s;
  s.val = n / 7;
  s.test = n / 7;
  s.train = n - s.val - s.test;
  return s;
}

std::string sequence_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%05zu.npy", index);
  return buf;
}

std::string mask_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%05zu.npy", index);
  return buf;
}

nlohmann::json Manifest::to_json() const {
  using nlohmann::json;
  json j;
  j["schema_version"] = schema_version;
  j["kind"] = kind;
  j["grid"] = {{"height", grid.height}, {"width", grid.width}, {"spacing", grid.spacing},
               {"boundary", to_string(grid.boundary)}};
  j["nu"] = nu;
  j["dt_solver"] = dt_solver;
  j["record_every"] = record_every;
  j["frames"] = frames;
  j["forcing"] = {{"type", forcing}, {"amplitude", forcing_amplitude}};
  j["splits"] = {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}};
  j["master_seed"] = master_seed;
  json seqs = json::array();
  for (const auto& e : sequences) {
    json s = {{"file", e.file}, {"split", to_string(e.split)}, {"seed", e.seed}};
    if (e.mask) s["mask"] = *e.mask;
    if (e.velocity) s["velocity"] = {e.velocity->first, e.velocity->second};
    seqs.push_back(std::move(s));
  }
  j["sequences"] = std::move(seqs);
  if (!extra.empty()) j["extra"] = extra;
  return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) {
      throw ConfigError("unsupported manifest schema_version " + std::to_string(m.schema_version));
    }
    m.kind = j.value("kind", std::string{});
    const auto& g = j.at("grid");
    m.grid = GridSpec(g.at("height").get<int>(), g.at("width").get<int>(), g.value("spacing", 1.0),
                      boundary_mode_from_string(g.value("boundary", std::string("periodic"))));
    m.nu = j.value("nu", 0.0);
    m.dt_solver = j.value("dt_solver", 0.0);
    m.record_every = j.value("record_every", 0.0);
    m.frames = j.at("frames").get<int>();
    if (j.contains("forcing")) {
      m.forcing = j["forcing"].value("type", std::string("none"));
      m.forcing_amplitude = j["forcing"].value("amplitude", 0.0);
    }
    const auto& s = j.at("splits");
    m.splits = {s.value("train", 0), s.value("val", 0), s.value("test", 0)};
    m.master_seed = j.value("master_seed", std::uint64_t{0});
    for (const auto& e : j.at("sequences")) {
      ManifestEntry entry;
      entry.file = e.at("file").get<std::string>();
      entry.split = split_from_string(e.value("split", std::string("train")));
      entry.seed = e.value("seed", std::uint64_t{0});
      if (e.contains("mask")) entry.mask = e["mask"].get<std::string>();
      if (e.contains("velocity")) entry.velocity = {e["velocity"][0].get<double>(), e["velocity"][1].get<double>()};
      m.sequences.push_back(std::move(entry));
    }
    if (j.contains("extra")) m.extra = j["extra"];
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

void Manifest::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_json().dump(2) << "\n";
}

Manifest Manifest::load(const std::filesystem::path& path_or_dir) {
  auto path = path_or_dir;
  if (std::filesystem::is_directory(path)) path /= "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest '" + path.string() + "': " + e.what());
  }
  return from_json(j);
}

}  // namespace helmfluid
