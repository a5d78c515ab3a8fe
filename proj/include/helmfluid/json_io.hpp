#pragma once

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "helmfluid/error.hpp"

namespace helmfluid {

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed JSON in '" + p.string() + "': " + e.what());
  }
}

}  // namespace helmfluid
