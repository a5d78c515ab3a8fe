#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "helmfluid/field.hpp"

namespace helmfluid {

/// In-memory NPY v1.0 array: little-endian float32/float64, C order, rank 2..4.
struct NpyArray {
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  static NpyArray from_f32(std::vector<std::size_t> shape, std::vector<float> values);
  static NpyArray from_f64(std::vector<std::size_t> shape, std::vector<double> values);

  bool is_f32() const { return std::holds_alternative<std::vector<float>>(data); }
  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
  /// Copy of the payload widened to double.
  std::vector<double> to_f64() const;
  std::vector<float> to_f32() const;
};

NpyArray read_npy(const std::filesystem::path& path);
void write_npy(const std::filesystem::path& path, const NpyArray& array);

/// Header text (dict literal plus padding and trailing newline) for the given array.
std::string npy_header(const NpyArray& array);

ScalarField2D read_npy_field(const std::filesystem::path& path, BoundaryMode mode = BoundaryMode::replicate);
void write_npy_field(const std::filesystem::path& path, const ScalarField2D& field, bool as_f32 = false);

/// Reads a (2, H, W) array as (u, v).
VectorField2D read_npy_vector(const std::filesystem::path& path, BoundaryMode mode = BoundaryMode::periodic);
void write_npy_vector(const std::filesystem::path& path, const VectorField2D& field);

}  // namespace helmfluid
