#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "helmfluid/npy.hpp"

using namespace helmfluid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "helmfluid_test_npy";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_raw(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("round trip of a random 64x64 field is byte identical") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<double> d(64 * 64);
  for (auto& x : d) x = n(rng);
  const auto p = scratch("rt64.npy");
  write_npy(p, NpyArray::from_f64({64, 64}, d));
  const auto back = read_npy(p);
  CHECK(back.shape == std::vector<std::size_t>{64, 64});
  CHECK_FALSE(back.is_f32());
  CHECK(std::get<std::vector<double>>(back.data) == d);

  const auto p2 = scratch("rt64_again.npy");
  write_npy(p2, back);
  CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("header is a 64-byte aligned v1.0 dict literal") {
  const auto h = npy_header(NpyArray::from_f32({2, 3, 4}, std::vector<float>(24)));
  CHECK((10 + h.size()) % 64 == 0);
  CHECK(h.back() == '\n');
  CHECK(h.find("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3, 4), }") == 0);
}

TEST_CASE("float32 rank-4 dataset shape survives") {
  // Full-size navier-stokes training tensor: 1000 sequences of 20 frames at 64x64.
  const std::vector<std::size_t> shape{1000, 20, 64, 64};
  std::vector<float> values(1000ull * 20 * 64 * 64);
  for (std::size_t i = 0; i < values.size(); i += 4097) values[i] = static_cast<float>(i % 97) * 0.25f;
  const auto p = scratch("rank4.npy");
  write_npy(p, NpyArray::from_f32(shape, values));
  values.clear();
  values.shrink_to_fit();
  const auto back = read_npy(p);
  CHECK(back.shape == shape);
  CHECK(back.is_f32());
  const auto& v = std::get<std::vector<float>>(back.data);
  CHECK(v[4097 * 3] == static_cast<float>((4097 * 3) % 97) * 0.25f);
  fs::remove(p);
}

TEST_CASE("truncated payload is a format error") {
  const auto good = scratch("trunc_src.npy");
  write_npy(good, NpyArray::from_f64({8, 8}, std::vector<double>(64, 1.0)));
  auto bytes = slurp(good);
  bytes.resize(bytes.size() - 9);
  const auto bad = scratch("trunc.npy");
  write_raw(bad, bytes);
  CHECK_THROWS_AS(read_npy(bad), FormatError);
}

TEST_CASE("bad magic and fortran order are rejected") {
  const auto p = scratch("magic.npy");
  write_raw(p, std::string("\x93NUMPX\x01\x00", 8) + std::string(64, ' '));
  CHECK_THROWS_AS(read_npy(p), FormatError);

  auto bytes = slurp([] {
    const auto q = scratch("fortran_src.npy");
    write_npy(q, NpyArray::from_f64({4, 4}, std::vector<double>(16, 0.0)));
    return q;
  }());
  const auto pos = bytes.find("False");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 5, "True ");
  const auto q = scratch("fortran.npy");
  write_raw(q, bytes);
  CHECK_THROWS_AS(read_npy(q), UnsupportedLayoutError);
}

TEST_CASE("unsupported dtype and rank") {
  auto bytes = slurp([] {
    const auto q = scratch("dtype_src.npy");
    write_npy(q, NpyArray::from_f32({4, 4}, std::vector<float>(16, 0.0f)));
    return q;
  }());
  bytes.replace(bytes.find("<f4"), 3, ">f4");
  const auto q = scratch("dtype.npy");
  write_raw(q, bytes);
  CHECK_THROWS_AS(read_npy(q), UnsupportedLayoutError);
  CHECK_THROWS_AS(write_npy(scratch("rank1.npy"), NpyArray::from_f64({4, 1, 1, 1, 1}, std::vector<double>(4))),
                  UnsupportedLayoutError);
}

TEST_CASE("field helpers") {
  GridSpec g(4, 5);
  std::vector<double> d(20);
  for (int i = 0; i < 20; ++i) d[i] = i * 0.5;
  const auto p = scratch("field.npy");
  write_npy_field(p, ScalarField2D(g, d));
  const auto f = read_npy_field(p);
  CHECK(f.grid().height == 4);
  CHECK(f.grid().width == 5);
  CHECK(f.values() == d);
}
