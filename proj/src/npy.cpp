#include "helmfluid/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

namespace helmfluid {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_rank(std::size_t rank, const std::string& where) {
  if (rank < 2 || rank > 4) {
    throw UnsupportedLayoutError(where + ": only rank 2..4 arrays are supported, got rank " + std::to_string(rank));
  }
}

struct ParsedHeader {
  bool f32 = true;
  bool fortran = false;
  std::vector<std::size_t> shape;
};

ParsedHeader parse_header(const std::string& header, const std::string& where) {
  ParsedHeader out;
  std::smatch m;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex fortran_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  if (!std::regex_search(header, m, descr_re)) throw FormatError(where + ": header lacks 'descr'");
  const std::string descr = m[1];
  if (descr == "<f4") {
    out.f32 = true;
  } else if (descr == "<f8") {
    out.f32 = false;
  } else {
    throw UnsupportedLayoutError(where + ": unsupported dtype '" + descr + "' (want <f4 or <f8)");
  }
  if (!std::regex_search(header, m, fortran_re)) throw FormatError(where + ": header lacks 'fortran_order'");
  out.fortran = m[1] == "True";
  if (!std::regex_search(header, m, shape_re)) throw FormatError(where + ": header lacks 'shape'");
  std::stringstream ss(m[1].str());
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(tok.substr(b), &pos);
      if (v < 0) throw FormatError(where + ": negative dimension");
      out.shape.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw FormatError(where + ": unparsable shape entry '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

NpyArray NpyArray::from_f32(std::vector<std::size_t> shape, std::vector<float> values) {
  if (product(shape) != values.size()) throw ShapeError("NpyArray: shape does not match payload length");
  return NpyArray{std::move(shape), std::move(values)};
}

NpyArray NpyArray::from_f64(std::vector<std::size_t> shape, std::vector<double> values) {
  if (product(shape) != values.size()) throw ShapeError("NpyArray: shape does not match payload length");
  return NpyArray{std::move(shape), std::move(values)};
}

std::size_t NpyArray::numel() const { return product(shape); }

std::vector<double> NpyArray::to_f64() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data);
}

std::vector<float> NpyArray::to_f32() const {
  return std::visit(
      [](const auto& v) {
        std::vector<float> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
        return out;
      },
      data);
}

std::string npy_header(const NpyArray& array) {
  std::ostringstream dict;
  dict << "{'descr': '" << (array.is_f32() ? "<f4" : "<f8") << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    dict << array.shape[i];
    if (array.shape.size() == 1 || i + 1 < array.shape.size()) dict << ", ";
  }
  dict << "), }";
  std::string text = dict.str();
  // magic(6) + version(2) + length(2) + text + '\n' padded to a multiple of 64.
  const std::size_t base = kMagicLen + 2 + 2;
  std::size_t total = base + text.size() + 1;
  const std::size_t padded = (total + 63) / 64 * 64;
  text.append(padded - total, ' ');
  text.push_back('\n');
  return text;
}

void write_npy(const std::filesystem::path& path, const NpyArray& array) {
  check_rank(array.rank(), path.string());
  if (array.numel() != std::visit([](const auto& v) { return v.size(); }, array.data)) {
    throw ShapeError(path.string() + ": shape does not match payload length");
  }
  const std::string header = npy_header(array);
  if (header.size() > 0xFFFF) throw FormatError(path.string() + ": header too long for NPY v1.0");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, kMagicLen);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const std::uint16_t len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xFF), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::visit(
      [&out](const auto& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type)));
      },
      array.data);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

NpyArray read_npy(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + where + "'");
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0) throw FormatError(where + ": bad NPY magic");
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  if (!in) throw FormatError(where + ": truncated NPY preamble");
  std::size_t header_len = 0;
  if (version[0] == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8);
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8) | (static_cast<std::size_t>(b[2]) << 16) |
                 (static_cast<std::size_t>(b[3]) << 24);
  } else {
    throw FormatError(where + ": unsupported NPY version " + std::to_string(version[0]));
  }
  if (!in) throw FormatError(where + ": truncated NPY preamble");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError(where + ": truncated NPY header");
  const ParsedHeader h = parse_header(header, where);
  if (h.fortran) throw UnsupportedLayoutError(where + ": Fortran-order arrays are not supported");
  check_rank(h.shape.size(), where);
  const std::size_t n = product(h.shape);
  NpyArray arr;
  arr.shape = h.shape;
  auto read_payload = [&](auto& vec) {
    using V = typename std::decay_t<decltype(vec)>::value_type;
    vec.resize(n);
    in.read(reinterpret_cast<char*>(vec.data()), static_cast<std::streamsize>(n * sizeof(V)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(V)) {
      throw FormatError(where + ": truncated payload (expected " + std::to_string(n * sizeof(V)) + " bytes)");
    }
  };
  if (h.f32) {
    std::vector<float> v;
    read_payload(v);
    arr.data = std::move(v);
  } else {
    std::vector<double> v;
    read_payload(v);
    arr.data = std::move(v);
  }
  return arr;
}

ScalarField2D read_npy_field(const std::filesystem::path& path, BoundaryMode mode) {
  NpyArray a = read_npy(path);
  if (a.rank() != 2) throw ShapeError(path.string() + ": expected a rank-2 array");
  return ScalarField2D(GridSpec(static_cast<int>(a.shape[0]), static_cast<int>(a.shape[1]), 1.0, mode), a.to_f64());
}

void write_npy_field(const std::filesystem::path& path, const ScalarField2D& field, bool as_f32) {
  std::vector<std::size_t> shape{static_cast<std::size_t>(field.grid().height),
                                 static_cast<std::size_t>(field.grid().width)};
  if (as_f32) {
    std::vector<float> v(field.values().begin(), field.values().end());
    write_npy(path, NpyArray::from_f32(std::move(shape), std::move(v)));
  } else {
    write_npy(path, NpyArray::from_f64(std::move(shape), field.values()));
  }
}

VectorField2D read_npy_vector(const std::filesystem::path& path, BoundaryMode mode) {
  NpyArray a = read_npy(path);
  if (a.rank() != 3 || a.shape[0] != 2) throw ShapeError(path.string() + ": expected a (2, H, W) array");
  const auto all = a.to_f64();
  const std::size_t n = a.shape[1] * a.shape[2];
  GridSpec g(static_cast<int>(a.shape[1]), static_cast<int>(a.shape[2]), 1.0, mode);
  return VectorField2D(g, std::vector<double>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)),
                       std::vector<double>(all.begin() + static_cast<std::ptrdiff_t>(n), all.end()));
}

void write_npy_vector(const std::filesystem::path& path, const VectorField2D& field) {
  std::vector<double> all(field.u_values());
  all.insert(all.end(), field.v_values().begin(), field.v_values().end());
  write_npy(path, NpyArray::from_f64({2, static_cast<std::size_t>(field.grid().height),
                                      static_cast<std::size_t>(field.grid().width)},
                                     std::move(all)));
}

}  // namespace helmfluid
