#pragma once

// Named-array tensor container ("DMMT", version 1), all integers little-endian:
//   magic "DMMT" | u32 version | u32 array count |
//   per array: u16 name length, name bytes (UTF-8), u8 dtype (1=f32, 2=f64, 3=i64),
//              u8 ndim, ndim x u64 dims, values row-major.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dmmeeg/error.hpp"
#include "dmmeeg/numerics.hpp"

namespace dmmeeg {

enum class DType : std::uint8_t { f32 = 1, f64 = 2, i64 = 3 };

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>, std::vector<std::int64_t>> values;

  DType dtype() const { return static_cast<DType>(values.index() + 1); }
  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct TensorContainer {
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }

  const NamedArray& at(const std::string& name) const {
    if (const auto* a = find(name)) return *a;
    throw FormatError("container has no array named '" + name + "'");
  }

  void add(NamedArray a) { arrays.push_back(std::move(a)); }
};

inline constexpr std::uint32_t kContainerVersion = 1;

namespace container_detail {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void need(std::uint64_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("container truncated while reading ") + what + " at offset " + std::to_string(pos_));
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace container_detail

inline std::vector<std::uint8_t> encode_container(const TensorContainer& c) {
  using container_detail::put;
  std::set<std::string> names;
  std::vector<std::uint8_t> out{'D', 'M', 'M', 'T'};
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.arrays.size()));
  for (const auto& a : c.arrays) {
    if (!names.insert(a.name).second) throw FormatError("duplicate array name '" + a.name + "'");
    if (a.name.size() > 0xffff) throw FormatError("array name too long");
    if (a.dims.size() > 0xff) throw FormatError("too many dimensions in '" + a.name + "'");
    const auto count = a.element_count();
    const auto stored = std::visit([](const auto& v) { return static_cast<std::uint64_t>(v.size()); }, a.values);
    if (count != stored) throw FormatError("array '" + a.name + "' dims disagree with its value count");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(a.dtype()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(a.dims.size()));
    for (auto d : a.dims) put<std::uint64_t>(out, d);
    std::visit([&](const auto& v) { for (auto x : v) put(out, x); }, a.values);
  }
  return out;
}

inline TensorContainer decode_container(std::span<const std::uint8_t> bytes) {
  container_detail::Reader in(bytes);
  if (in.bytes(4, "magic") != "DMMT") throw FormatError("bad magic (not a DMMT container)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kContainerVersion) throw FormatError("unsupported container version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("array count");
  TensorContainer c;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    const auto len = in.get<std::uint16_t>("name length");
    a.name = in.bytes(len, "array name");
    if (!names.insert(a.name).second) throw FormatError("duplicate array name '" + a.name + "'");
    const auto dtype = in.get<std::uint8_t>("dtype");
    const auto ndim = in.get<std::uint8_t>("ndim");
    std::uint64_t n = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      a.dims.push_back(in.get<std::uint64_t>("dims"));
      if (a.dims.back() != 0 && n > (std::uint64_t{1} << 40) / a.dims.back())
        throw FormatError("array '" + a.name + "' is implausibly large");
      n *= a.dims.back();
    }
    auto read_values = [&](auto tag) {
      using T = decltype(tag);
      in.need(n * sizeof(T), "array values");
      std::vector<T> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = in.get<T>("array values");
      a.values = std::move(v);
    };
    switch (dtype) {
      case 1: read_values(float{}); break;
      case 2: read_values(double{}); break;
      case 3: read_values(std::int64_t{}); break;
      default: throw FormatError("array '" + a.name + "' has unknown dtype " + std::to_string(dtype));
    }
    c.arrays.push_back(std::move(a));
  }
  if (!in.done()) throw FormatError("trailing bytes after last array");
  return c;
}

/// Writes via a temporary file in the same directory and an atomic rename.
inline void write_container(const std::filesystem::path& path, const TensorContainer& c) {
  const auto bytes = encode_container(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline TensorContainer read_container(const std::filesystem::path& path) {
  try {
    return decode_container(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.detail());
  }
}

// ---------------------------------------------------------------------------
// Array conversions

/// Column vectors (compile-time single column) become 1-D arrays, everything
/// else 2-D row-major.
template <class Derived>
NamedArray make_array(std::string name, const Eigen::MatrixBase<Derived>& expr) {
  NamedArray a;
  a.name = std::move(name);
  if constexpr (Derived::ColsAtCompileTime == 1) {
    const Vector x = expr;
    a.dims = {static_cast<std::uint64_t>(x.size())};
    a.values = std::vector<double>(x.data(), x.data() + x.size());
  } else {
    const Matrix m = expr;
    a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    a.values = std::move(v);
  }
  return a;
}

inline NamedArray make_array(std::string name, std::vector<std::int64_t> v) {
  NamedArray a;
  a.name = std::move(name);
  a.dims = {static_cast<std::uint64_t>(v.size())};
  a.values = std::move(v);
  return a;
}

/// Values as doubles regardless of stored dtype.
inline std::vector<double> as_doubles(const NamedArray& a) {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, a.values);
}

inline Matrix to_matrix(const NamedArray& a) {
  if (a.dims.size() != 2) throw FormatError("array '" + a.name + "' is not two-dimensional");
  const auto v = as_doubles(a);
  const auto rows = static_cast<Eigen::Index>(a.dims[0]), cols = static_cast<Eigen::Index>(a.dims[1]);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline Vector to_vector(const NamedArray& a) {
  if (a.dims.size() != 1) throw FormatError("array '" + a.name + "' is not one-dimensional");
  const auto v = as_doubles(a);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<std::int64_t> to_ints(const NamedArray& a) {
  if (const auto* v = std::get_if<std::vector<std::int64_t>>(&a.values)) return *v;
  throw FormatError("array '" + a.name + "' is not i64");
}

/// Stores `m` (matrix or vector) into an existing same-shaped parameter array.
template <class Arr>
void load_into(Arr& target, const NamedArray& a) {
  if constexpr (is_a<Arr, Vector>) {
    const Vector v = to_vector(a);
    if (v.size() != target.size()) throw FormatError("array '" + a.name + "' has the wrong length");
    target = v;
  } else {
    const Matrix m = to_matrix(a);
    if (m.rows() != target.rows() || m.cols() != target.cols())
      throw FormatError("array '" + a.name + "' has the wrong shape");
    target = m;
  }
}

}  // namespace dmmeeg
