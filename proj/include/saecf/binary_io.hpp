#ifndef SAECF_BINARY_IO_HPP
#define SAECF_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Little-endian primitives shared by the dataset and checkpoint formats.
// Byte order is composed explicitly so files are portable across hosts.

namespace saecf::io {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32(std::ostream& out, float v) {
  write_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(std::string("truncated read: ") + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw std::runtime_error(std::string("truncated read: ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(read_u32(in, what));
}

// Length-prefixed (u32) UTF-8 string.
inline void write_string(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what) {
  const std::uint32_t n = read_u32(in, what);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) {
    throw std::runtime_error(std::string("truncated read: ") + what);
  }
  return s;
}

// Bulk array helpers. On little-endian hosts these are single read/write
// calls; elsewhere they fall back to element-wise conversion.
inline void write_u32_array(std::ostream& out, const std::uint32_t* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_u32(out, data[i]);
  }
}

inline void read_u32_array(std::istream& in, std::uint32_t* data, std::size_t n, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4))) {
      throw std::runtime_error(std::string("truncated read: ") + what);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_u32(in, what);
  }
}

inline void write_f32_array(std::ostream& out, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  } else {
    for (std::size_t i = 0; i < n; ++i) write_f32(out, data[i]);
  }
}

inline void read_f32_array(std::istream& in, float* data, std::size_t n, const char* what) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4))) {
      throw std::runtime_error(std::string("truncated read: ") + what);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f32(in, what);
  }
}

inline void expect_magic(std::istream& in, std::string_view magic, const char* what) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic) {
    throw std::runtime_error(std::string("bad magic, not a ") + what + " file");
  }
}

}  // namespace saecf::io

#endif
