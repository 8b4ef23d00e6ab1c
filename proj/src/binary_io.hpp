#pragma once

// Little-endian primitives shared by the rawf64 and checkpoint containers.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mmdgen/error.hpp"

namespace mmdgen::detail {

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt read_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw FormatError(std::string("truncated file while reading ") + what);
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

inline void write_f64(std::ostream& out, double value) {
  write_le(out, std::bit_cast<std::uint64_t>(value));
}

inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& path) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0)
    throw FormatError(path + ": bad magic, expected \"" + std::string(magic, 4) + "\"");
}

}  // namespace mmdgen::detail
