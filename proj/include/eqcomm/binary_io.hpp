#pragma once

// Little-endian primitives and the bit-row packing shared by the GF2C,
// CMPX and protocol file formats. Rows are packed LSB-first: bit j of a
// row lives in byte j/8 at bit position j%8; each row is padded to a
// whole byte.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "eqcomm/error.hpp"

namespace eqcomm::io {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw InvalidArgument("truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4] = {};
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0)
    throw InvalidArgument(std::string("bad magic, expected ") + magic);
}

inline std::size_t row_bytes(std::size_t bits) { return (bits + 7) / 8; }

/// Writes the low `bits` bits of `row` (bits <= 64).
inline void write_bit_row(std::ostream& out, std::uint64_t row, std::size_t bits) {
  for (std::size_t byte = 0; byte < row_bytes(bits); ++byte)
    out.put(static_cast<char>((row >> (8 * byte)) & 0xFF));
}

inline std::uint64_t read_bit_row(std::istream& in, std::size_t bits) {
  std::uint64_t row = 0;
  for (std::size_t byte = 0; byte < row_bytes(bits); ++byte) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw InvalidArgument("truncated bit rows");
    row |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * byte);
  }
  if (bits < 64 && (row >> bits) != 0) throw InvalidArgument("nonzero padding bits");
  return row;
}

}  // namespace eqcomm::io
