#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eqcomm/error.hpp"

namespace eqcomm {

/// Fixed-length bit string. Position 0 is the leftmost character of the
/// textual form ("0101" has bits 1 and 3 set).
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t length) : length_(length), words_((length + 63) / 64, 0) {}

  static BitString from_string(std::string_view text) {
    BitString out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '1') {
        out.set(i, true);
      } else if (text[i] != '0') {
        throw InvalidArgument("bit string may only contain '0' and '1'");
      }
    }
    return out;
  }

  /// Low `length` bits of `value`, bit i of the integer at position i.
  static BitString from_word(std::uint64_t value, std::size_t length) {
    require(length <= 64, "from_word supports at most 64 bits");
    BitString out(length);
    if (length > 0) out.words_[0] = length == 64 ? value : value & ((std::uint64_t{1} << length) - 1);
    return out;
  }

  std::size_t size() const noexcept { return length_; }

  bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

  void set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value) {
      words_[i / 64] |= mask;
    } else {
      words_[i / 64] &= ~mask;
    }
  }

  std::size_t weight() const noexcept {
    std::size_t w = 0;
    for (auto word : words_) w += static_cast<std::size_t>(std::popcount(word));
    return w;
  }

  BitString& operator^=(const BitString& other) {
    require(length_ == other.length_, "bit string length mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
  }

  friend BitString operator^(BitString a, const BitString& b) { return a ^= b; }
  friend bool operator==(const BitString&, const BitString&) = default;

  /// Inverse of from_word; requires size() <= 64.
  std::uint64_t to_word() const {
    require(length_ <= 64, "to_word supports at most 64 bits");
    return words_.empty() ? 0 : words_[0];
  }

  std::string to_string() const {
    std::string s(length_, '0');
    for (std::size_t i = 0; i < length_; ++i)
      if (get(i)) s[i] = '1';
    return s;
  }

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

 private:
  std::size_t length_ = 0;
  std::vector<std::uint64_t> words_;
};

inline std::size_t hamming(const BitString& u, const BitString& v) {
  require(u.size() == v.size(), "hamming: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < u.words().size(); ++i)
    d += static_cast<std::size_t>(std::popcount(u.words()[i] ^ v.words()[i]));
  return d;
}

/// Inner product over GF(2) of two masks.
inline unsigned gf2_dot(std::uint64_t a, std::uint64_t b) {
  return static_cast<unsigned>(std::popcount(a & b) & 1);
}

}  // namespace eqcomm
