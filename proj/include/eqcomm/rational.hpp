#pragma once

// Exact rational helpers. Everything on the classical side (error
// bounds, band checks, parameter ceilings) goes through these.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include <boost/rational.hpp>

#include "eqcomm/error.hpp"

namespace eqcomm {

using Rational = boost::rational<std::int64_t>;

/// Parses "p/q" or an integer "p". Rejects zero denominators and trailing junk.
inline Rational parse_rational(const std::string& text) {
  std::int64_t num = 0;
  std::int64_t den = 1;
  std::istringstream in(text);
  in >> num;
  if (!in) throw InvalidArgument("not a rational: '" + text + "'");
  if (in.peek() == '/') {
    in.get();
    if (!std::isdigit(in.peek())) throw InvalidArgument("not a rational: '" + text + "'");
    in >> den;
    if (!in && !in.eof()) throw InvalidArgument("not a rational: '" + text + "'");
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw InvalidArgument("not a rational: '" + text + "'");
  if (den == 0) throw InvalidArgument("zero denominator in '" + text + "'");
  return Rational(num, den);
}

/// "p/q", or just "p" for integers; parse_rational reads both.
inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

/// log2 of a positive rational, computed as log2(p) - log2(q) in long double.
inline double log2_of(const Rational& r) {
  require(r > 0, "log2 of non-positive rational");
  return static_cast<double>(std::log2(static_cast<long double>(r.numerator())) -
                             std::log2(static_cast<long double>(r.denominator())));
}

/// Smallest integer >= r.
inline std::int64_t ceil_of(const Rational& r) {
  const auto q = r.numerator() / r.denominator();
  const auto rem = r.numerator() % r.denominator();
  return (rem > 0) ? q + 1 : q;
}

/// Smallest k >= 0 with 2^k >= r (r > 0), i.e. ceil(log2 r) for r >= 1.
inline int ceil_log2(const Rational& r) {
  require(r > 0, "ceil_log2 of non-positive rational");
  int k = 0;
  Rational power(1);
  while (power < r) {
    power *= 2;
    ++k;
    require(k < 62, "ceil_log2 overflow");
  }
  return k;
}

/// Smallest k >= 0 with 2^k >= value.
inline int ceil_log2(std::uint64_t value) {
  int k = 0;
  while ((std::uint64_t{1} << k) < value) ++k;
  return k;
}

}  // namespace eqcomm
