#pragma once

// Random linear codes over GF(2) and exhaustive certification of their
// relative distance band.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "eqcomm/binary_io.hpp"
#include "eqcomm/bits.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/rational.hpp"

namespace eqcomm {

/// N x n generator matrix M of the code C(x) = Mx over GF(2).
///
/// Rows are stored as n-bit masks (bit j = entry (i, j)), columns as
/// N-bit strings so that encoding is an XOR of selected columns.
class GeneratorMatrix {
 public:
  static constexpr std::size_t kMaxMessageBits = 63;

  GeneratorMatrix(std::size_t n, std::size_t codeword_bits, std::vector<std::uint64_t> rows,
                  std::uint64_t seed = 0)
      : n_(n), N_(codeword_bits), seed_(seed), rows_(std::move(rows)) {
    require(n >= 1, "generator matrix needs n >= 1");
    require(n <= kMaxMessageBits, "message length above 63 bits is not supported");
    require(N_ >= n, "codeword length N must be >= message length n");
    require(rows_.size() == N_, "row count must equal N");
    const std::uint64_t mask = (std::uint64_t{1} << n) - 1;
    columns_.assign(n, BitString(N_));
    for (std::size_t i = 0; i < N_; ++i) {
      require((rows_[i] & ~mask) == 0, "row has bits beyond column n");
      for (std::size_t j = 0; j < n; ++j)
        if ((rows_[i] >> j) & 1U) columns_[j].set(i, true);
    }
  }

  /// Builds from textual rows, e.g. {"10", "01", "11"}.
  static GeneratorMatrix from_rows(const std::vector<std::string>& rows) {
    require(!rows.empty(), "empty generator matrix");
    std::vector<std::uint64_t> masks;
    for (const auto& r : rows) {
      require(r.size() == rows.front().size(), "ragged generator rows");
      masks.push_back(BitString::from_string(r).to_word());
    }
    return GeneratorMatrix(rows.front().size(), rows.size(), std::move(masks));
  }

  std::size_t message_bits() const noexcept { return n_; }
  std::size_t codeword_bits() const noexcept { return N_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool bit(std::size_t row, std::size_t col) const { return (rows_[row] >> col) & 1U; }
  const std::vector<std::uint64_t>& rows() const noexcept { return rows_; }
  const BitString& column(std::size_t j) const { return columns_[j]; }

  friend bool operator==(const GeneratorMatrix& a, const GeneratorMatrix& b) {
    return a.n_ == b.n_ && a.N_ == b.N_ && a.rows_ == b.rows_;
  }

 private:
  std::size_t n_;
  std::size_t N_;
  std::uint64_t seed_;
  std::vector<std::uint64_t> rows_;
  std::vector<BitString> columns_;
};

/// Every bit an independent fair coin. The stream of mt19937_64 outputs
/// is consumed LSB-first and fills the matrix row-major.
inline GeneratorMatrix sample_generator(std::size_t n, std::size_t codeword_bits, std::uint64_t seed) {
  require(n >= 1, "sample_generator: n must be >= 1");
  require(codeword_bits >= n, "sample_generator: N < n cannot give an injective code");
  Rng rng(seed);
  std::vector<std::uint64_t> rows(codeword_bits, 0);
  std::uint64_t word = 0;
  int left = 0;
  for (std::size_t i = 0; i < codeword_bits; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (left == 0) {
        word = rng();
        left = 64;
      }
      rows[i] |= (word & 1U) << j;
      word >>= 1;
      --left;
    }
  }
  return GeneratorMatrix(n, codeword_bits, std::move(rows), seed);
}

/// Codeword of the message whose bit j is bit j of `message`.
inline BitString encode_word(const GeneratorMatrix& g, std::uint64_t message) {
  BitString out(g.codeword_bits());
  while (message != 0) {
    const int j = std::countr_zero(message);
    require(static_cast<std::size_t>(j) < g.message_bits(), "message has bits beyond n");
    out ^= g.column(static_cast<std::size_t>(j));
    message &= message - 1;
  }
  return out;
}

inline BitString encode(const GeneratorMatrix& g, const BitString& x) {
  require(x.size() == g.message_bits(), "encode: message length must equal n");
  return encode_word(g, x.to_word());
}

/// Half-width of the relative distance band, carried as an exact delta^2
/// since delta = sqrt(eps)/2 is irrational in general.
struct BandHalfWidth {
  Rational delta_squared;

  static BandHalfWidth from_delta(const Rational& delta) {
    require(delta > 0 && delta <= Rational(1, 2), "delta must lie in (0, 1/2]");
    return {delta * delta};
  }
  /// delta = sqrt(eps)/2, the width at which a fingerprint protocol errs <= eps.
  static BandHalfWidth from_epsilon(const Rational& eps) {
    require(eps > 0 && eps <= 1, "epsilon must lie in (0, 1]");
    return {eps / 4};
  }
  double delta() const { return std::sqrt(to_double(delta_squared)); }

  /// |weight/N - 1/2| <= delta, i.e. den*(2w - N)^2 <= 4*num*N^2.
  bool contains(std::uint64_t weight, std::uint64_t codeword_bits) const {
    const __int128 dev = static_cast<__int128>(2 * static_cast<__int128>(weight)) -
                         static_cast<__int128>(codeword_bits);
    const __int128 lhs = static_cast<__int128>(delta_squared.denominator()) * dev * dev;
    const __int128 rhs = static_cast<__int128>(4) * delta_squared.numerator() *
                         static_cast<__int128>(codeword_bits) * static_cast<__int128>(codeword_bits);
    return lhs <= rhs;
  }
};

enum class VerifyMode { exhaustive, sampled };

struct BandCheckOptions {
  VerifyMode mode = VerifyMode::exhaustive;
  std::size_t max_exhaustive_bits = 24;
  std::uint64_t samples = 1U << 16;
  std::uint64_t sample_seed = kDefaultSeed;
};

struct DistanceBandReport {
  BandHalfWidth band;
  std::uint64_t codeword_bits = 0;
  std::uint64_t min_weight = 0;
  std::uint64_t max_weight = 0;
  bool pass = false;
  /// Smallest violating nonzero message (as an integer), if any was found.
  std::optional<std::uint64_t> witness;
  bool exhaustive = true;
  std::uint64_t messages_checked = 0;
  /// Sampled mode only: with 95% confidence, the fraction of violating
  /// messages is below this (0 when exhaustive).
  double violation_fraction_bound = 0.0;

  Rational min_relative() const { return Rational(static_cast<std::int64_t>(min_weight), static_cast<std::int64_t>(codeword_bits)); }
  Rational max_relative() const { return Rational(static_cast<std::int64_t>(max_weight), static_cast<std::int64_t>(codeword_bits)); }
};

namespace detail {

struct BandScan {
  std::uint64_t min_weight = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t max_weight = 0;
  std::optional<std::uint64_t> witness;

  void record(std::uint64_t z, std::uint64_t w, bool ok) {
    min_weight = std::min(min_weight, w);
    max_weight = std::max(max_weight, w);
    if (!ok && (!witness || z < *witness)) witness = z;
  }
  void merge(const BandScan& o) {
    min_weight = std::min(min_weight, o.min_weight);
    max_weight = std::max(max_weight, o.max_weight);
    if (o.witness && (!witness || *o.witness < *witness)) witness = o.witness;
  }
};

}  // namespace detail

/// Checks weight(C(z))/N in [1/2 - delta, 1/2 + delta] for nonzero z,
/// which by linearity covers d(C(x), C(y))/N for every pair x != y.
/// Exhaustive mode walks all 2^n - 1 messages in Gray-code order.
inline DistanceBandReport verify_distance_band(const GeneratorMatrix& g, BandHalfWidth band,
                                               const BandCheckOptions& options = {}) {
  const std::size_t n = g.message_bits();
  const std::uint64_t N = g.codeword_bits();
  DistanceBandReport report;
  report.band = band;
  report.codeword_bits = N;

  if (options.mode == VerifyMode::exhaustive) {
    if (n > options.max_exhaustive_bits)
      throw ResourceCap("exhaustive band check capped at n <= " +
                        std::to_string(options.max_exhaustive_bits) + ", got n = " + std::to_string(n));
    const std::uint64_t total = std::uint64_t{1} << n;
    std::vector<detail::BandScan> scans(max_chunks());
    // Gray index g in [1, 2^n) visits every nonzero message once.
    const std::size_t used = parallel_chunks(total - 1, [&](std::size_t chunk, std::uint64_t begin, std::uint64_t end) {
      detail::BandScan scan;
      if (begin == end) {
        scans[chunk] = scan;
        return;
      }
      std::uint64_t gray_index = begin + 1;
      std::uint64_t z = gray_index ^ (gray_index >> 1);
      BitString codeword = encode_word(g, z);
      for (;;) {
        const std::uint64_t w = codeword.weight();
        scan.record(z, w, band.contains(w, N));
        if (++gray_index > end) break;
        const int flip = std::countr_zero(gray_index);
        z ^= std::uint64_t{1} << flip;
        codeword ^= g.column(static_cast<std::size_t>(flip));
      }
      scans[chunk] = scan;
    });
    detail::BandScan all;
    for (std::size_t c = 0; c < used; ++c) all.merge(scans[c]);
    report.min_weight = all.min_weight;
    report.max_weight = all.max_weight;
    report.witness = all.witness;
    report.exhaustive = true;
    report.messages_checked = total - 1;
  } else {
    require(options.samples > 0, "sampled band check needs at least one sample");
    Rng rng(options.sample_seed);
    const std::uint64_t nonzero = (n == 64) ? UINT64_MAX : (std::uint64_t{1} << n) - 1;
    detail::BandScan scan;
    for (std::uint64_t s = 0; s < options.samples; ++s) {
      const std::uint64_t z = 1 + uniform_index(rng, nonzero);
      const std::uint64_t w = encode_word(g, z).weight();
      scan.record(z, w, band.contains(w, N));
    }
    report.min_weight = scan.min_weight;
    report.max_weight = scan.max_weight;
    report.witness = scan.witness;
    report.exhaustive = false;
    report.messages_checked = options.samples;
    report.violation_fraction_bound = -std::log(0.05) / static_cast<double>(options.samples);
  }
  report.pass = !report.witness.has_value();
  return report;
}

/// Codeword length used by the fingerprint construction: ceil(16 n / eps).
inline std::uint64_t equality_code_length(std::size_t n, const Rational& eps) {
  return static_cast<std::uint64_t>(ceil_of(Rational(16 * static_cast<std::int64_t>(n)) / eps));
}

struct CertifiedCode {
  GeneratorMatrix code;
  DistanceBandReport report;
  int attempts = 0;
};

struct EqualityCodeOptions {
  int max_retries = 16;
  std::size_t max_exhaustive_bits = 24;
  /// Sampled mode trades the certificate for a confidence bound.
  VerifyMode mode = VerifyMode::exhaustive;
  std::uint64_t samples = 1U << 16;
};

/// Samples codes of length ceil(16n/eps) until the band with
/// delta = sqrt(eps)/2 is certified exhaustively. Attempt a draws from
/// derive_seed(seed, {a}).
inline CertifiedCode make_equality_code(std::size_t n, const Rational& eps, std::uint64_t seed,
                                        const EqualityCodeOptions& options = {}) {
  require(n >= 1, "make_equality_code: n must be >= 1");
  require(eps > 0 && eps < Rational(1, 2), "make_equality_code: epsilon must lie in (0, 1/2)");
  if (options.mode == VerifyMode::exhaustive && n > options.max_exhaustive_bits)
    throw ResourceCap("make_equality_code: exhaustive certification capped at n <= " +
                      std::to_string(options.max_exhaustive_bits));
  const std::uint64_t N = equality_code_length(n, eps);
  const auto band = BandHalfWidth::from_epsilon(eps);
  BandCheckOptions check;
  check.mode = options.mode;
  check.max_exhaustive_bits = options.max_exhaustive_bits;
  check.samples = options.samples;
  for (int attempt = 0; attempt < options.max_retries; ++attempt) {
    const std::uint64_t attempt_seed = derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
    auto code = sample_generator(n, N, attempt_seed);
    check.sample_seed = derive_seed(attempt_seed, {0xba5d});
    auto report = verify_distance_band(code, band, check);
    if (report.pass) return {std::move(code), report, attempt + 1};
  }
  throw RetryExhausted("make_equality_code: no certified code within " +
                           std::to_string(options.max_retries) + " attempts",
                       options.max_retries);
}

// GF2C file: "GF2C", then version, n, N, seed as u64 LE, then the N rows
// packed LSB-first, ceil(n/8) bytes each.

inline constexpr std::uint64_t kGf2cVersion = 1;

inline void write_code(std::ostream& out, const GeneratorMatrix& g) {
  io::write_magic(out, "GF2C");
  io::write_u64(out, kGf2cVersion);
  io::write_u64(out, g.message_bits());
  io::write_u64(out, g.codeword_bits());
  io::write_u64(out, g.seed());
  for (auto row : g.rows()) io::write_bit_row(out, row, g.message_bits());
}

inline GeneratorMatrix read_code(std::istream& in) {
  io::expect_magic(in, "GF2C");
  const auto version = io::read_u64(in);
  if (version != kGf2cVersion) throw InvalidArgument("unsupported GF2C version " + std::to_string(version));
  const auto n = io::read_u64(in);
  const auto N = io::read_u64(in);
  const auto seed = io::read_u64(in);
  require(n >= 1 && n <= GeneratorMatrix::kMaxMessageBits && N >= n && N < (std::uint64_t{1} << 32),
          "GF2C header has invalid dimensions");
  std::vector<std::uint64_t> rows(N);
  for (auto& row : rows) row = io::read_bit_row(in, n);
  return GeneratorMatrix(n, N, std::move(rows), seed);
}

}  // namespace eqcomm
