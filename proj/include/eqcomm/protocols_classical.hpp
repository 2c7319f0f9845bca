#pragma once

// Public-coin hashing protocol for Equality, its conversion to a
// private-coin protocol with a fixed list of B tapes, and exact error
// audits of the result.
//
// A tape is k masks s_1..s_k; the hash of x is (<s_1,x>, ..., <s_k,x>)
// over GF(2). Because the hash is linear, tape j collides on (x, y) iff
// it maps z = x XOR y to zero, so audits run over 2^n - 1 values of z.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "eqcomm/binary_io.hpp"
#include "eqcomm/bits.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/gf2codes.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/rational.hpp"

namespace eqcomm {

inline constexpr std::size_t kMaxProtocolInputBits = 62;

inline std::uint64_t low_mask(std::size_t bits) {
  return bits >= 64 ? UINT64_MAX : (std::uint64_t{1} << bits) - 1;
}

struct PublicCoinEqProtocol {
  std::size_t n = 0;
  int k = 0;

  /// Exact error on x != y over uniform public strings: 2^-k.
  Rational exact_error() const { return Rational(1, std::int64_t{1} << k); }
  /// k hash bits from Alice plus one output bit.
  int cost_bits() const { return k + 1; }

  std::uint64_t hash(std::span<const std::uint64_t> tape, std::uint64_t x) const {
    std::uint64_t h = 0;
    for (int i = 0; i < k; ++i) h |= static_cast<std::uint64_t>(gf2_dot(tape[static_cast<std::size_t>(i)], x)) << i;
    return h;
  }
  bool accepts(std::span<const std::uint64_t> tape, std::uint64_t x, std::uint64_t y) const {
    return hash(tape, x) == hash(tape, y);
  }
};

/// k = ceil(log2(1/eps_pub)), so the realized error 2^-k <= eps_pub.
inline PublicCoinEqProtocol public_eq_protocol(std::size_t n, const Rational& eps_pub) {
  require(n >= 1 && n <= kMaxProtocolInputBits, "public_eq_protocol: n must lie in [1, 62]");
  require(eps_pub > 0 && eps_pub < 1, "public_eq_protocol: epsilon must lie in (0, 1)");
  const int k = ceil_log2(Rational(1) / eps_pub);
  require(k <= 40, "public_eq_protocol: epsilon too small");
  return {n, k};
}

/// B = ceil(6n / (delta^2 eps0)).
inline Rational newman_tape_count_real(std::size_t n, const Rational& eps0, const Rational& delta) {
  return Rational(6 * static_cast<std::int64_t>(n)) / (delta * delta * eps0);
}

inline std::uint64_t newman_tape_count(std::size_t n, const Rational& eps0, const Rational& delta) {
  return static_cast<std::uint64_t>(ceil_of(newman_tape_count_real(n, eps0, delta)));
}

enum class AuditStrategy {
  xor_reduced,  // 2^n - 1 differences z = x XOR y
  all_pairs,    // every ordered pair, for bases without XOR structure
};

/// Private-coin protocol: Alice samples j in [B], announces it, and both
/// run the base protocol with tape j as the public string.
class PrivateCoinProtocol {
 public:
  PrivateCoinProtocol(PublicCoinEqProtocol base, Rational delta, std::vector<std::uint64_t> tapes,
                      std::uint64_t seed = 0, int attempts = 0)
      : base_(base), delta_(delta), tapes_(std::move(tapes)), seed_(seed), attempts_(attempts) {
    require(base_.k >= 1, "private protocol needs k >= 1");
    require(delta_ > 0, "delta must be positive");
    require(!tapes_.empty() && tapes_.size() % static_cast<std::size_t>(base_.k) == 0,
            "tape storage must hold B >= 1 tapes of k strings");
    const auto mask = low_mask(base_.n);
    for (auto s : tapes_) require((s & ~mask) == 0, "tape string has bits beyond n");
  }

  const PublicCoinEqProtocol& base() const noexcept { return base_; }
  std::size_t input_bits() const noexcept { return base_.n; }
  int hash_bits() const noexcept { return base_.k; }
  std::uint64_t tape_count() const noexcept { return tapes_.size() / static_cast<std::size_t>(base_.k); }
  Rational base_error() const { return base_.exact_error(); }
  const Rational& delta() const noexcept { return delta_; }
  /// eps0 (1 + delta); a verified protocol errs strictly below this.
  Rational target_error() const { return base_error() * (1 + delta_); }
  std::uint64_t seed() const noexcept { return seed_; }
  int attempts() const noexcept { return attempts_; }
  bool verified() const noexcept { return verified_; }
  const std::vector<std::uint64_t>& tape_storage() const noexcept { return tapes_; }

  std::span<const std::uint64_t> tape(std::uint64_t j) const {
    return std::span<const std::uint64_t>(tapes_).subspan(j * static_cast<std::size_t>(base_.k),
                                                          static_cast<std::size_t>(base_.k));
  }
  bool collides(std::uint64_t j, std::uint64_t z) const { return base_.hash(tape(j), z) == 0; }

  /// ceil(log2 B) + k + 1.
  int cost_bits() const { return ceil_log2(tape_count()) + base_.k + 1; }
  /// log2(6n/(delta^2 eps0)) + k + 1, before any rounding of B.
  double real_cost_bits() const {
    return log2_of(newman_tape_count_real(base_.n, base_error(), delta_)) + base_.k + 1;
  }

  /// Recorded by the verifier; true only after an exhaustive check passed.
  void mark_verified(bool v) { verified_ = v; }

 private:
  PublicCoinEqProtocol base_;
  Rational delta_;
  std::vector<std::uint64_t> tapes_;
  std::uint64_t seed_;
  int attempts_;
  bool verified_ = false;
};

struct ErrorAudit {
  Rational max_error;
  /// Difference z attaining max_error; the pair (0, z) realizes it.
  std::uint64_t argmax_z = 0;
  /// collision count -> number of nonzero z with that count.
  std::map<std::uint64_t, std::uint64_t> histogram;
  /// counts[z] = number of tapes colliding on z (counts[0] = B).
  std::vector<std::uint32_t> collision_counts;
  std::uint64_t total_collisions = 0;  // over z != 0
};

struct AuditOptions {
  std::size_t max_bits = 10;
};

/// Exact per-difference collision counts, computed by walking each tape's
/// hash over all z with h(z) = h(z without lowest bit) XOR h(lowest bit).
inline std::vector<std::uint32_t> collision_counts(const PrivateCoinProtocol& p) {
  const std::size_t n = p.input_bits();
  const std::uint64_t size = std::uint64_t{1} << n;
  const std::uint64_t tapes = p.tape_count();
  std::vector<std::vector<std::uint32_t>> partial(max_chunks());
  const std::size_t used = parallel_chunks(tapes, [&](std::size_t chunk, std::uint64_t begin, std::uint64_t end) {
    std::vector<std::uint32_t> counts(size, 0);
    std::vector<std::uint64_t> hash(size, 0);
    std::vector<std::uint64_t> unit(n);
    for (std::uint64_t j = begin; j < end; ++j) {
      const auto t = p.tape(j);
      for (std::size_t b = 0; b < n; ++b) unit[b] = p.base().hash(t, std::uint64_t{1} << b);
      ++counts[0];
      for (std::uint64_t z = 1; z < size; ++z) {
        hash[z] = hash[z & (z - 1)] ^ unit[static_cast<std::size_t>(std::countr_zero(z))];
        if (hash[z] == 0) ++counts[z];
      }
    }
    partial[chunk] = std::move(counts);
  });
  std::vector<std::uint32_t> total(size, 0);
  for (std::size_t c = 0; c < used; ++c)
    if (!partial[c].empty())
      for (std::uint64_t z = 0; z < size; ++z) total[z] += partial[c][z];
  return total;
}

/// Worst-case error over all x != y, exactly, via the XOR reduction.
inline ErrorAudit audit_error(const PrivateCoinProtocol& p, const AuditOptions& options = {}) {
  if (p.input_bits() > options.max_bits)
    throw ResourceCap("audit_error: exhaustive audit capped at n <= " + std::to_string(options.max_bits));
  ErrorAudit audit;
  audit.collision_counts = collision_counts(p);
  std::uint32_t worst = 0;
  audit.argmax_z = 1;
  for (std::uint64_t z = 1; z < audit.collision_counts.size(); ++z) {
    const auto c = audit.collision_counts[z];
    ++audit.histogram[c];
    audit.total_collisions += c;
    if (c > worst) {
      worst = c;
      audit.argmax_z = z;
    }
  }
  audit.max_error = Rational(worst, static_cast<std::int64_t>(p.tape_count()));
  return audit;
}

struct PairwiseAudit {
  Rational max_error;
  std::uint64_t argmax_x = 0;
  std::uint64_t argmax_y = 0;
  Rational max_diagonal_error;
  /// errors[x * 2^n + y] = number of tapes on which the protocol errs on (x, y).
  std::vector<std::uint32_t> error_counts;
};

/// Generic audit over all ordered pairs; does not use the XOR structure.
inline PairwiseAudit audit_error_pairwise(const PrivateCoinProtocol& p, std::size_t max_bits = 6) {
  const std::size_t n = p.input_bits();
  if (n > max_bits) throw ResourceCap("pairwise audit capped at n <= " + std::to_string(max_bits));
  const std::uint64_t size = std::uint64_t{1} << n;
  PairwiseAudit audit;
  audit.error_counts.assign(size * size, 0);
  for (std::uint64_t j = 0; j < p.tape_count(); ++j) {
    const auto t = p.tape(j);
    std::vector<std::uint64_t> h(size);
    for (std::uint64_t x = 0; x < size; ++x) h[x] = p.base().hash(t, x);
    for (std::uint64_t x = 0; x < size; ++x)
      for (std::uint64_t y = 0; y < size; ++y) {
        const bool output = h[x] == h[y];
        if (output != (x == y)) ++audit.error_counts[x * size + y];
      }
  }
  std::uint32_t worst = 0;
  std::uint32_t worst_diag = 0;
  for (std::uint64_t x = 0; x < size; ++x)
    for (std::uint64_t y = 0; y < size; ++y) {
      const auto c = audit.error_counts[x * size + y];
      if (x == y) {
        worst_diag = std::max(worst_diag, c);
      } else if (c > worst) {
        worst = c;
        audit.argmax_x = x;
        audit.argmax_y = y;
      }
    }
  const auto b = static_cast<std::int64_t>(p.tape_count());
  audit.max_error = Rational(worst, b);
  audit.max_diagonal_error = Rational(worst_diag, b);
  return audit;
}

struct NewmanOptions {
  VerifyMode mode = VerifyMode::exhaustive;
  AuditStrategy strategy = AuditStrategy::xor_reduced;
  int max_retries = 16;
  std::size_t max_exhaustive_bits = 10;
  std::size_t max_pairwise_bits = 6;
  std::uint64_t samples = 4096;
};

struct NewmanResult {
  PrivateCoinProtocol protocol;
  /// Sampled mode only: no sampled difference violated the bound.
  bool sampled_pass = false;
};

namespace detail {

inline std::vector<std::uint64_t> draw_tapes(std::size_t n, int k, std::uint64_t tapes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint64_t> out(tapes * static_cast<std::uint64_t>(k));
  for (auto& s : out) s = rng() & low_mask(n);
  return out;
}

/// count < B * eps0 (1 + delta), exactly.
inline bool below_target(std::uint64_t count, const PrivateCoinProtocol& p) {
  return Rational(static_cast<std::int64_t>(count)) < Rational(static_cast<std::int64_t>(p.tape_count())) * p.target_error();
}

inline bool passes_exhaustive(const PrivateCoinProtocol& p, const NewmanOptions& options) {
  if (options.strategy == AuditStrategy::xor_reduced) {
    const auto audit = audit_error(p, {options.max_exhaustive_bits});
    const auto worst = audit.max_error * static_cast<std::int64_t>(p.tape_count());
    return detail::below_target(static_cast<std::uint64_t>(worst.numerator()), p);
  }
  const auto audit = audit_error_pairwise(p, options.max_pairwise_bits);
  return audit.max_diagonal_error < p.target_error() && audit.max_error < p.target_error();
}

inline bool passes_sampled(const PrivateCoinProtocol& p, const NewmanOptions& options, std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t nonzero = low_mask(p.input_bits());
  for (std::uint64_t s = 0; s < options.samples; ++s) {
    const std::uint64_t z = 1 + uniform_index(rng, nonzero);
    std::uint64_t count = 0;
    for (std::uint64_t j = 0; j < p.tape_count(); ++j) count += p.collides(j, z) ? 1 : 0;
    if (!below_target(count, p)) return false;
  }
  return true;
}

}  // namespace detail

/// Draws B = ceil(6n/(delta^2 eps0)) tapes and checks that every x != y
/// sees fewer than B eps0 (1 + delta) colliding tapes, resampling the
/// whole list on failure. Attempt a draws from derive_seed(seed, {a}).
inline NewmanResult newman_convert(const PublicCoinEqProtocol& base, const Rational& delta, std::uint64_t seed,
                                   const NewmanOptions& options = {}) {
  require(base.n >= 1 && base.n <= kMaxProtocolInputBits && base.k >= 1, "newman_convert: invalid base protocol");
  require(delta > 0, "newman_convert: delta must be positive");
  if (options.mode == VerifyMode::exhaustive) {
    const std::size_t cap =
        options.strategy == AuditStrategy::xor_reduced ? options.max_exhaustive_bits : options.max_pairwise_bits;
    if (base.n > cap)
      throw ResourceCap("newman_convert: exhaustive verification capped at n <= " + std::to_string(cap));
  }
  const std::uint64_t tapes = newman_tape_count(base.n, base.exact_error(), delta);
  if (tapes * static_cast<std::uint64_t>(base.k) > (std::uint64_t{1} << 28))
    throw ResourceCap("newman_convert: tape storage above 2^28 strings");
  for (int attempt = 0; attempt < options.max_retries; ++attempt) {
    const std::uint64_t attempt_seed = derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
    PrivateCoinProtocol p(base, delta, detail::draw_tapes(base.n, base.k, tapes, attempt_seed), attempt_seed,
                          attempt + 1);
    if (options.mode == VerifyMode::exhaustive) {
      if (detail::passes_exhaustive(p, options)) {
        p.mark_verified(true);
        return {std::move(p), false};
      }
    } else {
      const bool ok = detail::passes_sampled(p, options, derive_seed(attempt_seed, {0x5a3d}));
      if (ok) return {std::move(p), true};
    }
  }
  throw RetryExhausted("newman_convert: no tape list verified within " + std::to_string(options.max_retries) +
                           " attempts",
                       options.max_retries);
}

/// How the target error eps is split between the public protocol and the
/// conversion. In both cases delta = eps / eps0 - 1.
enum class ErrorSplit {
  half,      // eps_pub = eps/2: delta = 1 whenever eps is a power of two
  low_cost,  // eps_pub = eps/8: delta >= 7, ~1.6 fewer bits
};

struct ComposeOptions {
  ErrorSplit split = ErrorSplit::half;
  NewmanOptions newman;
};

inline Rational public_error_for(const Rational& eps, ErrorSplit split) {
  return split == ErrorSplit::half ? eps / 2 : eps / 8;
}

/// Private-coin Equality protocol with exhaustively verified error < eps.
inline PrivateCoinProtocol compose_eq(std::size_t n, const Rational& eps, std::uint64_t seed,
                                      const ComposeOptions& options = {}) {
  require(eps > 0 && eps < Rational(1, 2), "compose_eq: epsilon must lie in (0, 1/2)");
  const auto base = public_eq_protocol(n, public_error_for(eps, options.split));
  const Rational delta = eps / base.exact_error() - 1;
  auto result = newman_convert(base, delta, seed, options.newman);
  return std::move(result.protocol);
}

/// log2(n / eps^2), the leading term of the private-coin cost.
inline double private_cost_leading_term(std::size_t n, const Rational& eps) {
  return std::log2(static_cast<double>(n)) - 2.0 * log2_of(eps);
}

struct PrivateRun {
  bool output = false;
  int bits_communicated = 0;
};

/// One execution: Alice samples j uniformly with her private rng.
inline PrivateRun run_private(const PrivateCoinProtocol& p, std::uint64_t x, std::uint64_t y, Rng& rng) {
  const auto mask = low_mask(p.input_bits());
  require((x & ~mask) == 0 && (y & ~mask) == 0, "run_private: input longer than n bits");
  const std::uint64_t j = uniform_index(rng, p.tape_count());
  return {p.base().accepts(p.tape(j), x, y), p.cost_bits()};
}

inline PrivateRun run_private(const PrivateCoinProtocol& p, const BitString& x, const BitString& y, Rng& rng) {
  require(x.size() == p.input_bits() && y.size() == p.input_bits(), "run_private: input length must equal n");
  return run_private(p, x.to_word(), y.to_word(), rng);
}

// Protocol file: one line of JSON (terminated by '\n'), then B tapes of
// k rows each, every row an n-bit string packed as in GF2C.

inline void write_protocol(std::ostream& out, const PrivateCoinProtocol& p) {
  nlohmann::ordered_json header;
  header["format"] = "eqcomm-protocol";
  header["version"] = 1;
  header["n"] = p.input_bits();
  header["k"] = p.hash_bits();
  header["B"] = p.tape_count();
  header["epsilon"] = to_string(p.base_error());
  header["delta"] = to_string(p.delta());
  header["seed"] = p.seed();
  header["attempts"] = p.attempts();
  header["verified"] = p.verified();
  out << header.dump() << '\n';
  for (auto s : p.tape_storage()) io::write_bit_row(out, s, p.input_bits());
}

/// Reads a protocol file. The verified flag is re-established by a fresh
/// exhaustive audit rather than trusted from the header.
inline PrivateCoinProtocol read_protocol(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("protocol file: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("protocol file: bad JSON header: ") + e.what());
  }
  if (header.value("format", "") != "eqcomm-protocol") throw InvalidArgument("protocol file: wrong format tag");
  const std::size_t n = header.at("n").get<std::size_t>();
  const int k = header.at("k").get<int>();
  const std::uint64_t b = header.at("B").get<std::uint64_t>();
  require(n >= 1 && n <= kMaxProtocolInputBits && k >= 1 && k <= 40 && b >= 1, "protocol file: bad dimensions");
  const PublicCoinEqProtocol base{n, k};
  if (parse_rational(header.at("epsilon").get<std::string>()) != base.exact_error())
    throw InvalidArgument("protocol file: epsilon does not match 2^-k");
  const Rational delta = parse_rational(header.at("delta").get<std::string>());
  std::vector<std::uint64_t> tapes(b * static_cast<std::uint64_t>(k));
  for (auto& s : tapes) s = io::read_bit_row(in, n);
  PrivateCoinProtocol p(base, delta, std::move(tapes), header.at("seed").get<std::uint64_t>(),
                        header.at("attempts").get<int>());
  if (header.at("verified").get<bool>() && n <= 20) {
    NewmanOptions check;
    check.max_exhaustive_bits = 20;
    p.mark_verified(detail::passes_exhaustive(p, check));
  }
  return p;
}

}  // namespace eqcomm
