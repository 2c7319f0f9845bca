#pragma once

// Explicit approximate factorizations of the Identity and of SINK o XOR,
// and the entrywise audits that certify them.
//
// Nonnegative factorizations come from verified private-coin protocols
// (one inner index per (tape, message) pair); psd factorizations come from
// verified projector families. SINK o XOR is a sum of m Equalities on the
// m - 1 edges at each vertex, so its factors are direct sums of the
// per-vertex Identity factors.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eqcomm/bits.hpp"
#include "eqcomm/complexlin.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/factorization.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/protocols_classical.hpp"
#include "eqcomm/protocols_quantum.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/rational.hpp"

namespace eqcomm {

/// 0/1 communication matrix on n-bit inputs, 2^n x 2^n row-major.
struct BooleanTargetMatrix {
  std::string label;
  std::size_t n = 0;
  std::vector<std::uint8_t> entries;

  std::uint64_t size() const { return std::uint64_t{1} << n; }
  std::uint8_t at(std::uint64_t x, std::uint64_t y) const { return entries.at(x * size() + y); }
};

inline BooleanTargetMatrix identity_target(std::size_t n) {
  require(n <= 14, "identity_target: capped at n <= 14");
  BooleanTargetMatrix m{"identity", n, {}};
  m.entries.assign(m.size() * m.size(), 0);
  for (std::uint64_t x = 0; x < m.size(); ++x) m.entries[x * m.size() + x] = 1;
  return m;
}

struct ApproxReport {
  Rational epsilon{0};
  double max_abs_error = 0;
  /// Exact maximum error, for rational factorizations.
  std::optional<Rational> exact_max_error;
  /// Inner dimension (nonnegative) or matrix size (psd).
  std::size_t dim = 0;
  bool pass = false;
  std::uint64_t worst_row = 0;
  std::uint64_t worst_col = 0;
  /// Largest |Im tr(A_x B_y)| seen (psd only).
  double max_imag = 0;
};

/// Slack for floating-point reconstructions.
inline constexpr double kEntrywiseSlack = 1e-9;

/// Exact audit: max |(AB)(x, y) - M(x, y)| as a rational, pass iff <= eps.
/// The worst entry is the first maximizer in row-major order.
inline ApproxReport verify_entrywise(const NonnegFactorization& f, const BooleanTargetMatrix& target,
                                     const Rational& eps) {
  require(f.rows() == target.size() && f.cols() == target.size(),
          "verify_entrywise: factorization and target sizes differ");
  require(eps >= 0, "verify_entrywise: epsilon must be nonnegative");
  const auto numerators = f.product_numerators();
  const std::int64_t den = f.denominator();
  std::int64_t worst = -1;
  ApproxReport r;
  r.epsilon = eps;
  r.dim = f.inner_dim();
  for (std::uint64_t x = 0; x < target.size(); ++x)
    for (std::uint64_t y = 0; y < target.size(); ++y) {
      const std::int64_t diff = numerators[x * target.size() + y] - (target.at(x, y) ? den : 0);
      const std::int64_t err = diff < 0 ? -diff : diff;
      if (err > worst) {
        worst = err;
        r.worst_row = x;
        r.worst_col = y;
      }
    }
  r.exact_max_error = Rational(worst, den);
  r.max_abs_error = to_double(*r.exact_max_error);
  r.pass = *r.exact_max_error <= eps;
  return r;
}

/// Floating audit of tr(A_x B_y) against M, pass iff max error <= eps + 1e-9.
inline ApproxReport verify_entrywise(const PsdFactorization& f, const BooleanTargetMatrix& target,
                                     const Rational& eps) {
  require(f.rows() == target.size() && f.cols() == target.size(),
          "verify_entrywise: factorization and target sizes differ");
  require(eps >= 0, "verify_entrywise: epsilon must be nonnegative");
  const auto values = f.reconstruct();
  ApproxReport r;
  r.epsilon = eps;
  r.dim = f.dim();
  double worst = -1;
  for (std::uint64_t x = 0; x < target.size(); ++x)
    for (std::uint64_t y = 0; y < target.size(); ++y) {
      const Complex v = values[x * target.size() + y];
      const double err = std::abs(v.real() - static_cast<double>(target.at(x, y)));
      r.max_imag = std::max(r.max_imag, std::abs(v.imag()));
      if (err > worst) {
        worst = err;
        r.worst_row = x;
        r.worst_col = y;
      }
    }
  r.max_abs_error = worst;
  r.pass = worst <= to_double(eps) + kEntrywiseSlack && r.max_imag <= kEntrywiseSlack;
  return r;
}

/// (A B) as doubles, for rank and spectral checks.
inline RealMatrix reconstruction_matrix(const NonnegFactorization& f) {
  const auto numerators = f.product_numerators();
  const double den = static_cast<double>(f.denominator());
  RealMatrix m(static_cast<Eigen::Index>(f.rows()), static_cast<Eigen::Index>(f.cols()));
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < f.cols(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(numerators[i * f.cols() + j]) / den;
  return m;
}

// ------------------------------------------------------------ Identity

struct IdentityNonnegOptions {
  ComposeOptions compose;
  std::size_t max_bits = 10;
  std::uint64_t max_factor_entries = std::uint64_t{1} << 25;
};

struct IdentityNonneg {
  PrivateCoinProtocol protocol;
  NonnegFactorization factors;
  ApproxReport report;
};

/// Factors of a verified private-coin protocol's acceptance matrix.
/// A[x, (j, m)] = 1/B if tape j hashes x to m, B[(j, m), y] = 1 if tape j
/// hashes y to m; (A B)(x, y) is the fraction of tapes colliding on x, y.
inline NonnegFactorization protocol_factors(const PrivateCoinProtocol& p) {
  const std::uint64_t size = std::uint64_t{1} << p.input_bits();
  const std::uint64_t messages = std::uint64_t{1} << p.hash_bits();
  const std::uint64_t tapes = p.tape_count();
  NonnegFactorization f;
  f.left = IntMatrix::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(tapes * messages));
  f.right = IntMatrix::Zero(static_cast<Eigen::Index>(tapes * messages), static_cast<Eigen::Index>(size));
  f.left_denominator = static_cast<std::int64_t>(tapes);
  f.right_denominator = 1;
  parallel_chunks(tapes, [&](std::size_t, std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t j = begin; j < end; ++j)
      for (std::uint64_t x = 0; x < size; ++x) {
        const auto col = static_cast<Eigen::Index>(j * messages + p.base().hash(p.tape(j), x));
        f.left(static_cast<Eigen::Index>(x), col) = 1;
        f.right(col, static_cast<Eigen::Index>(x)) = 1;
      }
  });
  return f;
}

inline IdentityNonneg identity_nonneg_from_protocol(PrivateCoinProtocol protocol, const Rational& eps) {
  auto factors = protocol_factors(protocol);
  auto report = verify_entrywise(factors, identity_target(protocol.input_bits()), eps);
  return {std::move(protocol), std::move(factors), report};
}

inline IdentityNonneg identity_nonneg(std::size_t n, const Rational& eps, std::uint64_t seed,
                                      const IdentityNonnegOptions& options = {}) {
  require(n >= 1, "identity_nonneg: n must be >= 1");
  require(eps > 0 && eps < Rational(1, 2), "identity_nonneg: epsilon must lie in (0, 1/2)");
  if (n > options.max_bits)
    throw ResourceCap("identity_nonneg: capped at n <= " + std::to_string(options.max_bits));
  // Check the factor size before drawing any tapes.
  const auto base = public_eq_protocol(n, public_error_for(eps, options.compose.split));
  const Rational delta = eps / base.exact_error() - 1;
  const std::uint64_t inner = newman_tape_count(n, base.exact_error(), delta) << base.k;
  if ((inner << n) > options.max_factor_entries)
    throw ResourceCap("identity_nonneg: factor matrices above " + std::to_string(options.max_factor_entries) +
                      " entries");
  return identity_nonneg_from_protocol(compose_eq(n, eps, seed, options.compose), eps);
}

struct IdentityPsd {
  ProjectorFamily family;
  PsdFactorization factors;
  ApproxReport report;
};

/// A_x = P_x / r, B_y = P_y.
inline IdentityPsd identity_psd_from_family(ProjectorFamily family) {
  auto factors = extract_psd(mixed_messages(family), mixed_accept_ops(family));
  auto report = verify_entrywise(factors, identity_target(family.input_bits()), family.epsilon());
  return {std::move(family), std::move(factors), report};
}

inline IdentityPsd identity_psd(std::size_t n, const Rational& eps, std::uint64_t seed,
                                const MixedOptions& options = {}) {
  return identity_psd_from_family(build_mixed_protocol(n, eps, seed, options));
}

// ---------------------------------------------------------------- SINK
//
// Orientations of K_m: edges (u, v), u < v, in lexicographic order; edge
// e is bit e of the orientation word (position e of a BitString). Bit 0
// orients u -> v, bit 1 orients v -> u. The all-zero orientation makes
// vertex m - 1 a sink.

inline constexpr std::size_t kMaxSinkVertices = 5;

inline std::size_t sink_edge_count(std::size_t m) { return m * (m - 1) / 2; }

inline std::size_t sink_edge_index(std::size_t m, std::size_t u, std::size_t v) {
  require(u < v && v < m, "sink_edge_index: need u < v < m");
  return u * (2 * m - u - 1) / 2 + (v - u - 1);
}

/// Edge indices incident to w, ascending.
inline std::vector<std::size_t> sink_incident_edges(std::size_t m, std::size_t w) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < w; ++u) out.push_back(sink_edge_index(m, u, w));
  for (std::size_t v = w + 1; v < m; ++v) out.push_back(sink_edge_index(m, w, v));
  return out;
}

/// Orientation bits on the edges at w that make w a sink, packed in
/// ascending edge order.
inline std::uint64_t sink_pattern(std::size_t m, std::size_t w) {
  require(w < m, "sink_pattern: vertex out of range");
  // Edges (u, w) come first and need bit 0; edges (w, v) need bit 1.
  const std::size_t below = w;
  const std::size_t above = m - 1 - w;
  return low_mask(above) << below;
}

/// Packs bits `edges[t]` of `word` into bit t.
inline std::uint64_t restrict_edges(std::uint64_t word, const std::vector<std::size_t>& edges) {
  std::uint64_t out = 0;
  for (std::size_t t = 0; t < edges.size(); ++t) out |= ((word >> edges[t]) & 1U) << t;
  return out;
}

inline bool sink_eval_word(std::size_t m, std::uint64_t orientation) {
  require(m >= 2 && sink_edge_count(m) <= 63, "sink_eval: unsupported vertex count");
  for (std::size_t w = 0; w < m; ++w)
    if (restrict_edges(orientation, sink_incident_edges(m, w)) == sink_pattern(m, w)) return true;
  return false;
}

inline bool sink_eval(std::size_t m, const BitString& orientation) {
  require(m >= 2, "sink_eval: need m >= 2");
  if (orientation.size() != sink_edge_count(m))
    throw InvalidArgument("sink_eval: orientation has " + std::to_string(orientation.size()) + " bits, expected " +
                          std::to_string(sink_edge_count(m)));
  return sink_eval_word(m, orientation.to_word());
}

inline BooleanTargetMatrix sink_xor_matrix(std::size_t m) {
  require(m >= 2, "sink_xor_matrix: need m >= 2");
  if (m > kMaxSinkVertices) throw ResourceCap("sink_xor_matrix: capped at m <= 5");
  const std::size_t n = sink_edge_count(m);
  BooleanTargetMatrix t{"sink_xor(" + std::to_string(m) + ")", n, {}};
  const std::uint64_t size = t.size();
  std::vector<std::uint8_t> row0(size);
  for (std::uint64_t z = 0; z < size; ++z) row0[z] = sink_eval_word(m, z) ? 1 : 0;
  t.entries.resize(size * size);
  for (std::uint64_t x = 0; x < size; ++x)
    for (std::uint64_t y = 0; y < size; ++y) t.entries[x * size + y] = row0[x ^ y];
  return t;
}

inline Rational sink_vertex_error(std::size_t m) { return Rational(1, 3 * static_cast<std::int64_t>(m)); }

inline void require_sink_factor_cap(std::size_t m, std::size_t cap) {
  require(m >= 2, "sink_xor factorization: need m >= 2");
  if (m > cap) throw ResourceCap("sink_xor factorization: capped at m <= " + std::to_string(cap));
}

/// Row x of block v is row (x|E_v XOR s_v) of vertex v's Identity factor,
/// column y is column y|E_v; summing over v counts the sinks of x XOR y
/// plus at most 1/(3m) per vertex of false collisions.
inline NonnegFactorization sink_nonneg_factors(std::size_t m, const std::vector<NonnegFactorization>& blocks) {
  require(blocks.size() == m, "sink_nonneg_factors: need one factorization per vertex");
  const std::size_t n = sink_edge_count(m);
  const std::uint64_t size = std::uint64_t{1} << n;
  std::int64_t common = 1;
  std::size_t inner = 0;
  for (const auto& b : blocks) {
    require(b.rows() == (std::size_t{1} << (m - 1)) && b.cols() == b.rows() && b.right_denominator == 1,
            "sink_nonneg_factors: vertex factorization has the wrong shape");
    common = std::lcm(common, b.left_denominator);
    inner += b.inner_dim();
  }
  NonnegFactorization f;
  f.left = IntMatrix::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(inner));
  f.right = IntMatrix::Zero(static_cast<Eigen::Index>(inner), static_cast<Eigen::Index>(size));
  f.left_denominator = common;
  f.right_denominator = 1;
  Eigen::Index offset = 0;
  for (std::size_t v = 0; v < m; ++v) {
    const auto edges = sink_incident_edges(m, v);
    const std::uint64_t pattern = sink_pattern(m, v);
    const auto& b = blocks[v];
    const auto width = static_cast<Eigen::Index>(b.inner_dim());
    const std::int64_t scale = common / b.left_denominator;
    for (std::uint64_t x = 0; x < size; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      const auto local = restrict_edges(x, edges);
      f.left.block(xi, offset, 1, width) = b.left.row(static_cast<Eigen::Index>(local ^ pattern)) * scale;
      f.right.block(offset, xi, width, 1) = b.right.col(static_cast<Eigen::Index>(local));
    }
    offset += width;
  }
  return f;
}

struct SinkNonneg {
  std::size_t m = 0;
  NonnegFactorization factors;
  ApproxReport report;
  std::vector<PrivateCoinProtocol> vertex_protocols;
  std::vector<std::size_t> vertex_dims;
};

/// Assembles and audits the factorization from per-vertex protocols.
inline SinkNonneg sink_nonneg_from_protocols(std::size_t m, std::vector<PrivateCoinProtocol> protocols) {
  SinkNonneg out;
  out.m = m;
  std::vector<NonnegFactorization> blocks;
  for (const auto& p : protocols) {
    require(p.input_bits() == m - 1, "sink_xor_nonneg: vertex protocol has the wrong input size");
    blocks.push_back(protocol_factors(p));
    out.vertex_dims.push_back(blocks.back().inner_dim());
  }
  out.factors = sink_nonneg_factors(m, blocks);
  out.vertex_protocols = std::move(protocols);
  out.report = verify_entrywise(out.factors, sink_xor_matrix(m), Rational(1, 3));
  return out;
}

/// Vertex v uses a verified Equality protocol on m - 1 bits with error
/// 1/(3m), drawn from derive_seed(seed, {v}).
inline SinkNonneg sink_xor_nonneg(std::size_t m, std::uint64_t seed, const ComposeOptions& compose = {},
                                  std::size_t cap = 4) {
  require_sink_factor_cap(m, cap);
  std::vector<PrivateCoinProtocol> protocols;
  for (std::size_t v = 0; v < m; ++v)
    protocols.push_back(compose_eq(m - 1, sink_vertex_error(m), derive_seed(seed, {v}), compose));
  return sink_nonneg_from_protocols(m, std::move(protocols));
}

struct SinkPsd {
  std::size_t m = 0;
  PsdFactorization factors;
  ApproxReport report;
  std::vector<ProjectorFamily> vertex_families;
  std::vector<std::size_t> vertex_dims;
};

/// Block-diagonal factors; block v of A_x is P^v at (x|E_v XOR s_v) / r_v
/// and block v of B_y is P^v at y|E_v, shared across rows and columns.
inline SinkPsd sink_psd_from_families(std::size_t m, std::vector<ProjectorFamily> families) {
  require(families.size() == m, "sink_xor_psd: need one projector family per vertex");
  const std::uint64_t size = std::uint64_t{1} << sink_edge_count(m);
  std::vector<std::size_t> dims;
  std::vector<PsdFactor> rows(size);
  std::vector<PsdFactor> cols(size);
  for (std::size_t v = 0; v < m; ++v) {
    const auto& family = families[v];
    require(family.input_bits() == m - 1, "sink_xor_psd: vertex family has the wrong input size");
    dims.push_back(family.dimension());
    std::vector<PsdBlock> a;
    std::vector<PsdBlock> b;
    for (const auto& p : family.projectors()) {
      ComplexMatrix pm = p.matrix();
      a.push_back(std::make_shared<const ComplexMatrix>(pm / static_cast<double>(family.rank())));
      b.push_back(std::make_shared<const ComplexMatrix>(std::move(pm)));
    }
    const auto edges = sink_incident_edges(m, v);
    const std::uint64_t pattern = sink_pattern(m, v);
    for (std::uint64_t x = 0; x < size; ++x) {
      rows[x].blocks.push_back(a[restrict_edges(x, edges) ^ pattern]);
      cols[x].blocks.push_back(b[restrict_edges(x, edges)]);
    }
  }
  PsdFactorization factors(dims, std::move(rows), std::move(cols));
  auto report = verify_entrywise(factors, sink_xor_matrix(m), Rational(1, 3));
  return {m, std::move(factors), report, std::move(families), std::move(dims)};
}

/// Vertex v uses a verified projector family on m - 1 bits with error
/// 1/(3m), drawn from derive_seed(seed, {v}).
inline SinkPsd sink_xor_psd(std::size_t m, std::uint64_t seed, const MixedOptions& options = {},
                            std::size_t cap = 4) {
  require_sink_factor_cap(m, cap);
  std::vector<ProjectorFamily> families;
  for (std::size_t v = 0; v < m; ++v)
    families.push_back(build_mixed_protocol(m - 1, sink_vertex_error(m), derive_seed(seed, {v}), options));
  return sink_psd_from_families(m, std::move(families));
}

}  // namespace eqcomm
