#pragma once

// One-way quantum protocols for Equality.
//
// Pure states: Alice sends |phi_x> = N^{-1/2} sum_i (-1)^{C(x)_i} |i> for a
// certified code C; Bob measures {|phi_y><phi_y|, I - |phi_y><phi_y|}.
// Mixed states: Alice sends P_x / r for a rank-r projector P_x; Bob
// measures {P_y, I - P_y}.
//
// Also: psd-factorization extraction from one-way protocols, and the
// lower-bound certificate for arbitrary one-way pure-state protocols.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eqcomm/complexlin.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/factorization.hpp"
#include "eqcomm/gf2codes.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/rational.hpp"

namespace eqcomm {

// ---------------------------------------------------------------- pure

class PureStateFamily {
 public:
  PureStateFamily(CertifiedCode code, Rational epsilon) : code_(std::move(code)), epsilon_(epsilon) {}

  std::size_t input_bits() const noexcept { return code_.code.message_bits(); }
  std::size_t dimension() const noexcept { return code_.code.codeword_bits(); }
  const Rational& epsilon() const noexcept { return epsilon_; }
  const GeneratorMatrix& code() const noexcept { return code_.code; }
  const DistanceBandReport& band() const noexcept { return code_.report; }
  int code_attempts() const noexcept { return code_.attempts; }

  std::uint64_t distance(std::uint64_t x, std::uint64_t y) const {
    return encode_word(code_.code, x ^ y).weight();
  }

  /// <phi_x|phi_y> = 1 - 2 d(C(x), C(y)) / N, exactly.
  Rational overlap(std::uint64_t x, std::uint64_t y) const {
    const auto N = static_cast<std::int64_t>(dimension());
    return Rational(N - 2 * static_cast<std::int64_t>(distance(x, y)), N);
  }

  /// Materialized |phi_x>, entries +-1/sqrt(N).
  ComplexVector state(std::uint64_t x) const {
    const BitString c = encode_word(code_.code, x);
    const double amp = 1.0 / std::sqrt(static_cast<double>(dimension()));
    ComplexVector v(static_cast<Eigen::Index>(dimension()));
    for (std::size_t i = 0; i < dimension(); ++i) v(static_cast<Eigen::Index>(i)) = c.get(i) ? -amp : amp;
    return v;
  }

  /// max over x != y of |<phi_x|phi_y>|^2, from the band report's extreme weights.
  Rational max_false_acceptance() const {
    const auto N = static_cast<std::int64_t>(dimension());
    const auto lo = N - 2 * static_cast<std::int64_t>(band().min_weight);
    const auto hi = N - 2 * static_cast<std::int64_t>(band().max_weight);
    const auto worst = std::max(lo * lo, hi * hi);
    return Rational(worst, N * N);
  }

  int qubit_cost() const { return ceil_log2(static_cast<std::uint64_t>(dimension())); }
  /// log2(16 n / eps) before the ceiling on N.
  double real_qubit_cost() const {
    return log2_of(Rational(16 * static_cast<std::int64_t>(input_bits())) / epsilon_);
  }

 private:
  CertifiedCode code_;
  Rational epsilon_;
};

/// Certified code of length ceil(16n/eps) with delta = sqrt(eps)/2.
inline PureStateFamily build_pure_protocol(std::size_t n, const Rational& eps, std::uint64_t seed,
                                           const EqualityCodeOptions& options = {}) {
  return PureStateFamily(make_equality_code(n, eps, seed, options), eps);
}

/// Probability Bob accepts: |<phi_x|phi_y>|^2 = (1 - 2d/N)^2.
inline Rational pure_acceptance(const PureStateFamily& f, std::uint64_t x, std::uint64_t y) {
  const auto o = f.overlap(x, y);
  return o * o;
}

// --------------------------------------------------------------- mixed

struct MixedParameters {
  std::size_t rank = 0;       // r = ceil(sqrt(10 n))
  std::size_t dimension = 0;  // d = ceil(2 r / eps)
};

inline MixedParameters mixed_parameters(std::size_t n, const Rational& eps) {
  require(n >= 1, "mixed_parameters: n must be >= 1");
  require(eps > 0 && eps < Rational(1, 2), "mixed_parameters: epsilon must lie in (0, 1/2)");
  std::size_t r = 1;
  while (r * r < 10 * n) ++r;
  const auto d = static_cast<std::size_t>(ceil_of(Rational(2 * static_cast<std::int64_t>(r)) / eps));
  return {r, d};
}

struct MixedOptions {
  int max_rounds = 64;
  std::size_t max_bits = 12;
  std::uint64_t max_basis_bytes = std::uint64_t{1} << 31;
};

class ProjectorFamily {
 public:
  ProjectorFamily(std::size_t n, Rational eps, MixedParameters params, std::vector<Projector> projectors,
                  std::uint64_t seed)
      : n_(n), epsilon_(eps), params_(params), projectors_(std::move(projectors)), seed_(seed) {
    require(projectors_.size() == (std::size_t{1} << n_), "projector family needs 2^n projectors");
    for (const auto& p : projectors_)
      require(p.dimension() == params_.dimension && p.rank() == params_.rank,
              "projector family: projector with wrong dimension or rank");
  }

  std::size_t input_bits() const noexcept { return n_; }
  std::size_t rank() const noexcept { return params_.rank; }
  std::size_t dimension() const noexcept { return params_.dimension; }
  const Rational& epsilon() const noexcept { return epsilon_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Projector& projector(std::uint64_t x) const { return projectors_.at(x); }
  const std::vector<Projector>& projectors() const noexcept { return projectors_; }

  bool verified() const noexcept { return verified_; }
  double max_overlap() const noexcept { return max_overlap_; }
  int rounds() const noexcept { return rounds_; }
  std::uint64_t resampled() const noexcept { return resampled_; }

  int qubit_cost() const { return ceil_log2(static_cast<std::uint64_t>(params_.dimension)); }
  /// log2(2 sqrt(10 n) / eps) before any rounding of r or d.
  double real_qubit_cost() const {
    return 1.0 + 0.5 * std::log2(10.0 * static_cast<double>(n_)) - log2_of(epsilon_);
  }

  void record_verification(bool verified, double max_overlap, int rounds, std::uint64_t resampled) {
    verified_ = verified;
    max_overlap_ = max_overlap;
    rounds_ = rounds;
    resampled_ = resampled;
  }

 private:
  std::size_t n_;
  Rational epsilon_;
  MixedParameters params_;
  std::vector<Projector> projectors_;
  std::uint64_t seed_;
  bool verified_ = false;
  double max_overlap_ = 0;
  int rounds_ = 0;
  std::uint64_t resampled_ = 0;
};

namespace detail {

/// overlaps[x][y] = tr(P_x P_y) for y > x, for the listed rows x.
inline void overlap_rows(const std::vector<Projector>& ps, const std::vector<std::uint64_t>& rows,
                         std::vector<std::vector<double>>& table) {
  const std::size_t count = ps.size();
  const auto r = static_cast<Eigen::Index>(ps.front().rank());
  const auto d = static_cast<Eigen::Index>(ps.front().dimension());
  ComplexMatrix stacked(d, static_cast<Eigen::Index>(count) * r);
  for (std::size_t y = 0; y < count; ++y) stacked.middleCols(static_cast<Eigen::Index>(y) * r, r) = ps[y].basis();
  parallel_chunks(rows.size(), [&](std::size_t, std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t i = begin; i < end; ++i) {
      const std::uint64_t x = rows[i];
      const ComplexMatrix products = ps[x].basis().adjoint() * stacked;
      auto& row = table[x];
      row.assign(count, 0.0);
      for (std::size_t y = 0; y < count; ++y)
        row[y] = products.middleCols(static_cast<Eigen::Index>(y) * r, r).squaredNorm();
    }
  });
}

}  // namespace detail

/// 2^n Haar projectors with tr(P_x P_y) < eps r for every x != y.
/// Violating pairs are repaired by resampling one projector per pair
/// (the larger index unless the other is already being replaced).
/// Projector x in round t is drawn from derive_seed(seed, {x, t}).
inline ProjectorFamily build_mixed_protocol(std::size_t n, const Rational& eps, std::uint64_t seed,
                                            const MixedOptions& options = {}) {
  if (n > options.max_bits)
    throw ResourceCap("build_mixed_protocol: capped at n <= " + std::to_string(options.max_bits));
  const auto params = mixed_parameters(n, eps);
  const std::uint64_t count = std::uint64_t{1} << n;
  const std::uint64_t bytes = count * params.dimension * params.rank * sizeof(Complex);
  if (bytes > options.max_basis_bytes) throw ResourceCap("build_mixed_protocol: projector storage above cap");

  std::vector<Projector> ps;
  ps.reserve(count);
  for (std::uint64_t x = 0; x < count; ++x)
    ps.push_back(sample_haar_projector(params.dimension, params.rank, derive_seed(seed, {x, 0})));

  const double threshold = to_double(eps) * static_cast<double>(params.rank);
  std::vector<std::vector<double>> table(count);
  std::vector<std::uint64_t> all(count);
  for (std::uint64_t x = 0; x < count; ++x) all[x] = x;
  detail::overlap_rows(ps, all, table);

  std::uint64_t resampled = 0;
  for (int round = 1;; ++round) {
    std::vector<char> marked(count, 0);
    bool any = false;
    for (std::uint64_t x = 0; x < count; ++x)
      for (std::uint64_t y = x + 1; y < count; ++y) {
        const double o = std::max(table[x][y], table[y][x]);
        if (o >= threshold) {
          any = true;
          if (!marked[x] && !marked[y]) marked[y] = 1;
        }
      }
    if (!any) {
      double worst = 0;
      for (std::uint64_t x = 0; x < count; ++x)
        for (std::uint64_t y = x + 1; y < count; ++y) worst = std::max({worst, table[x][y], table[y][x]});
      ProjectorFamily family(n, eps, params, std::move(ps), seed);
      family.record_verification(true, worst, round, resampled);
      return family;
    }
    if (round > options.max_rounds)
      throw RetryExhausted("build_mixed_protocol: pairs still violate after " + std::to_string(options.max_rounds) +
                               " resampling rounds",
                           options.max_rounds);
    std::vector<std::uint64_t> redo;
    for (std::uint64_t x = 0; x < count; ++x)
      if (marked[x]) {
        ps[x] = sample_haar_projector(params.dimension, params.rank,
                                      derive_seed(seed, {x, static_cast<std::uint64_t>(round)}));
        redo.push_back(x);
      }
    resampled += redo.size();
    detail::overlap_rows(ps, redo, table);
    // Keep the symmetric half consistent for rows not recomputed.
    for (auto x : redo)
      for (std::uint64_t y = 0; y < count; ++y) table[y][x] = table[x][y];
  }
}

/// tr(P_y P_x) / r, the probability Bob's {P_y, I - P_y} accepts rho_x.
inline double mixed_acceptance(const ProjectorFamily& f, std::uint64_t x, std::uint64_t y) {
  return projector_overlap(f.projector(y), f.projector(x)) / static_cast<double>(f.rank());
}

// ------------------------------------------------------- psd extraction

/// A_x = rho_x and B_y = E_y, so tr(A_x B_y) is the acceptance probability.
/// Messages must be density matrices, operators must satisfy 0 <= E <= I.
inline PsdFactorization extract_psd(std::vector<ComplexMatrix> messages, std::vector<ComplexMatrix> accept_ops) {
  require(!messages.empty() && !accept_ops.empty(), "extract_psd: empty protocol");
  const auto d = messages.front().rows();
  for (const auto& rho : messages) {
    require(rho.rows() == d && rho.cols() == d, "extract_psd: message dimension mismatch");
    if (min_eigenvalue(rho) < -kMatrixTol) throw InvalidArgument("extract_psd: message is not psd");
    if (std::abs(rho.trace() - Complex(1.0, 0.0)) > kTraceTol)
      throw InvalidArgument("extract_psd: message does not have unit trace");
  }
  for (const auto& e : accept_ops) {
    require(e.rows() == d && e.cols() == d, "extract_psd: measurement dimension mismatch");
    if (min_eigenvalue(e) < -kMatrixTol) throw InvalidArgument("extract_psd: measurement operator is not psd");
    if (max_eigenvalue(e) > 1.0 + kMatrixTol)
      throw InvalidArgument("extract_psd: measurement operator exceeds identity");
  }
  return PsdFactorization::dense(std::move(messages), std::move(accept_ops));
}

inline std::vector<ComplexMatrix> pure_messages(const PureStateFamily& f) {
  std::vector<ComplexMatrix> out;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << f.input_bits()); ++x) {
    const ComplexVector v = f.state(x);
    out.push_back(v * v.adjoint());
  }
  return out;
}

inline std::vector<ComplexMatrix> mixed_messages(const ProjectorFamily& f) {
  std::vector<ComplexMatrix> out;
  for (const auto& p : f.projectors()) out.push_back(p.matrix() / static_cast<double>(f.rank()));
  return out;
}

inline std::vector<ComplexMatrix> mixed_accept_ops(const ProjectorFamily& f) {
  std::vector<ComplexMatrix> out;
  for (const auto& p : f.projectors()) out.push_back(p.matrix());
  return out;
}

/// Acceptance matrices P(x, y), row-major, 2^n x 2^n.
inline std::vector<double> acceptance_matrix(const PureStateFamily& f) {
  const std::uint64_t size = std::uint64_t{1} << f.input_bits();
  std::vector<double> out(size * size);
  for (std::uint64_t x = 0; x < size; ++x)
    for (std::uint64_t y = 0; y < size; ++y) out[x * size + y] = to_double(pure_acceptance(f, x, y));
  return out;
}

inline std::vector<double> acceptance_matrix(const ProjectorFamily& f) {
  const std::uint64_t size = std::uint64_t{1} << f.input_bits();
  std::vector<double> out(size * size);
  for (std::uint64_t x = 0; x < size; ++x)
    for (std::uint64_t y = 0; y < size; ++y) out[x * size + y] = mixed_acceptance(f, x, y);
  return out;
}

// --------------------------------------------------- lower-bound chain

/// Squared-distance band every pair of messages of an eps-error one-way
/// pure-state Equality protocol must satisfy:
/// 2 (sqrt(1-eps) - sqrt(eps))^2 <= ||phi_x - phi_y||^2 <= 2 + 4 sqrt(eps).
struct DistanceBand {
  double lower = 0;
  double upper = 0;
};

inline DistanceBand one_way_distance_band(double eps) {
  require(eps >= 0 && eps <= 0.5, "distance band needs eps in [0, 1/2]");
  return {2.0 - 4.0 * std::sqrt(eps * (1.0 - eps)), 2.0 + 4.0 * std::sqrt(eps)};
}

struct LowerBoundCertificate {
  double epsilon = 0;
  std::size_t dimension = 0;
  DistanceBand band;
  bool band_ok = false;
  double min_sq_distance = 0;
  double max_sq_distance = 0;
  /// Real Gram matrix of the realified messages.
  RealMatrix gram;
  double offdiag_max = 0;
  double diag_deviation = 0;
  std::size_t numeric_rank_of_gram = 0;

  double offdiag_bound() const { return 2.0 * std::sqrt(epsilon); }
  bool ok() const {
    return band_ok && offdiag_max <= offdiag_bound() + kMatrixTol && diag_deviation <= kMatrixTol &&
           numeric_rank_of_gram <= 2 * dimension;
  }
};

/// Runs the one-way lower-bound chain on an arbitrary protocol: check the
/// protocol computes Equality to error eps (throws with the first failing
/// (x, y) otherwise), check the distance band, then build the realified
/// Gram matrix and report how close it is to the identity and its rank.
inline LowerBoundCertificate certify_lower_bound(std::span<const ComplexVector> states,
                                                 std::span<const Projector> accept_ops, double eps) {
  require(!states.empty() && states.size() == accept_ops.size(),
          "certify_lower_bound: need one measurement per input");
  require(eps > 0 && eps <= 0.5, "certify_lower_bound: epsilon must lie in (0, 1/2]");
  const std::size_t d = static_cast<std::size_t>(states.front().size());
  for (const auto& s : states) {
    require(static_cast<std::size_t>(s.size()) == d, "certify_lower_bound: state dimension mismatch");
    require(std::abs(s.norm() - 1.0) <= kMatrixTol, "certify_lower_bound: states must be unit vectors");
  }
  for (const auto& p : accept_ops)
    require(p.dimension() == d, "certify_lower_bound: projector dimension mismatch");

  const std::size_t count = states.size();
  for (std::size_t x = 0; x < count; ++x)
    for (std::size_t y = 0; y < count; ++y) {
      const double a = accept_ops[y].acceptance(states[x]);
      const bool ok = (x == y) ? a >= 1.0 - eps - kMatrixTol : a <= eps + kMatrixTol;
      if (!ok)
        throw PreconditionViolated("certify_lower_bound: protocol errs by more than eps on (" + std::to_string(x) +
                                       ", " + std::to_string(y) + "), acceptance " + std::to_string(a),
                                   x, y);
    }

  LowerBoundCertificate cert;
  cert.epsilon = eps;
  cert.dimension = d;
  cert.band = one_way_distance_band(eps);

  RealMatrix realified(static_cast<Eigen::Index>(2 * d), static_cast<Eigen::Index>(count));
  for (std::size_t x = 0; x < count; ++x) realified.col(static_cast<Eigen::Index>(x)) = realify(states[x]);
  cert.gram = realified.transpose() * realified;

  cert.band_ok = true;
  cert.min_sq_distance = count > 1 ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t x = 0; x < count; ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    cert.diag_deviation = std::max(cert.diag_deviation, std::abs(cert.gram(xi, xi) - 1.0));
    for (std::size_t y = x + 1; y < count; ++y) {
      const auto yi = static_cast<Eigen::Index>(y);
      const double dist = (states[x] - states[y]).squaredNorm();
      cert.min_sq_distance = std::min(cert.min_sq_distance, dist);
      cert.max_sq_distance = std::max(cert.max_sq_distance, dist);
      if (dist < cert.band.lower - kMatrixTol || dist > cert.band.upper + kMatrixTol) cert.band_ok = false;
      cert.offdiag_max = std::max({cert.offdiag_max, std::abs(cert.gram(xi, yi)), std::abs(cert.gram(yi, xi))});
    }
  }
  cert.numeric_rank_of_gram = numeric_rank(cert.gram);
  return cert;
}

/// Messages and Bob's projectors of the pure fingerprint protocol.
inline std::vector<ComplexVector> pure_states(const PureStateFamily& f) {
  std::vector<ComplexVector> out;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << f.input_bits()); ++x) out.push_back(f.state(x));
  return out;
}

inline std::vector<Projector> pure_measurements(const PureStateFamily& f) {
  std::vector<Projector> out;
  for (std::uint64_t y = 0; y < (std::uint64_t{1} << f.input_bits()); ++y) out.push_back(Projector::rank_one(f.state(y)));
  return out;
}

}  // namespace eqcomm
