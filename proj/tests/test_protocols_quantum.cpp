#include <cmath>

#include <gtest/gtest.h>

#include "eqcomm/protocols_quantum.hpp"

using namespace eqcomm;

namespace {

ComplexVector planar(double angle) {
  ComplexVector v(2);
  v << std::cos(angle), std::sin(angle);
  return v;
}

}  // namespace

TEST(PureFamily, UnitStatesAndClosedFormOverlaps) {
  const auto f = build_pure_protocol(5, Rational(1, 8), 3);
  EXPECT_EQ(f.dimension(), 640u);
  const auto states = pure_states(f);
  for (const auto& s : states) EXPECT_NEAR(s.norm(), 1.0, 1e-12);
  for (std::uint64_t x = 0; x < 32; ++x)
    for (std::uint64_t y = 0; y < 32; ++y) {
      const double direct = states[x].dot(states[y]).real();
      ASSERT_NEAR(direct, to_double(f.overlap(x, y)), 1e-12);
      ASSERT_NEAR(direct * direct, to_double(pure_acceptance(f, x, y)), 1e-12);
    }
}

TEST(PureFamily, EightBitsCost) {
  const auto f = build_pure_protocol(8, Rational(4, 25), 1);
  EXPECT_EQ(f.dimension(), 800u);
  EXPECT_EQ(f.qubit_cost(), 10);
  EXPECT_NEAR(f.real_qubit_cost(), std::log2(800.0), 1e-12);
  EXPECT_LE(f.max_false_acceptance(), Rational(4, 25));
}

TEST(PureFamily, FalseAcceptanceBoundedByEpsilon) {
  const auto f = build_pure_protocol(6, Rational(1, 10), 11);
  EXPECT_LE(f.max_false_acceptance(), Rational(1, 10));
  Rational worst(0);
  for (std::uint64_t x = 0; x < 64; ++x) {
    EXPECT_EQ(pure_acceptance(f, x, x), Rational(1));
    for (std::uint64_t y = 0; y < 64; ++y)
      if (x != y) worst = std::max(worst, pure_acceptance(f, x, y));
  }
  EXPECT_EQ(worst, f.max_false_acceptance());
}

TEST(PureFamily, HalfDistanceGivesZeroAcceptance) {
  // Codewords at relative distance exactly 1/2 give orthogonal states.
  const auto g = GeneratorMatrix::from_rows({"10", "01", "11", "00"});
  DistanceBandReport report;
  report.pass = true;
  report.codeword_bits = 4;
  report.min_weight = 2;
  report.max_weight = 2;
  const PureStateFamily f(CertifiedCode{g, report, 1}, Rational(1, 4));
  EXPECT_EQ(f.distance(1, 2), 2u);
  EXPECT_EQ(pure_acceptance(f, 1, 2), Rational(0));
  EXPECT_NEAR(f.state(1).dot(f.state(2)).real(), 0.0, 1e-15);
  EXPECT_EQ(f.max_false_acceptance(), Rational(0));
}

TEST(MixedParameters, Examples) {
  const auto a = mixed_parameters(10, Rational(1, 4));
  EXPECT_EQ(a.rank, 10u);
  EXPECT_EQ(a.dimension, 80u);
  const auto b = mixed_parameters(4, Rational(3, 10));
  EXPECT_EQ(b.rank, 7u);
  EXPECT_EQ(b.dimension, 47u);
  EXPECT_THROW(mixed_parameters(4, Rational(1, 2)), InvalidArgument);
}

TEST(MixedFamily, OverlapsCheckedByDirectTraces) {
  const auto f = build_mixed_protocol(4, Rational(3, 10), 5);
  ASSERT_TRUE(f.verified());
  EXPECT_EQ(f.projectors().size(), 16u);
  double worst = 0;
  for (std::uint64_t x = 0; x < 16; ++x) {
    const ComplexMatrix px = f.projector(x).matrix();
    EXPECT_TRUE(projector_defects(f.projector(x)).ok());
    EXPECT_NEAR(mixed_acceptance(f, x, x), 1.0, 1e-9);
    for (std::uint64_t y = 0; y < 16; ++y) {
      if (x == y) continue;
      const double tr = (px * f.projector(y).matrix()).trace().real();
      EXPECT_LT(tr, 0.3 * 7);
      EXPECT_NEAR(mixed_acceptance(f, x, y), tr / 7, 1e-9);
      EXPECT_NEAR(mixed_acceptance(f, x, y), mixed_acceptance(f, y, x), 1e-9);
      worst = std::max(worst, tr);
    }
  }
  EXPECT_NEAR(worst, f.max_overlap(), 1e-9);
  EXPECT_EQ(f.qubit_cost(), 6);
}

TEST(MixedFamily, DeterministicPerSeed) {
  const auto a = build_mixed_protocol(3, Rational(1, 4), 9);
  const auto b = build_mixed_protocol(3, Rational(1, 4), 9);
  for (std::uint64_t x = 0; x < 8; ++x) EXPECT_EQ(a.projector(x).basis(), b.projector(x).basis());
  EXPECT_EQ(a.rounds(), b.rounds());
}

TEST(MixedFamily, CapsAndRetryBudget) {
  EXPECT_THROW(build_mixed_protocol(13, Rational(1, 4), 1), ResourceCap);
  MixedOptions tight;
  tight.max_basis_bytes = 1000;
  EXPECT_THROW(build_mixed_protocol(3, Rational(1, 4), 1, tight), ResourceCap);
  // With eps this large relative to d the threshold is rarely met at once
  // and never met with no rounds allowed; any outcome must be consistent.
  MixedOptions none;
  none.max_rounds = 0;
  try {
    const auto f = build_mixed_protocol(6, Rational(49, 100), 2, none);
    EXPECT_EQ(f.rounds(), 1);
    EXPECT_LT(f.max_overlap(), 0.49 * static_cast<double>(f.rank()));
  } catch (const RetryExhausted& e) {
    EXPECT_EQ(e.attempts(), 0);
  }
}

TEST(ExtractPsd, ReproducesAcceptanceMatrices) {
  const auto pure = build_pure_protocol(3, Rational(1, 4), 2);
  const auto fp = extract_psd(pure_messages(pure), pure_messages(pure));
  const auto pm = acceptance_matrix(pure);
  const auto rp = fp.reconstruct();
  for (std::size_t i = 0; i < pm.size(); ++i) {
    EXPECT_NEAR(rp[i].real(), pm[i], 1e-9);
    EXPECT_NEAR(rp[i].imag(), 0.0, 1e-9);
  }
  EXPECT_EQ(fp.dim(), pure.dimension());

  const auto mixed = build_mixed_protocol(3, Rational(1, 4), 2);
  const auto fm = extract_psd(mixed_messages(mixed), mixed_accept_ops(mixed));
  const auto mm = acceptance_matrix(mixed);
  const auto rm = fm.reconstruct();
  for (std::size_t i = 0; i < mm.size(); ++i) EXPECT_NEAR(rm[i].real(), mm[i], 1e-9);
  EXPECT_GE(fm.min_block_eigenvalue(), -1e-9);
}

TEST(ExtractPsd, RejectsInvalidOperators) {
  const ComplexMatrix id = ComplexMatrix::Identity(2, 2);
  EXPECT_THROW(extract_psd({id}, {id}), InvalidArgument);  // trace 2
  ComplexMatrix neg = ComplexMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(extract_psd({neg}, {id}), InvalidArgument);
  EXPECT_THROW(extract_psd({id / 2}, {id * 2}), InvalidArgument);
  EXPECT_NO_THROW(extract_psd({id / 2}, {id}));
}

TEST(DistanceBand, Values) {
  const auto b = one_way_distance_band(0.25);
  EXPECT_NEAR(b.lower, 2 - std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(b.upper, 4.0, 1e-15);
  EXPECT_NEAR(one_way_distance_band(0).lower, 2.0, 1e-15);
  EXPECT_THROW(one_way_distance_band(0.6), InvalidArgument);
}

TEST(LowerBound, PureProtocolCertificate) {
  const double eps = 1.0 / 25;
  const auto f = build_pure_protocol(6, Rational(1, 25), 4);
  const auto states = pure_states(f);
  const auto ops = pure_measurements(f);
  const auto cert = certify_lower_bound(states, ops, eps);
  EXPECT_TRUE(cert.ok());
  EXPECT_TRUE(cert.band_ok);
  EXPECT_EQ(cert.dimension, 2400u);
  EXPECT_EQ(cert.gram.rows(), 64);
  EXPECT_LE(cert.offdiag_max, 2 * std::sqrt(eps));
  EXPECT_LE(cert.diag_deviation, 1e-12);
  EXPECT_GE(cert.min_sq_distance, cert.band.lower);
  EXPECT_LE(cert.max_sq_distance, cert.band.upper);
  EXPECT_EQ(cert.numeric_rank_of_gram, 64u);
}

TEST(LowerBound, OrthonormalStates) {
  std::vector<ComplexVector> states;
  std::vector<Projector> ops;
  for (int i = 0; i < 4; ++i) {
    ComplexVector e = ComplexVector::Zero(4);
    e(i) = 1;
    states.push_back(e);
    ops.push_back(Projector::rank_one(e));
  }
  const auto cert = certify_lower_bound(states, ops, 0.1);
  EXPECT_TRUE(cert.ok());
  EXPECT_NEAR(cert.min_sq_distance, 2.0, 1e-15);
  EXPECT_NEAR(cert.offdiag_max, 0.0, 1e-15);
  EXPECT_EQ(cert.numeric_rank_of_gram, 4u);
}

TEST(LowerBound, TightTwoInputProtocolMeetsLowerBand) {
  // Measurements at angle alpha outside each state, sin^2 alpha = eps,
  // error exactly eps on every entry and distance exactly the band edge.
  for (double eps : {0.01, 0.1, 0.25}) {
    const double alpha = std::asin(std::sqrt(eps));
    const double theta = M_PI / 2 - 2 * alpha;
    const std::vector<ComplexVector> states{planar(0), planar(theta)};
    const std::vector<Projector> ops{Projector::rank_one(planar(-alpha)),
                                     Projector::rank_one(planar(theta + alpha))};
    const auto cert = certify_lower_bound(states, ops, eps);
    EXPECT_TRUE(cert.band_ok) << eps;
    EXPECT_NEAR(cert.min_sq_distance, one_way_distance_band(eps).lower, 1e-12) << eps;
  }
}

TEST(LowerBound, CorruptedProtocolReportsFirstWitness) {
  const auto f = build_pure_protocol(4, Rational(1, 10), 6);
  auto states = pure_states(f);
  states[5] = states[2];
  const auto ops = pure_measurements(f);
  try {
    certify_lower_bound(states, ops, 0.1);
    FAIL() << "expected PreconditionViolated";
  } catch (const PreconditionViolated& e) {
    EXPECT_EQ(e.x(), 5u);
    EXPECT_EQ(e.y(), 2u);
  }
}

TEST(LowerBound, RejectsMalformedInput) {
  const std::vector<ComplexVector> states{planar(0)};
  const std::vector<Projector> ops{Projector::rank_one(planar(0)), Projector::rank_one(planar(1))};
  EXPECT_THROW(certify_lower_bound(states, ops, 0.1), InvalidArgument);
  EXPECT_THROW(certify_lower_bound(states, std::span<const Projector>(ops).first(1), 0.7), InvalidArgument);
  const std::vector<ComplexVector> unnormalized{ComplexVector::Ones(2)};
  EXPECT_THROW(certify_lower_bound(unnormalized, std::span<const Projector>(ops).first(1), 0.1), InvalidArgument);
}
