#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "eqcomm/protocols_classical.hpp"

using namespace eqcomm;

TEST(PublicEq, HashBitsFromEpsilon) {
  EXPECT_EQ(public_eq_protocol(4, Rational(1, 2)).k, 1);
  EXPECT_EQ(public_eq_protocol(4, Rational(1, 8)).k, 3);
  EXPECT_EQ(public_eq_protocol(4, Rational(1, 10)).k, 4);
  EXPECT_EQ(public_eq_protocol(4, Rational(1, 10)).exact_error(), Rational(1, 16));
  EXPECT_EQ(public_eq_protocol(4, Rational(1, 10)).cost_bits(), 5);
  EXPECT_THROW(public_eq_protocol(0, Rational(1, 4)), InvalidArgument);
  EXPECT_THROW(public_eq_protocol(4, Rational(1)), InvalidArgument);
}

TEST(PublicEq, ExactErrorByEnumeratingTapes) {
  // n = 3, k = 2: all 2^6 mask pairs. Each x != y collides on exactly
  // 2^{(n-1)k} = 16 of them, and x == y always accepts.
  const auto p = public_eq_protocol(3, Rational(1, 4));
  ASSERT_EQ(p.k, 2);
  for (std::uint64_t x = 0; x < 8; ++x)
    for (std::uint64_t y = 0; y < 8; ++y) {
      int accepted = 0;
      for (std::uint64_t s1 = 0; s1 < 8; ++s1)
        for (std::uint64_t s2 = 0; s2 < 8; ++s2) {
          const std::uint64_t tape[] = {s1, s2};
          accepted += p.accepts(tape, x, y) ? 1 : 0;
        }
      EXPECT_EQ(accepted, x == y ? 64 : 16) << x << "," << y;
    }
}

TEST(Newman, TapeCounts) {
  EXPECT_EQ(newman_tape_count(4, Rational(1, 8), Rational(1)), 192u);
  EXPECT_EQ(newman_tape_count(8, Rational(1, 8), Rational(1)), 384u);
  EXPECT_EQ(newman_tape_count(1, Rational(1, 2), Rational(1, 3)), 108u);
}

TEST(ComposeEq, FourBitsQuarter) {
  const auto p = compose_eq(4, Rational(1, 4), 1);
  EXPECT_EQ(p.tape_count(), 192u);
  EXPECT_EQ(p.hash_bits(), 3);
  EXPECT_EQ(p.delta(), Rational(1));
  EXPECT_TRUE(p.verified());
  EXPECT_LT(audit_error(p).max_error, Rational(1, 4));
}

TEST(ComposeEq, EightBitsQuarter) {
  const auto p = compose_eq(8, Rational(1, 4), kDefaultSeed);
  EXPECT_EQ(p.tape_count(), 384u);
  EXPECT_EQ(p.cost_bits(), 9 + 3 + 1);
  const auto audit = audit_error(p);
  EXPECT_LT(audit.max_error, Rational(1, 4));
  EXPECT_EQ(audit.collision_counts.size(), 256u);
  EXPECT_EQ(audit.collision_counts[0], 384u);
}

TEST(ComposeEq, LowCostSplit) {
  ComposeOptions opts;
  opts.split = ErrorSplit::low_cost;
  const auto p = compose_eq(8, Rational(1, 10), 3, opts);
  EXPECT_EQ(p.hash_bits(), 7);
  EXPECT_EQ(p.tape_count(), 45u);
  EXPECT_EQ(p.cost_bits(), 14);
  EXPECT_LT(audit_error(p).max_error, Rational(1, 10));
  EXPECT_NEAR(p.real_cost_bits(), std::log2(6.0 * 8 * 128 / (11.8 * 11.8)) + 8, 1e-9);
}

TEST(ComposeEq, RejectsBadInputs) {
  EXPECT_THROW(compose_eq(4, Rational(1, 2), 1), InvalidArgument);
  EXPECT_THROW(compose_eq(11, Rational(1, 4), 1), ResourceCap);
  ComposeOptions sampled;
  sampled.newman.mode = VerifyMode::sampled;
  sampled.newman.samples = 64;
  const auto p = compose_eq(11, Rational(1, 4), 1, sampled);
  EXPECT_FALSE(p.verified());
  EXPECT_EQ(p.tape_count(), 528u);
}

TEST(Audit, XorReductionMatchesPairwise) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = compose_eq(5, Rational(1, 4), seed);
    const auto xor_audit = audit_error(p);
    const auto pairwise = audit_error_pairwise(p);
    EXPECT_EQ(xor_audit.max_error, pairwise.max_error);
    EXPECT_EQ(pairwise.max_diagonal_error, Rational(0));
    for (std::uint64_t x = 0; x < 32; ++x)
      for (std::uint64_t y = 0; y < 32; ++y)
        if (x != y) {
          ASSERT_EQ(pairwise.error_counts[x * 32 + y], xor_audit.collision_counts[x ^ y]);
        }
  }
}

TEST(Audit, AllZeroTapeErrsAlways) {
  const PublicCoinEqProtocol base{3, 2};
  PrivateCoinProtocol p(base, Rational(1), {0, 0}, 0, 1);
  EXPECT_EQ(p.tape_count(), 1u);
  const auto audit = audit_error(p);
  EXPECT_EQ(audit.max_error, Rational(1));
  EXPECT_EQ(audit.argmax_z, 1u);
  EXPECT_EQ(audit.histogram.at(1), 7u);
}

TEST(Audit, HistogramMass) {
  const auto p = compose_eq(7, Rational(1, 8), 9);
  const auto audit = audit_error(p);
  std::uint64_t mass = 0, weighted = 0;
  for (const auto& [count, num] : audit.histogram) {
    mass += num;
    weighted += count * num;
  }
  EXPECT_EQ(mass, 127u);
  EXPECT_EQ(weighted, audit.total_collisions);
  EXPECT_EQ(Rational(static_cast<std::int64_t>(audit.histogram.rbegin()->first),
                     static_cast<std::int64_t>(p.tape_count())),
            audit.max_error);
  EXPECT_EQ(audit.collision_counts[audit.argmax_z], audit.histogram.rbegin()->first);
}

TEST(RunPrivate, OneSidedAndEmpiricalError) {
  const auto p = compose_eq(6, Rational(1, 4), 4);
  Rng rng(12);
  for (std::uint64_t x = 0; x < 64; ++x) {
    const auto r = run_private(p, x, x, rng);
    EXPECT_TRUE(r.output);
    EXPECT_EQ(r.bits_communicated, p.cost_bits());
  }
  const auto audit = audit_error(p);
  const std::uint64_t x = 5, y = 5 ^ audit.argmax_z;
  const double q = to_double(audit.max_error);
  const int trials = 20000;
  int wrong = 0;
  for (int t = 0; t < trials; ++t) wrong += run_private(p, x, y, rng).output ? 1 : 0;
  const double sigma = std::sqrt(q * (1 - q) / trials);
  EXPECT_NEAR(static_cast<double>(wrong) / trials, q, 3 * sigma);
  EXPECT_THROW(run_private(p, 64, 0, rng), InvalidArgument);
  EXPECT_TRUE(run_private(p, BitString::from_word(9, 6), BitString::from_word(9, 6), rng).output);
}

TEST(ProtocolFile, RoundTrip) {
  const auto p = compose_eq(6, Rational(1, 8), 77);
  std::stringstream s;
  write_protocol(s, p);
  const auto back = read_protocol(s);
  EXPECT_EQ(back.tape_storage(), p.tape_storage());
  EXPECT_EQ(back.delta(), p.delta());
  EXPECT_EQ(back.seed(), p.seed());
  EXPECT_EQ(back.attempts(), p.attempts());
  EXPECT_TRUE(back.verified());

  std::stringstream bad("{\"format\":\"other\"}\n");
  EXPECT_THROW(read_protocol(bad), InvalidArgument);
  std::string bytes = s.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_protocol(truncated), InvalidArgument);
}

TEST(ProtocolFile, TamperedTapesLoseVerification) {
  const PublicCoinEqProtocol base{4, 2};
  PrivateCoinProtocol p(base, Rational(1), std::vector<std::uint64_t>(2 * 192, 0), 0, 1);
  p.mark_verified(true);
  std::stringstream s;
  write_protocol(s, p);
  EXPECT_FALSE(read_protocol(s).verified());
}
