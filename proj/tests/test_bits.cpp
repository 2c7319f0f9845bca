#include <atomic>
#include <numeric>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "eqcomm/binary_io.hpp"
#include "eqcomm/bits.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/rational.hpp"

using namespace eqcomm;

TEST(BitString, TextRoundTrip) {
  const auto b = BitString::from_string("0101");
  EXPECT_EQ(b.size(), 4u);
  EXPECT_FALSE(b.get(0));
  EXPECT_TRUE(b.get(1));
  EXPECT_TRUE(b.get(3));
  EXPECT_EQ(b.to_string(), "0101");
  EXPECT_EQ(b.weight(), 2u);
  EXPECT_EQ(b.to_word(), 0b1010u);
  EXPECT_THROW(BitString::from_string("01a"), InvalidArgument);
}

TEST(BitString, WordRoundTripAcrossWordBoundary) {
  BitString b(130);
  b.set(0, true);
  b.set(64, true);
  b.set(129, true);
  EXPECT_EQ(b.weight(), 3u);
  b.set(64, false);
  EXPECT_EQ(b.weight(), 2u);
  EXPECT_EQ(BitString::from_word(0xdeadbeef, 32).to_word(), 0xdeadbeefu);
  EXPECT_EQ(BitString::from_word(0xff, 4).to_word(), 0xfu);
}

TEST(Hamming, Examples) {
  const auto u = BitString::from_string("0101");
  EXPECT_EQ(hamming(u, u), 0u);
  EXPECT_EQ(hamming(u, BitString::from_string("0011")), 2u);
  EXPECT_EQ(hamming(u, BitString::from_string("1010")), 4u);
  EXPECT_THROW(hamming(u, BitString::from_string("01")), InvalidArgument);
}

TEST(Hamming, EqualsWeightOfXor) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    BitString a(200), b(200);
    for (std::size_t i = 0; i < 200; ++i) {
      a.set(i, rng() & 1);
      b.set(i, rng() & 1);
    }
    EXPECT_EQ(hamming(a, b), (a ^ b).weight());
  }
}

TEST(Gf2Dot, Parity) {
  EXPECT_EQ(gf2_dot(0b1011, 0b0011), 0u);
  EXPECT_EQ(gf2_dot(0b1011, 0b0001), 1u);
  EXPECT_EQ(gf2_dot(0, ~0ULL), 0u);
}

TEST(Rational, ParseAndPrint) {
  EXPECT_EQ(parse_rational("1/4"), Rational(1, 4));
  EXPECT_EQ(parse_rational("2/8"), Rational(1, 4));
  EXPECT_EQ(parse_rational("3"), Rational(3));
  EXPECT_EQ(to_string(Rational(4, 25)), "4/25");
  EXPECT_EQ(to_string(Rational(2, 2)), "1");
  EXPECT_EQ(parse_rational(to_string(Rational(-3, 7))), Rational(-3, 7));
  EXPECT_THROW(parse_rational("1/0"), InvalidArgument);
  EXPECT_THROW(parse_rational("abc"), InvalidArgument);
  EXPECT_THROW(parse_rational("1/4x"), InvalidArgument);
  EXPECT_THROW(parse_rational("1/"), InvalidArgument);
}

TEST(Rational, Ceilings) {
  EXPECT_EQ(ceil_of(Rational(7, 2)), 4);
  EXPECT_EQ(ceil_of(Rational(8, 2)), 4);
  EXPECT_EQ(ceil_log2(Rational(8)), 3);
  EXPECT_EQ(ceil_log2(Rational(10)), 4);
  EXPECT_EQ(ceil_log2(Rational(1)), 0);
  EXPECT_EQ(ceil_log2(std::uint64_t{384}), 9);
  EXPECT_EQ(ceil_log2(std::uint64_t{256}), 8);
  EXPECT_NEAR(log2_of(Rational(1, 8)), -3.0, 1e-15);
}

TEST(Random, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 100; ++a) seen.insert(derive_seed(7, {a}));
  seen.insert(derive_seed(7, {}));
  seen.insert(derive_seed(8, {0}));
  EXPECT_EQ(seen.size(), 102u);
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
}

TEST(Random, UniformIndexRangeAndBalance) {
  Rng rng(11);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) {
    const auto v = uniform_index(rng, 6);
    ASSERT_LT(v, 6u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Random, GaussianMoments) {
  Rng rng(3);
  double sum = 0, sq = 0;
  const int samples = 200000;
  for (int i = 0; i < samples / 2; ++i) {
    const auto g = gaussian_pair(rng);
    sum += g.first + g.second;
    sq += g.first * g.first + g.second * g.second;
  }
  EXPECT_NEAR(sum / samples, 0.0, 0.01);
  EXPECT_NEAR(sq / samples, 1.0, 0.02);
}

TEST(Parallel, CoversRangeExactlyOnce) {
  const std::uint64_t count = 10007;
  std::vector<std::atomic<int>> hits(count);
  parallel_chunks(count, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
    for (auto i = b; i < e; ++i) hits[i]++;
  });
  for (auto& h : hits) ASSERT_EQ(h.load(), 1);
  int calls = 0;
  parallel_chunks(0, [&](std::size_t, std::uint64_t b, std::uint64_t e) {
    EXPECT_EQ(b, e);
    ++calls;
  });
  EXPECT_GE(calls, 1);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_chunks(100, [](std::size_t, std::uint64_t b, std::uint64_t) {
                 if (b == 0) throw InvalidArgument("boom");
               }),
               InvalidArgument);
}

TEST(BinaryIo, LittleEndianAndPadding) {
  std::stringstream s;
  io::write_u64(s, 0x0102030405060708ULL);
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 8u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x08);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x01);
  EXPECT_EQ(io::read_u64(s), 0x0102030405060708ULL);

  std::stringstream rows;
  io::write_bit_row(rows, 0b1011, 4);
  io::write_bit_row(rows, 0x1ff, 9);
  EXPECT_EQ(rows.str().size(), 3u);
  EXPECT_EQ(io::read_bit_row(rows, 4), 0b1011u);
  EXPECT_EQ(io::read_bit_row(rows, 9), 0x1ffu);

  std::stringstream bad(std::string(1, '\xf0'));
  EXPECT_THROW(io::read_bit_row(bad, 4), InvalidArgument);
  std::stringstream truncated;
  EXPECT_THROW(io::read_bit_row(truncated, 4), InvalidArgument);
}
