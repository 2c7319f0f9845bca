#pragma once

// Witness types for approximate nonnegative-rank and psd-rank upper
// bounds: M(i, j) ~ (A B)(i, j) with A, B >= 0, or M(i, j) ~ tr(A_i B_j)
// with A_i, B_j psd.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "eqcomm/complexlin.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/rational.hpp"

namespace eqcomm {

using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A = left / left_denominator (rows x inner), B = right / right_denominator
/// (inner x cols), all numerators nonnegative integers.
struct NonnegFactorization {
  IntMatrix left;
  std::int64_t left_denominator = 1;
  IntMatrix right;
  std::int64_t right_denominator = 1;

  std::size_t rows() const { return static_cast<std::size_t>(left.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(right.cols()); }
  std::size_t inner_dim() const { return static_cast<std::size_t>(left.cols()); }
  std::int64_t denominator() const { return left_denominator * right_denominator; }

  void validate() const {
    require(left.cols() == right.rows(), "nonneg factorization: inner dimensions differ");
    require(left_denominator > 0 && right_denominator > 0, "nonneg factorization: denominators must be positive");
    require(left.size() == 0 || left.minCoeff() >= 0, "nonneg factorization: negative entry in left factor");
    require(right.size() == 0 || right.minCoeff() >= 0, "nonneg factorization: negative entry in right factor");
  }

  /// Numerators of A B over denominator(), row-major. Skips zero entries
  /// of A, which keeps the indicator-style factors cheap.
  std::vector<std::int64_t> product_numerators() const {
    validate();
    const std::size_t r = rows();
    const std::size_t c = cols();
    std::vector<std::int64_t> out(r * c, 0);
    parallel_chunks(r, [&](std::size_t, std::uint64_t begin, std::uint64_t end) {
      for (std::uint64_t i = begin; i < end; ++i) {
        std::int64_t* row = out.data() + i * c;
        for (Eigen::Index k = 0; k < left.cols(); ++k) {
          const std::int64_t a = left(static_cast<Eigen::Index>(i), k);
          if (a == 0) continue;
          for (std::size_t j = 0; j < c; ++j) row[j] += a * right(k, static_cast<Eigen::Index>(j));
        }
      }
    });
    return out;
  }
};

using PsdBlock = std::shared_ptr<const ComplexMatrix>;

/// Block-diagonal psd matrix; blocks may be shared between factors.
struct PsdFactor {
  std::vector<PsdBlock> blocks;
};

/// M(i, j) = tr(A_i B_j) with A_i, B_j block-diagonal over a common
/// block structure. dim() is the total size of each factor.
class PsdFactorization {
 public:
  PsdFactorization(std::vector<std::size_t> block_dims, std::vector<PsdFactor> row_factors,
                   std::vector<PsdFactor> col_factors)
      : block_dims_(std::move(block_dims)), rows_(std::move(row_factors)), cols_(std::move(col_factors)) {
    require(!block_dims_.empty(), "psd factorization needs at least one block");
    auto check = [&](const std::vector<PsdFactor>& side) {
      for (const auto& f : side) {
        require(f.blocks.size() == block_dims_.size(), "psd factor has wrong number of blocks");
        for (std::size_t b = 0; b < block_dims_.size(); ++b) {
          require(f.blocks[b] != nullptr, "psd factor has an empty block");
          require(static_cast<std::size_t>(f.blocks[b]->rows()) == block_dims_[b] &&
                      static_cast<std::size_t>(f.blocks[b]->cols()) == block_dims_[b],
                  "psd factor block has wrong size");
        }
      }
    };
    check(rows_);
    check(cols_);
  }

  /// Single-block factorization.
  static PsdFactorization dense(std::vector<ComplexMatrix> a, std::vector<ComplexMatrix> b) {
    require(!a.empty() && !b.empty(), "psd factorization needs rows and columns");
    const auto d = static_cast<std::size_t>(a.front().rows());
    auto wrap = [](std::vector<ComplexMatrix>& side) {
      std::vector<PsdFactor> out;
      out.reserve(side.size());
      for (auto& m : side) out.push_back({{std::make_shared<const ComplexMatrix>(std::move(m))}});
      return out;
    };
    return PsdFactorization({d}, wrap(a), wrap(b));
  }

  std::size_t rows() const noexcept { return rows_.size(); }
  std::size_t cols() const noexcept { return cols_.size(); }
  std::size_t dim() const { return std::accumulate(block_dims_.begin(), block_dims_.end(), std::size_t{0}); }
  const std::vector<std::size_t>& block_dims() const noexcept { return block_dims_; }
  const PsdFactor& row_factor(std::size_t i) const { return rows_.at(i); }
  const PsdFactor& col_factor(std::size_t j) const { return cols_.at(j); }

  /// Dense A_i (block-diagonal assembly).
  ComplexMatrix row_matrix(std::size_t i) const { return assemble(rows_.at(i)); }
  ComplexMatrix col_matrix(std::size_t j) const { return assemble(cols_.at(j)); }

  Complex entry(std::size_t i, std::size_t j) const {
    Complex sum = 0;
    for (std::size_t b = 0; b < block_dims_.size(); ++b)
      sum += trace_product(*rows_.at(i).blocks[b], *cols_.at(j).blocks[b]);
    return sum;
  }

  /// Dense reconstruction tr(A_i B_j), row-major. Traces of repeated
  /// block pairs are computed once.
  std::vector<Complex> reconstruct() const {
    std::map<std::pair<const ComplexMatrix*, const ComplexMatrix*>, Complex> memo;
    std::vector<Complex> out(rows() * cols());
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t j = 0; j < cols(); ++j) {
        Complex sum = 0;
        for (std::size_t b = 0; b < block_dims_.size(); ++b) {
          const auto key = std::make_pair(rows_[i].blocks[b].get(), cols_[j].blocks[b].get());
          auto it = memo.find(key);
          if (it == memo.end()) it = memo.emplace(key, trace_product(*key.first, *key.second)).first;
          sum += it->second;
        }
        out[i * cols() + j] = sum;
      }
    return out;
  }

  /// Smallest eigenvalue over every distinct block of every factor.
  double min_block_eigenvalue() const {
    std::set<const ComplexMatrix*> seen;
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto* side : {&rows_, &cols_})
      for (const auto& f : *side)
        for (const auto& blk : f.blocks)
          if (seen.insert(blk.get()).second) lowest = std::min(lowest, min_eigenvalue(*blk));
    return lowest;
  }

 private:
  ComplexMatrix assemble(const PsdFactor& f) const {
    const auto d = static_cast<Eigen::Index>(dim());
    ComplexMatrix m = ComplexMatrix::Zero(d, d);
    Eigen::Index offset = 0;
    for (std::size_t b = 0; b < block_dims_.size(); ++b) {
      const auto s = static_cast<Eigen::Index>(block_dims_[b]);
      m.block(offset, offset, s, s) = *f.blocks[b];
      offset += s;
    }
    return m;
  }

  std::vector<std::size_t> block_dims_;
  std::vector<PsdFactor> rows_;
  std::vector<PsdFactor> cols_;
};

}  // namespace eqcomm
