#pragma once

// Dense complex linear algebra for the quantum side: Haar-random
// projectors, overlaps, numeric rank, psd checks and the realification
// map C^d -> R^{2d}.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <ostream>

#include <Eigen/Dense>

#include "eqcomm/binary_io.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/random.hpp"

namespace eqcomm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Absolute tolerance for matrix identities (P^2 = P, hermiticity, ...).
inline constexpr double kMatrixTol = 1e-9;
/// Absolute tolerance for traces.
inline constexpr double kTraceTol = 1e-6;
/// Default relative singular-value threshold for numeric rank.
inline constexpr double kRankTol = 1e-8;

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

/// Orthogonal projector onto span(basis). Stored through its d x r
/// orthonormal basis U; the d x d matrix U U^dagger is formed on demand.
class Projector {
 public:
  /// `basis` must have orthonormal columns (checked to kMatrixTol).
  static Projector from_basis(ComplexMatrix basis) {
    require_finite(basis, "projector basis");
    require(basis.rows() >= 1, "projector needs d >= 1");
    require(basis.cols() <= basis.rows(), "projector rank exceeds dimension");
    const ComplexMatrix gram = basis.adjoint() * basis;
    const double dev = (gram - ComplexMatrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
    if (basis.cols() > 0 && dev > kMatrixTol)
      throw InvalidArgument("projector basis is not orthonormal (deviation " + std::to_string(dev) + ")");
    return Projector(std::move(basis));
  }

  /// |v><v| for a unit vector v.
  static Projector rank_one(const ComplexVector& v) {
    require(std::abs(v.norm() - 1.0) <= kMatrixTol, "rank_one projector needs a unit vector");
    return from_basis(ComplexMatrix(v));
  }

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(basis_.rows()); }
  std::size_t rank() const noexcept { return static_cast<std::size_t>(basis_.cols()); }
  const ComplexMatrix& basis() const noexcept { return basis_; }

  ComplexMatrix matrix() const { return basis_ * basis_.adjoint(); }

  /// ||P v||^2.
  double acceptance(const ComplexVector& v) const {
    require(static_cast<std::size_t>(v.size()) == dimension(), "projector/vector dimension mismatch");
    return (basis_.adjoint() * v).squaredNorm();
  }

  /// I - P as a rank d - r projector.
  Projector complement() const {
    const Eigen::Index d = basis_.rows();
    const Eigen::Index r = basis_.cols();
    if (r == 0) return Projector(ComplexMatrix::Identity(d, d));
    Eigen::HouseholderQR<ComplexMatrix> qr(basis_);
    const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(d, d);
    return Projector(q.rightCols(d - r));
  }

 private:
  explicit Projector(ComplexMatrix basis) : basis_(std::move(basis)) {}
  ComplexMatrix basis_;
};

struct ProjectorDefects {
  double idempotency = 0;  // max |P^2 - P|
  double hermiticity = 0;  // max |P - P^dagger|
  double trace_error = 0;  // |tr P - r|

  bool ok() const { return idempotency <= kMatrixTol && hermiticity <= kMatrixTol && trace_error <= kTraceTol; }
};

inline ProjectorDefects projector_defects(const Projector& p) {
  const ComplexMatrix m = p.matrix();
  ProjectorDefects out;
  out.idempotency = (m * m - m).cwiseAbs().maxCoeff();
  out.hermiticity = (m - m.adjoint()).cwiseAbs().maxCoeff();
  out.trace_error = std::abs(m.trace() - Complex(static_cast<double>(p.rank()), 0.0));
  return out;
}

/// d x r matrix of i.i.d. standard complex Gaussians.
inline ComplexMatrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  ComplexMatrix g(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) {
      const auto [re, im] = gaussian_pair(rng);
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Complex(re, im);
    }
  return g;
}

/// Projector onto a Haar-uniform r-dimensional subspace of C^d: the
/// column span of a complex Gaussian d x r matrix, orthonormalized by QR.
inline Projector sample_haar_projector(std::size_t d, std::size_t r, Rng& rng) {
  require(d >= 1 && r >= 1, "sample_haar_projector: need d, r >= 1");
  require(r <= d, "sample_haar_projector: rank r exceeds dimension d");
  for (int attempt = 0; attempt < 8; ++attempt) {
    const ComplexMatrix g = gaussian_matrix(d, r, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(g);
    const ComplexMatrix& packed = qr.matrixQR();
    double min_diag = std::abs(packed(0, 0));
    double max_diag = min_diag;
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(r); ++i) {
      min_diag = std::min(min_diag, std::abs(packed(i, i)));
      max_diag = std::max(max_diag, std::abs(packed(i, i)));
    }
    if (min_diag <= 1e-10 * max_diag) continue;  // rank-deficient draw, resample
    ComplexMatrix basis = qr.householderQ() * ComplexMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
    return Projector::from_basis(std::move(basis));
  }
  throw RetryExhausted("sample_haar_projector: repeated rank-deficient Gaussian draws", 8);
}

inline Projector sample_haar_projector(std::size_t d, std::size_t r, std::uint64_t seed) {
  Rng rng(seed);
  return sample_haar_projector(d, r, rng);
}

/// tr(PQ) = sum_ij |<u_i|v_j>|^2 = ||U^dagger V||_F^2.
inline double projector_overlap(const Projector& p, const Projector& q) {
  require(p.dimension() == q.dimension(), "projector_overlap: dimension mismatch");
  return (p.basis().adjoint() * q.basis()).squaredNorm();
}

/// Number of singular values above tol * sigma_max.
template <typename Derived>
std::size_t numeric_rank(const Eigen::MatrixBase<Derived>& m, double tol = kRankTol) {
  require_finite(m, "numeric_rank");
  if (m.size() == 0) return 0;
  using Plain = typename Derived::PlainObject;
  Eigen::BDCSVD<Plain> svd(m.derived());
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cutoff = tol * sv(0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

/// (Re v_0, Im v_0, Re v_1, Im v_1, ...).
inline RealVector realify(const ComplexVector& v) {
  RealVector out(2 * v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    out(2 * j) = v(j).real();
    out(2 * j + 1) = v(j).imag();
  }
  return out;
}

/// Smallest eigenvalue of the Hermitian part; throws if not Hermitian.
inline double min_eigenvalue(const ComplexMatrix& m) {
  require(m.rows() == m.cols(), "min_eigenvalue: matrix must be square");
  require_finite(m, "min_eigenvalue");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kMatrixTol)
    throw InvalidArgument("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const ComplexMatrix& m) {
  require_finite(m, "max_eigenvalue");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kMatrixTol)
    throw InvalidArgument("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

/// tr(AB) for square A, B of equal size.
inline Complex trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  require(a.rows() == b.cols() && a.cols() == b.rows(), "trace_product: dimension mismatch");
  return a.cwiseProduct(b.transpose()).sum();
}

// CMPX file: "CMPX", rows, cols as u64 LE, then row-major entries as
// (real, imag) f64 LE pairs.

inline void write_matrix(std::ostream& out, const ComplexMatrix& m) {
  io::write_magic(out, "CMPX");
  io::write_u64(out, static_cast<std::uint64_t>(m.rows()));
  io::write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      io::write_f64(out, m(i, j).real());
      io::write_f64(out, m(i, j).imag());
    }
}

inline ComplexMatrix read_matrix(std::istream& in) {
  io::expect_magic(in, "CMPX");
  const auto rows = io::read_u64(in);
  const auto cols = io::read_u64(in);
  require(rows < (1ULL << 32) && cols < (1ULL << 32), "CMPX header has invalid dimensions");
  ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double re = io::read_f64(in);
      const double im = io::read_f64(in);
      m(i, j) = Complex(re, im);
    }
  require_finite(m, "CMPX payload");
  return m;
}

}  // namespace eqcomm
