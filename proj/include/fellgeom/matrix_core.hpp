#pragma once

// Dense complex matrix primitives shared by every other header.
//
// Matrices are Eigen::MatrixXcd. Anything that needs a real-linear solve
// (self-adjointness, J-reality) goes through RealLinearSystem: each complex
// unknown contributes two adjacent real columns (re, im).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fellgeom {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Absolute tolerance for residuals and relative tolerance for rank decisions.
inline constexpr double kDefaultTolerance = 1e-9;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotHermitianError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Block decomposition of C^m into consecutive blocks of sizes n_1..n_k.
class BlockStructure {
 public:
  BlockStructure() = default;
  explicit BlockStructure(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    offsets_.reserve(dims_.size());
    std::size_t acc = 0;
    for (std::size_t n : dims_) {
      if (n == 0) throw DimensionError("block dimension must be positive");
      offsets_.push_back(acc);
      acc += n;
    }
    total_ = acc;
  }

  std::size_t block_count() const { return dims_.size(); }
  std::size_t dim(std::size_t block) const { return dims_.at(block); }
  std::size_t offset(std::size_t block) const { return offsets_.at(block); }
  std::size_t total() const { return total_; }
  const std::vector<std::size_t>& dims() const { return dims_; }

  bool operator==(const BlockStructure&) const = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

inline auto block_of(const ComplexMatrix& m, const BlockStructure& bs, std::size_t i, std::size_t j) {
  return m.block(static_cast<Eigen::Index>(bs.offset(i)), static_cast<Eigen::Index>(bs.offset(j)),
                 static_cast<Eigen::Index>(bs.dim(i)), static_cast<Eigen::Index>(bs.dim(j)));
}

inline auto block_of(ComplexMatrix& m, const BlockStructure& bs, std::size_t i, std::size_t j) {
  return m.block(static_cast<Eigen::Index>(bs.offset(i)), static_cast<Eigen::Index>(bs.offset(j)),
                 static_cast<Eigen::Index>(bs.dim(i)), static_cast<Eigen::Index>(bs.dim(j)));
}

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    const Complex z = m.data()[k];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

inline ComplexMatrix adjoint(const ComplexMatrix& m) { return m.adjoint(); }

inline void require_same_square(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw DimensionError(std::string(what) + ": operands must be square of equal dimension");
  }
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "commutator");
  return a * b - b * a;
}

inline ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_square(a, b, "anticommutator");
  return a * b + b * a;
}

/// Largest absolute entry; the residual measure used by all entrywise checks.
inline double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Largest singular value.
inline double operator_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().size() == 0 ? 0.0 : svd.singularValues()(0);
}

/// Ascending real eigenvalues of a Hermitian matrix, with multiplicity.
inline std::vector<double> hermitian_spectrum(const ComplexMatrix& m, double tol = kDefaultTolerance) {
  if (m.rows() != m.cols()) throw DimensionError("hermitian_spectrum: matrix must be square");
  if (max_abs(m - m.adjoint()) > tol) throw NotHermitianError("hermitian_spectrum: matrix is not Hermitian");
  if (m.rows() == 0) return {};
  const ComplexMatrix h = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  const RealVector& ev = es.eigenvalues();
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end());
  return out;
}

/// Numerical rank: singular values above rel_tol * sigma_max (and above a tiny absolute floor).
inline std::size_t numerical_rank(const ComplexMatrix& m, double rel_tol = kDefaultTolerance) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 1e-300) return 0;
  std::size_t r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > rel_tol * s(0)) ++r;
  }
  return r;
}

struct TensorDims {
  std::size_t left_rows;   // n_i
  std::size_t left_cols;   // n_j
  std::size_t right_rows;  // n_i'
  std::size_t right_cols;  // n_j'
};

/// True iff block = e (x) f (Kronecker) for some n_i x n_j matrix e and n_i' x n_j' matrix f.
inline bool tensor_rank_one(const ComplexMatrix& block, const TensorDims& d, double tol = kDefaultTolerance) {
  const auto rows = static_cast<Eigen::Index>(d.left_rows * d.right_rows);
  const auto cols = static_cast<Eigen::Index>(d.left_cols * d.right_cols);
  if (block.rows() != rows || block.cols() != cols) {
    throw DimensionError("tensor_rank_one: block shape does not match tensor dimensions");
  }
  // Rearrangement: R[(r,c),(r',c')] = block[r*n_i' + r', c*n_j' + c'].
  const auto lr = static_cast<Eigen::Index>(d.left_rows), lc = static_cast<Eigen::Index>(d.left_cols);
  const auto rr = static_cast<Eigen::Index>(d.right_rows), rc = static_cast<Eigen::Index>(d.right_cols);
  ComplexMatrix reshaped(lr * lc, rr * rc);
  for (Eigen::Index r = 0; r < lr; ++r)
    for (Eigen::Index c = 0; c < lc; ++c)
      for (Eigen::Index r2 = 0; r2 < rr; ++r2)
        for (Eigen::Index c2 = 0; c2 < rc; ++c2)
          reshaped(r * lc + c, r2 * rc + c2) = block(r * rr + r2, c * rc + c2);
  return numerical_rank(reshaped, tol) <= 1;
}

// ---------------------------------------------------------------------------
// Realification
// ---------------------------------------------------------------------------

enum class Part { re, im };

/// Column label of a realified system: one real part of one complex entry of one block.
struct UnknownLabel {
  std::size_t block;
  std::size_t row;
  std::size_t col;
  Part part;

  bool operator==(const UnknownLabel&) const = default;
};

struct RealLinearSystem {
  RealMatrix coefficients;  // rows = scalar real constraints, cols = unknowns
  std::vector<UnknownLabel> unknowns;

  std::size_t unknown_count() const { return unknowns.size(); }
};

namespace detail {

/// Rows of `kernel_rows` (d x n) brought to reduced echelon form with pivots
/// chosen left to right, then orthonormalised in pivot order.
inline RealMatrix canonical_basis(RealMatrix rows) {
  const Eigen::Index d = rows.rows();
  const Eigen::Index n = rows.cols();
  Eigen::Index lead = 0;
  for (Eigen::Index c = 0; c < n && lead < d; ++c) {
    Eigen::Index best = lead;
    for (Eigen::Index r = lead + 1; r < d; ++r) {
      if (std::abs(rows(r, c)) > std::abs(rows(best, c))) best = r;
    }
    if (std::abs(rows(best, c)) < 1e-7) continue;
    rows.row(lead).swap(rows.row(best));
    rows.row(lead) /= rows(lead, c);
    for (Eigen::Index r = 0; r < d; ++r) {
      if (r != lead) rows.row(r) -= rows(r, c) * rows.row(lead);
    }
    ++lead;
  }
  // Modified Gram-Schmidt in pivot order keeps the leading structure.
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index q = 0; q < r; ++q) rows.row(r) -= rows.row(r).dot(rows.row(q)) * rows.row(q);
    const double nrm = rows.row(r).norm();
    if (nrm > 0) rows.row(r) /= nrm;
  }
  for (Eigen::Index k = 0; k < rows.size(); ++k) {
    if (std::abs(rows.data()[k]) < 1e-15) rows.data()[k] = 0.0;
  }
  return rows;
}

}  // namespace detail

/// Orthonormal basis of ker(S.coefficients), returned as columns.
/// Rank is decided by singular values <= tol * sigma_max.
inline RealMatrix real_nullspace(const RealLinearSystem& sys, double tol = kDefaultTolerance) {
  const RealMatrix& a = sys.coefficients;
  const Eigen::Index n = static_cast<Eigen::Index>(sys.unknowns.size());
  if (a.cols() != n) throw DimensionError("real_nullspace: coefficient columns do not match unknown labels");
  if (n == 0) return RealMatrix(0, 0);

  RealMatrix reduced;
  if (a.rows() > n) {
    Eigen::HouseholderQR<RealMatrix> qr(a);
    reduced = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  } else {
    reduced = a;
  }

  RealMatrix kernel;  // n x d
  if (reduced.rows() == 0) {
    kernel = RealMatrix::Identity(n, n);
  } else {
    Eigen::JacobiSVD<RealMatrix> svd(reduced, Eigen::ComputeFullV);
    const RealVector& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s(k) > tol * smax && s(k) > 0.0) ++rank;
    }
    kernel = svd.matrixV().rightCols(n - rank);
  }
  if (kernel.cols() == 0) return RealMatrix(n, 0);
  return detail::canonical_basis(kernel.transpose()).transpose();
}

}  // namespace fellgeom
