#pragma once

// Dense symmetric linear algebra used by the kernel, ridge and dimension modules.
// Everything is double precision and column-major (Eigen defaults).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "arl/error.hpp"

namespace arl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

namespace numlin {

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending, vectors in matching column order.
struct SymEig {
  Vector values;
  Matrix vectors;

  Index size() const { return values.size(); }

  Matrix reconstruct() const { return vectors * values.asDiagonal() * vectors.transpose(); }
};

/// D = I - (1/n) 1 1^T, applied as a rank-1 update.
class CenteringOperator {
public:
  explicit CenteringOperator(Index n) : n_(n) {
    if (n < 1) throw invalid_argument("centering operator needs n >= 1");
  }

  Index size() const { return n_; }

  /// M * D: subtracts each row's mean.
  Matrix apply_right(const Eigen::Ref<const Matrix>& m) const {
    if (m.cols() != n_) throw invalid_argument("centering: column count mismatch");
    Vector mean = m.rowwise().mean();
    return m.colwise() - mean;
  }

  /// D * M: subtracts each column's mean.
  Matrix apply_left(const Eigen::Ref<const Matrix>& m) const {
    if (m.rows() != n_) throw invalid_argument("centering: row count mismatch");
    RowVector mean = m.colwise().mean();
    return m.rowwise() - mean;
  }

  /// D * M * D.
  Matrix apply_both(const Eigen::Ref<const Matrix>& m) const {
    if (m.rows() != n_ || m.cols() != n_) throw invalid_argument("centering: expected square matrix");
    Vector row_mean = m.rowwise().mean();
    RowVector col_mean = m.colwise().mean();
    const double grand = m.mean();
    Matrix out = m;
    out.colwise() -= row_mean;
    out.rowwise() -= col_mean;
    out.array() += grand;
    return out;
  }

  /// Explicit D. Only small sizes are allowed; larger operators stay implicit.
  Matrix materialize() const {
    if (n_ > 64) throw invalid_argument("centering operator is not materialized for n > 64");
    return Matrix::Identity(n_, n_) - Matrix::Constant(n_, n_, 1.0 / static_cast<double>(n_));
  }

private:
  Index n_;
};

/// Ascending eigen-decomposition of a symmetric matrix.
///
/// Asymmetry up to 1e-10 (relative to the largest entry, floored at 1) is
/// removed by averaging with the transpose; anything larger is rejected.
inline SymEig eigh_sym(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() != a.cols()) throw invalid_argument("eigh_sym: matrix is not square");
  if (!a.allFinite()) throw invalid_argument("eigh_sym: non-finite input");
  if (a.size() == 0) return {};
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw invalid_argument("eigh_sym: matrix is not symmetric");
  }
  Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw invalid_argument("eigh_sym: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// M * D, i.e. every row of M shifted to zero mean.
inline Matrix center_cols(const Eigen::Ref<const Matrix>& m) {
  if (m.cols() < 1) throw invalid_argument("center_cols: need at least one column");
  if (!m.allFinite()) throw invalid_argument("center_cols: non-finite input");
  return CenteringOperator(m.cols()).apply_right(m);
}

/// (K^2 + c I)^{-1} * rhs evaluated through the eigenpairs of K.
inline Matrix spectral_shifted_apply(const SymEig& eig, double shift, const Eigen::Ref<const Matrix>& rhs) {
  if (!(shift > 0.0)) throw invalid_argument("spectral_shifted_apply: shift must be positive");
  if (rhs.rows() != eig.size()) throw invalid_argument("spectral_shifted_apply: rhs row count mismatch");
  Vector inv = (eig.values.array().square() + shift).inverse();
  Matrix projected = eig.vectors.transpose() * rhs;
  return eig.vectors * (inv.asDiagonal() * projected);
}

}  // namespace numlin
}  // namespace arl
