#pragma once

// Embedding dimensionality from the spectrum of B = lambda S~^T S~ - (1 - lambda) Y~^T Y~.
// With a free embedding and linear heads the best achievable objective (up to constants)
// is the sum of the negative eigenvalues of B, attained with r = #negative eigenvalues.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "arl/numlin.hpp"

namespace arl::dimension {

enum class Mode { dense, lowrank };

inline std::string_view to_string(Mode m) { return m == Mode::dense ? "dense" : "lowrank"; }

inline Mode mode_from_string(std::string_view s) {
  if (s == "dense") return Mode::dense;
  if (s == "lowrank") return Mode::lowrank;
  throw config_error("unknown dimension mode '" + std::string(s) + "'");
}

inline constexpr Index kMaxDenseSize = 2048;

struct DimReport {
  double lambda = 0.0;
  Vector eigenvalues;  // ascending
  Index optimal_r = 0;
  double free_optimum = 0.0;
  Mode method = Mode::lowrank;
};

struct DimOptions {
  Mode mode = Mode::lowrank;
  /// Dense mode only: uniformly subsample this many samples when n exceeds it.
  std::optional<Index> subsample;
  std::uint64_t subsample_seed = 0;
};

namespace detail {

inline void check_inputs(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& s, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw invalid_argument("optimal_dim: lambda must lie in [0, 1]");
  if (y.cols() != s.cols()) throw invalid_argument("optimal_dim: Y and S have different sample counts");
  if (y.cols() < 2) throw invalid_argument("optimal_dim: need at least two samples");
  if (!y.allFinite() || !s.allFinite()) throw invalid_argument("optimal_dim: non-finite labels");
}

inline Matrix b_matrix(const Matrix& yc, const Matrix& sc, double lambda) {
  return lambda * (sc.transpose() * sc) - (1.0 - lambda) * (yc.transpose() * yc);
}

inline std::vector<Index> sample_columns(Index n, Index m, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

inline double sign_tolerance(const Vector& eigenvalues) {
  const double top = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * std::max(top, 1.0);
}

/// Counts and sums the eigenvalues below -tol.
inline DimReport summarize(double lambda, Vector eigenvalues, Mode method) {
  DimReport r;
  r.lambda = lambda;
  r.method = method;
  const double tol = sign_tolerance(eigenvalues);
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues(i) < -tol) {
      ++r.optimal_r;
      r.free_optimum += eigenvalues(i);
    }
  }
  r.eigenvalues = std::move(eigenvalues);
  return r;
}

/// Dense path: eigenvalues of the full n x n matrix B.
inline Vector dense_spectrum(const Matrix& yc, const Matrix& sc, double lambda) {
  if (yc.cols() > kMaxDenseSize) {
    throw invalid_argument("optimal_dim: dense mode is limited to n <= 2048; use lowrank mode or subsampling");
  }
  return numlin::eigh_sym(detail::b_matrix(yc, sc, lambda)).values;
}

/// Low-rank path. B = C^T W C with C = [S~; Y~] and W = diag(lambda I_q, -(1-lambda) I_p);
/// its nonzero eigenvalues are those of W C C^T, computed via the symmetric G^{1/2} W G^{1/2}.
inline Vector lowrank_spectrum(const Matrix& yc, const Matrix& sc, double lambda) {
  const Index q = sc.rows(), p = yc.rows();
  Matrix c(q + p, yc.cols());
  c.topRows(q) = sc;
  c.bottomRows(p) = yc;
  Matrix g = c * c.transpose();
  numlin::SymEig ge = numlin::eigh_sym(g);
  Vector root = ge.values.cwiseMax(0.0).cwiseSqrt();
  Matrix g_half = ge.vectors * root.asDiagonal() * ge.vectors.transpose();
  Vector w(q + p);
  w.head(q).setConstant(lambda);
  w.tail(p).setConstant(-(1.0 - lambda));
  Matrix t = g_half * w.asDiagonal() * g_half;
  return numlin::eigh_sym((0.5 * (t + t.transpose())).eval()).values;
}

inline DimReport optimal_dim(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& s, double lambda,
                             const DimOptions& options) {
  detail::check_inputs(y, s, lambda);
  Matrix yc, sc;
  if (options.mode == Mode::dense && options.subsample && y.cols() > *options.subsample) {
    auto idx = detail::sample_columns(y.cols(), *options.subsample, options.subsample_seed);
    yc = numlin::center_cols(y(Eigen::all, idx));
    sc = numlin::center_cols(s(Eigen::all, idx));
  } else {
    yc = numlin::center_cols(y);
    sc = numlin::center_cols(s);
  }
  Vector spectrum = options.mode == Mode::dense ? dense_spectrum(yc, sc, lambda) : lowrank_spectrum(yc, sc, lambda);
  return summarize(lambda, std::move(spectrum), options.mode);
}

inline DimReport optimal_dim(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& s, double lambda,
                             Mode mode = Mode::lowrank) {
  return optimal_dim(y, s, lambda, DimOptions{mode, std::nullopt, 0});
}

/// Minimises Tr(V^T B V) over n x r matrices with orthonormal columns by projected
/// gradient descent (re-orthonormalised with QR each step). Independent of any
/// eigendecomposition; returns the best value seen.
inline double free_embedding_optimum_check(const Eigen::Ref<const Matrix>& y, const Eigen::Ref<const Matrix>& s,
                                           double lambda, Index r, int iters, std::uint64_t seed) {
  detail::check_inputs(y, s, lambda);
  const Index n = y.cols();
  if (n > 64) throw invalid_argument("free_embedding_optimum_check: intended for n <= 64");
  if (r < 0 || r > n) throw invalid_argument("free_embedding_optimum_check: r out of range");
  if (r == 0) return 0.0;

  Matrix b = detail::b_matrix(numlin::center_cols(y), numlin::center_cols(s), lambda);
  const double step = 1.0 / std::max(b.norm(), 1e-300);  // ||B||_F bounds the spectral norm

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix v(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) v(i, j) = normal(rng);

  auto orthonormalize = [&](const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    return Matrix(qr.householderQ() * Matrix::Identity(n, r));
  };
  v = orthonormalize(v);
  double best = (v.transpose() * b * v).trace();
  for (int it = 0; it < iters; ++it) {
    v = orthonormalize(v - step * (b * v));
    best = std::min(best, (v.transpose() * b * v).trace());
  }
  return best;
}

}  // namespace arl::dimension
