#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "arl/numlin.hpp"

namespace arl::kernels {

enum class Family { rbf, imq, linear };

/// Kernel family plus its scale: sigma for RBF, c for IMQ, unused for linear.
struct KernelSpec {
  Family family = Family::rbf;
  double scale = 1.0;

  static KernelSpec rbf(double sigma = 1.0) { return {Family::rbf, sigma}; }
  static KernelSpec imq(double c = 1.0) { return {Family::imq, c}; }
  static KernelSpec linear() { return {Family::linear, 1.0}; }

  void validate() const {
    if (family == Family::rbf && !(scale > 0.0)) throw invalid_argument("rbf kernel needs sigma > 0");
    if (family == Family::imq && !(scale > 0.0)) throw invalid_argument("imq kernel needs c > 0");
  }

  bool operator==(const KernelSpec&) const = default;
};

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::rbf: return "rbf";
    case Family::imq: return "imq";
    case Family::linear: return "linear";
  }
  return "?";
}

inline Family family_from_string(std::string_view name) {
  if (name == "rbf") return Family::rbf;
  if (name == "imq") return Family::imq;
  if (name == "linear") return Family::linear;
  throw config_error("unknown kernel family '" + std::string(name) + "'");
}

/// k(a, b) as a function of the squared distance (translation-invariant families only).
inline double from_sqdist(const KernelSpec& spec, double sq) {
  switch (spec.family) {
    case Family::rbf: return std::exp(-sq / (2.0 * spec.scale * spec.scale));
    case Family::imq: return 1.0 / std::sqrt(sq + spec.scale * spec.scale);
    case Family::linear: break;
  }
  throw invalid_argument("from_sqdist: linear kernel is not distance based");
}

inline double evaluate(const KernelSpec& spec, const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (spec.family == Family::linear) return a.dot(b);
  return from_sqdist(spec, (a - b).squaredNorm());
}

/// K[i][j] = k(a_i, b_j) for the columns of `a` and `b`.
inline Matrix cross_gram(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b, const KernelSpec& spec) {
  spec.validate();
  if (a.rows() != b.rows()) throw invalid_argument("cross_gram: embedding dimension mismatch");
  Matrix inner = a.transpose() * b;
  if (spec.family == Family::linear) return inner;
  Vector na = a.colwise().squaredNorm().transpose();
  RowVector nb = b.colwise().squaredNorm();
  Matrix out(a.cols(), b.cols());
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < a.cols(); ++i) {
      const double sq = std::max(0.0, na(i) + nb(j) - 2.0 * inner(i, j));
      out(i, j) = from_sqdist(spec, sq);
    }
  }
  return out;
}

/// Gram matrix of the columns of Z.
inline Matrix gram(const Eigen::Ref<const Matrix>& z, const KernelSpec& spec) {
  if (z.cols() < 1) throw invalid_argument("gram: empty batch");
  Matrix k = cross_gram(z, z, spec);
  // The expanded-distance route leaves round-off on the diagonal and between (i,j)/(j,i).
  if (spec.family != Family::linear) k.diagonal().setConstant(from_sqdist(spec, 0.0));
  return 0.5 * (k + k.transpose());
}

struct CenteredGram {
  Matrix raw;
  Matrix centered;

  Index size() const { return raw.rows(); }
};

/// K~ = D K D with D the centering operator.
inline CenteredGram center_gram(Matrix k) {
  if (k.rows() != k.cols()) throw invalid_argument("center_gram: matrix is not square");
  Matrix c = numlin::CenteringOperator(k.rows()).apply_both(k);
  c = (0.5 * (c + c.transpose())).eval();
  return {std::move(k), std::move(c)};
}

/// d k(z_i, z_j) / d z_i.
inline Vector kernel_grad(const KernelSpec& spec, const Eigen::Ref<const Vector>& zi, const Eigen::Ref<const Vector>& zj) {
  switch (spec.family) {
    case Family::rbf: {
      const double s2 = spec.scale * spec.scale;
      return -((zi - zj) / s2) * from_sqdist(spec, (zi - zj).squaredNorm());
    }
    case Family::imq: {
      const double d = (zi - zj).squaredNorm() + spec.scale * spec.scale;
      return -(zi - zj) * std::pow(d, -1.5);
    }
    case Family::linear: return zj;
  }
  return Vector::Zero(zi.size());
}

/// Pulls a gradient with respect to the Gram matrix back to the embeddings:
/// returns dL/dZ given H = dL/dK and K = gram(Z).
///
/// dL/dz_i = sum_j (H_ij + H_ji) * kernel_grad(z_i, z_j), vectorised per family.
inline Matrix gram_vjp(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& k,
                       const Eigen::Ref<const Matrix>& h, const KernelSpec& spec) {
  const Index b = z.cols();
  if (k.rows() != b || k.cols() != b || h.rows() != b || h.cols() != b) {
    throw invalid_argument("gram_vjp: shape mismatch");
  }
  Matrix hs = h + h.transpose();
  if (spec.family == Family::linear) return z * hs;

  Matrix w(b, b);
  if (spec.family == Family::rbf) {
    w = hs.cwiseProduct(k) * (-1.0 / (spec.scale * spec.scale));
  } else {
    // IMQ: d/dz_i (d^2 + c^2)^{-1/2} = -(z_i - z_j) k^3
    w = -hs.cwiseProduct(k.cwiseProduct(k).cwiseProduct(k));
  }
  // sum_j w_ij (z_i - z_j) = z_i * rowsum(w)_i - (Z w)_i   (w symmetric)
  Vector rowsum = w.rowwise().sum();
  return z * rowsum.asDiagonal() - z * w;
}

}  // namespace arl::kernels
