#pragma once

// Closed-form kernel ridge heads for the target and the adversary.
//
// For a centred Gram matrix K~ (b x b), centred labels Y~ (p x b) and c = b*gamma,
// the regularised minimum of (1/b)||Lambda K~ - Y~||^2 + gamma ||Lambda||^2 is attained at
//   Lambda = Y~ K~ (K~^2 + c I)^{-1}
// and equals
//   J = (1/b) ||Y~||^2 - (1/b) ||P_M [Y~^T; 0]||^2,   M = [K~; sqrt(c) I].
// With (v_i, V) the eigenpairs of K~ this is J = (1/b) sum_i c/(v_i^2 + c) ||(Y~ V)_i||^2.

#include <utility>

#include "arl/kernels.hpp"
#include "arl/numlin.hpp"

namespace arl::ridge {

using kernels::CenteredGram;
using kernels::KernelSpec;

struct RidgeFit {
  Matrix lambda_coeffs;  // p x b dual coefficients
  Vector bias;           // p
  double objective = 0.0;
  double gamma = 0.0;
  KernelSpec spec;
};

struct ArlObjectiveValue {
  double total = 0.0;
  double j_target = 0.0;
  double j_sensitive = 0.0;
  double lambda = 0.0;
};

/// How arl_objective_grad differentiates the closed-form objective.
enum class GradRoute {
  spectral,    // divided differences in the eigenbasis of K~ (reference)
  resolvent,   // Cholesky of K~^2 + cI; uses K~ A^{-1} K~ = I - c A^{-1}
  projector,   // explicit pseudoinverse of M = [K~; sqrt(c) I]
};

namespace detail {

inline void check_head_inputs(Index b, const Eigen::Ref<const Matrix>& labels, double gamma) {
  if (!(gamma > 0.0)) throw invalid_argument("ridge: gamma must be positive");
  if (b < 2) throw invalid_argument("ridge: degenerate batch (need b >= 2)");
  if (labels.cols() != b) throw invalid_argument("ridge: label column count does not match the Gram size");
  if (!labels.allFinite()) throw invalid_argument("ridge: non-finite labels");
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw invalid_argument("arl objective: lambda must lie in [0, 1]");
}

// J from eigenpairs and centred labels. Uses c/(v^2+c) weights rather than
// ||y||^2 - sum f_i y_i^2, which is the same quantity without cancellation
// (columns of V span R^b, so sum_i (V^T y)_i^2 = ||y||^2).
inline double objective_from_eig(const numlin::SymEig& eig, const Matrix& centred_labels, double gamma) {
  const double b = static_cast<double>(eig.size());
  const double c = b * gamma;
  Matrix proj = centred_labels * eig.vectors;  // p x b
  Vector w = c * (eig.values.array().square() + c).inverse();
  double total = 0.0;
  for (Index i = 0; i < proj.cols(); ++i) total += w(i) * proj.col(i).squaredNorm();
  return total / b;
}

// dJ/dK~ for one head: -(1/b) V (F o (V^T Y~^T Y~ V)) V^T,
// F_ij = c (v_i + v_j) / ((v_i^2 + c)(v_j^2 + c)) (divided difference of v^2/(v^2+c)).
inline Matrix spectral_head_grad(const numlin::SymEig& eig, const Matrix& centred_labels, double gamma) {
  const Index n = eig.size();
  const double c = static_cast<double>(n) * gamma;
  Matrix proj = centred_labels * eig.vectors;  // p x b
  Matrix q = proj.transpose() * proj;
  Vector denom = (eig.values.array().square() + c).inverse();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) q(i, j) *= c * (eig.values(i) + eig.values(j)) * denom(i) * denom(j);
  }
  return -(eig.vectors * q * eig.vectors.transpose()) / static_cast<double>(n);
}

struct HeadTerms {
  double objective;
  Matrix grad;  // dJ/dK~
};

// Resolvent form: J = gamma tr(Y~ A^{-1} Y~^T), dJ/dK~ = -gamma (K~ W W^T + W W^T K~), W = A^{-1} Y~^T.
inline HeadTerms resolvent_head(const Eigen::LLT<Matrix>& chol, const Matrix& kc, const Matrix& centred_labels,
                                double gamma) {
  Matrix w = chol.solve(centred_labels.transpose());  // b x p
  const double objective = gamma * (centred_labels.transpose().cwiseProduct(w)).sum();
  Matrix kw = kc * w;
  Matrix grad = -gamma * (kw * w.transpose() + w * kw.transpose());
  return {objective, std::move(grad)};
}

// Projector form: (1/2) d||P_M u||^2 / dtheta = u^T P_{M-perp} (dM/dtheta) M^+ u, summed over label rows.
inline HeadTerms projector_head(const Matrix& kc, const Matrix& centred_labels, double gamma) {
  const Index b = kc.rows();
  const double c = static_cast<double>(b) * gamma;
  Matrix m(2 * b, b);
  m.topRows(b) = kc;
  m.bottomRows(b) = std::sqrt(c) * Matrix::Identity(b, b);
  Eigen::LLT<Matrix> gram_of_m(m.transpose() * m);
  Matrix grad = Matrix::Zero(b, b);
  double projected = 0.0;
  for (Index row = 0; row < centred_labels.rows(); ++row) {
    Vector u = Vector::Zero(2 * b);
    u.head(b) = centred_labels.row(row).transpose();
    Vector coeff = gram_of_m.solve(m.transpose() * u);  // M^+ u
    Vector pu = m * coeff;
    Vector perp = u - pu;
    projected += pu.squaredNorm();
    grad.noalias() += 2.0 * perp.head(b) * coeff.transpose();
  }
  grad = (-(0.5 * (grad + grad.transpose())) / static_cast<double>(b)).eval();
  const double objective = (centred_labels.squaredNorm() - projected) / static_cast<double>(b);
  return {objective, std::move(grad)};
}

}  // namespace detail

/// Closed-form ridge fit on a centred Gram matrix.
inline RidgeFit fit(const CenteredGram& gram, const Eigen::Ref<const Matrix>& labels, double gamma,
                    const KernelSpec& spec = KernelSpec::rbf()) {
  const Index b = gram.size();
  detail::check_head_inputs(b, labels, gamma);
  const double c = static_cast<double>(b) * gamma;

  Matrix centred = numlin::center_cols(labels);
  numlin::SymEig eig = numlin::eigh_sym(gram.centered);
  Vector shrink = eig.values.array() / (eig.values.array().square() + c);

  RidgeFit out;
  out.lambda_coeffs = (centred * eig.vectors) * shrink.asDiagonal() * eig.vectors.transpose();
  // b_opt = mean(y) - Lambda Phi~^T mean(phi) = mean(y) - Lambda D K 1 / b
  Vector kmean = gram.raw.rowwise().mean();
  kmean.array() -= kmean.mean();
  out.bias = labels.rowwise().mean() - out.lambda_coeffs * kmean;
  out.objective = detail::objective_from_eig(eig, centred, gamma);
  out.gamma = gamma;
  out.spec = spec;
  return out;
}

/// J for one head, without forming the dual coefficients.
inline double objective_J(const CenteredGram& gram, const Eigen::Ref<const Matrix>& labels, double gamma) {
  detail::check_head_inputs(gram.size(), labels, gamma);
  return detail::objective_from_eig(numlin::eigh_sym(gram.centered), numlin::center_cols(labels), gamma);
}

/// y^ = Lambda D K(Z_train, z_new) + bias.
inline Matrix predict(const RidgeFit& fitted, const Eigen::Ref<const Matrix>& z_train,
                      const Eigen::Ref<const Matrix>& z_new) {
  if (z_train.cols() != fitted.lambda_coeffs.cols()) throw invalid_argument("predict: training batch size mismatch");
  if (z_train.rows() != z_new.rows()) throw invalid_argument("predict: embedding dimension mismatch");
  Matrix cross = kernels::cross_gram(z_train, z_new, fitted.spec);
  RowVector col_mean = cross.colwise().mean();
  cross.rowwise() -= col_mean;
  Matrix out = fitted.lambda_coeffs * cross;
  out.colwise() += fitted.bias;
  return out;
}

/// (1 - lambda) J_y - lambda J_s with both heads on the same kernel of Z.
inline ArlObjectiveValue arl_objective(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& y,
                                       const Eigen::Ref<const Matrix>& s, double gamma_y, double gamma_s,
                                       double lambda, const KernelSpec& spec = KernelSpec::rbf()) {
  detail::check_lambda(lambda);
  const Index b = z.cols();
  detail::check_head_inputs(b, y, gamma_y);
  detail::check_head_inputs(b, s, gamma_s);
  CenteredGram g = kernels::center_gram(kernels::gram(z, spec));
  numlin::SymEig eig = numlin::eigh_sym(g.centered);
  ArlObjectiveValue v;
  v.lambda = lambda;
  v.j_target = detail::objective_from_eig(eig, numlin::center_cols(y), gamma_y);
  v.j_sensitive = detail::objective_from_eig(eig, numlin::center_cols(s), gamma_s);
  v.total = (1.0 - lambda) * v.j_target - lambda * v.j_sensitive;
  return v;
}

struct ArlGradient {
  ArlObjectiveValue value;
  Matrix grad;  // d total / dZ, same shape as Z
};

/// Objective and its gradient with respect to the embeddings. O(b^3 + b^2 r).
inline ArlGradient arl_objective_grad(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& y,
                                      const Eigen::Ref<const Matrix>& s, double gamma_y, double gamma_s,
                                      double lambda, const KernelSpec& spec = KernelSpec::rbf(),
                                      GradRoute route = GradRoute::spectral) {
  detail::check_lambda(lambda);
  const Index b = z.cols();
  detail::check_head_inputs(b, y, gamma_y);
  detail::check_head_inputs(b, s, gamma_s);
  if (!z.allFinite()) throw invalid_argument("arl_objective_grad: non-finite embedding");

  CenteredGram g = kernels::center_gram(kernels::gram(z, spec));
  Matrix yc = numlin::center_cols(y);
  Matrix sc = numlin::center_cols(s);

  ArlGradient out;
  out.value.lambda = lambda;
  Matrix dk;  // d total / d K~

  switch (route) {
    case GradRoute::spectral: {
      numlin::SymEig eig = numlin::eigh_sym(g.centered);
      out.value.j_target = detail::objective_from_eig(eig, yc, gamma_y);
      out.value.j_sensitive = detail::objective_from_eig(eig, sc, gamma_s);
      dk = (1.0 - lambda) * detail::spectral_head_grad(eig, yc, gamma_y) -
           lambda * detail::spectral_head_grad(eig, sc, gamma_s);
      break;
    }
    case GradRoute::resolvent: {
      Matrix ksq = g.centered * g.centered;
      auto factor = [&](double gamma) {
        Matrix a = ksq;
        a.diagonal().array() += static_cast<double>(b) * gamma;
        Eigen::LLT<Matrix> chol(a);
        if (chol.info() != Eigen::Success) throw diverged("arl_objective_grad: K~^2 + cI is not positive definite");
        return chol;
      };
      Eigen::LLT<Matrix> chol_y = factor(gamma_y);
      detail::HeadTerms ty = detail::resolvent_head(chol_y, g.centered, yc, gamma_y);
      detail::HeadTerms ts = gamma_s == gamma_y ? detail::resolvent_head(chol_y, g.centered, sc, gamma_s)
                                                : detail::resolvent_head(factor(gamma_s), g.centered, sc, gamma_s);
      out.value.j_target = ty.objective;
      out.value.j_sensitive = ts.objective;
      dk = (1.0 - lambda) * ty.grad - lambda * ts.grad;
      break;
    }
    case GradRoute::projector: {
      detail::HeadTerms ty = detail::projector_head(g.centered, yc, gamma_y);
      detail::HeadTerms ts = detail::projector_head(g.centered, sc, gamma_s);
      out.value.j_target = ty.objective;
      out.value.j_sensitive = ts.objective;
      dk = (1.0 - lambda) * ty.grad - lambda * ts.grad;
      break;
    }
  }
  out.value.total = (1.0 - lambda) * out.value.j_target - lambda * out.value.j_sensitive;

  // K~ = D K D, so dL/dK = D (dL/dK~) D.
  Matrix dk_raw = numlin::CenteringOperator(b).apply_both(dk);
  out.grad = kernels::gram_vjp(z, g.raw, dk_raw, spec);
  return out;
}

}  // namespace arl::ridge
