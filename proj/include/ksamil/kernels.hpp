#pragma once

#include "ksamil/ops.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace ksa {

/// Similarity used for the self-attention score s_ij = k(key_i, query_j).
enum class KernelKind { dot, rbf, inverse_quadratic, laplace, module };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// rbf, inverse_quadratic and module carry a trainable shape parameter alpha.
constexpr bool kernel_has_alpha(KernelKind kind) {
  return kind == KernelKind::rbf || kind == KernelKind::inverse_quadratic ||
         kind == KernelKind::module;
}

struct KernelSpec {
  KernelKind kind = KernelKind::dot;
  double alpha_init = 1.0;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Unconstrained value whose softplus is alpha (alpha > 0).
inline double softplus_inverse(double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("alpha must be positive, got " + std::to_string(alpha));
  // log(exp(a) - 1) = a + log(1 - exp(-a)), stable for large a
  return alpha + std::log(-std::expm1(-alpha));
}

/// Score matrix S [N x N] with S(i, j) = k(keys_i, queries_j):
///
///   dot                 <k, q>
///   rbf                 exp(-alpha ||k - q||_2^2)
///   inverse_quadratic   1 / (alpha ||k - q||_2^2 + 1)
///   laplace             -||k - q||_1
///   module              ||k - q||^alpha - ||k||^alpha - ||q||^alpha   (Euclidean)
///
/// `alpha` is the positive shape parameter (a one-element node) and must be
/// given exactly for the kernels that use one.
template <typename Scalar>
Var<Scalar> score_matrix(KernelKind kind, const Var<Scalar>& keys, const Var<Scalar>& queries,
                         const std::optional<Var<Scalar>>& alpha = std::nullopt) {
  if (keys.shape() != queries.shape() || keys.value().rank() != 2) {
    throw ShapeError("score_matrix: keys " + to_string(keys.shape()) + " and queries " +
                     to_string(queries.shape()) + " must be matrices of equal shape");
  }
  if (kernel_has_alpha(kind) != alpha.has_value()) {
    throw std::invalid_argument("score_matrix: kernel " + to_string(kind) +
                                (alpha ? " takes no alpha" : " needs alpha"));
  }
  if (alpha && !(alpha->value().item() > 0)) {
    throw NumericError("score_matrix: alpha must be positive, got " +
                       std::to_string(static_cast<double>(alpha->value().item())));
  }

  auto& g = keys.graph();
  switch (kind) {
    case KernelKind::dot:
      return matmul(keys, transpose(queries));
    case KernelKind::rbf: {
      auto d2 = pairwise_distances(keys, queries, DistanceNorm::l2sq);
      return exp(neg(scale_by(*alpha, d2)));
    }
    case KernelKind::inverse_quadratic: {
      auto d2 = pairwise_distances(keys, queries, DistanceNorm::l2sq);
      return reciprocal(add_scalar(scale_by(*alpha, d2), Scalar(1)));
    }
    case KernelKind::laplace:
      return neg(pairwise_distances(keys, queries, DistanceNorm::l1));
    case KernelKind::module: {
      // ||v||^alpha = (||v||^2)^(alpha / 2)
      const Index n = keys.shape()[0], d = keys.shape()[1];
      auto half_alpha = scale(*alpha, Scalar(0.5));
      auto origin = g.constant(Tensor<Scalar>::zeros({1, d}));
      auto ones_row = g.constant(Tensor<Scalar>::constant({1, n}, Scalar(1)));
      auto ones_col = g.constant(Tensor<Scalar>::constant({n, 1}, Scalar(1)));
      auto cross = pow_var(pairwise_distances(keys, queries, DistanceNorm::l2sq), half_alpha);
      auto key_norm = pow_var(pairwise_distances(keys, origin, DistanceNorm::l2sq), half_alpha);
      auto query_norm = pow_var(pairwise_distances(queries, origin, DistanceNorm::l2sq), half_alpha);
      return cross - matmul(key_norm, ones_row) - matmul(ones_col, transpose(query_norm));
    }
  }
  throw std::invalid_argument("score_matrix: unknown kernel");
}

}  // namespace ksa
