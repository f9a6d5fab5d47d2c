#pragma once

#include "ksamil/kernels.hpp"
#include "ksamil/nn.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>

namespace ksa {

/// Attention-based MIL pooling: a = softmax_i(w^T tanh(V h_i)), z = sum_i a_i h_i.
template <typename Scalar>
class AbMILPLayer {
 public:
  struct Output {
    Var<Scalar> z;        // [1 x L]
    Var<Scalar> weights;  // [1 x N]
  };

  AbMILPLayer() = default;

  AbMILPLayer(Index embedding_dim, Index hidden, ParameterStore<Scalar>& store, std::mt19937_64& rng,
              const std::string& prefix = "pooling")
      : embedding_dim_(embedding_dim), hidden_(hidden) {
    if (embedding_dim < 1 || hidden < 1) throw ShapeError("AbMILP widths must be >= 1");
    v_ = store.add(prefix + ".V", glorot_uniform<Scalar>({hidden, embedding_dim}, embedding_dim, hidden, rng));
    w_ = store.add(prefix + ".w", glorot_uniform<Scalar>({hidden, 1}, hidden, 1, rng));
  }

  Index embedding_dim() const { return embedding_dim_; }
  Index hidden() const { return hidden_; }
  ParamId v() const { return v_; }
  ParamId w() const { return w_; }

  Output forward(Graph<Scalar>& graph, ParameterStore<Scalar>& store, const Var<Scalar>& h) const {
    if (h.value().rank() != 2 || h.shape()[0] < 1) {
      throw std::invalid_argument("AbMILP pooling needs a non-empty bag, got " + to_string(h.shape()));
    }
    if (h.shape()[1] != embedding_dim_) {
      throw ShapeError("AbMILP expects embeddings of width " + std::to_string(embedding_dim_) +
                       ", got " + to_string(h.shape()));
    }
    auto v = graph.param(store[v_]);
    auto w = graph.param(store[w_]);
    auto logits = matmul(tanh(matmul(h, transpose(v))), w);  // [N x 1]
    auto a = softmax_rows(transpose(logits));                // [1 x N]
    return {matmul(a, h), a};
  }

 private:
  Index embedding_dim_ = 0;
  Index hidden_ = 0;
  ParamId v_;
  ParamId w_;
};

/// Width of the key/query projection: L / 8 rounded down, at least 1.
constexpr Index reduced_width(Index embedding_dim) { return std::max<Index>(1, embedding_dim / 8); }

/// Kernel self-attention with a gated residual:
///   beta(j, i) = softmax over i of S(i, j),  S = score_matrix(W_k h, W_q h)
///   h_hat_j    = gamma * sum_i beta(j, i) W_v h_i + h_j
/// gamma starts at 0, so a fresh layer is the identity.
template <typename Scalar>
class SelfAttentionLayer {
 public:
  struct Output {
    Var<Scalar> h;     // [N x L]
    Var<Scalar> beta;  // [N x N], row j sums to 1
  };

  SelfAttentionLayer() = default;

  SelfAttentionLayer(Index embedding_dim, KernelSpec kernel, ParameterStore<Scalar>& store,
                     std::mt19937_64& rng, const std::string& prefix = "self_attention")
      : embedding_dim_(embedding_dim), kernel_(kernel) {
    if (embedding_dim < 1) throw ShapeError("self-attention width must be >= 1");
    const Index lbar = reduced_width(embedding_dim);
    wq_ = store.add(prefix + ".W_q", glorot_uniform<Scalar>({lbar, embedding_dim}, embedding_dim, lbar, rng));
    wk_ = store.add(prefix + ".W_k", glorot_uniform<Scalar>({lbar, embedding_dim}, embedding_dim, lbar, rng));
    wv_ = store.add(prefix + ".W_v",
                    glorot_uniform<Scalar>({embedding_dim, embedding_dim}, embedding_dim, embedding_dim, rng));
    gamma_ = store.add(prefix + ".gamma", Tensor<Scalar>::scalar(0));
    if (kernel_has_alpha(kernel.kind)) {
      alpha_raw_ = store.add(prefix + ".alpha_raw",
                             Tensor<Scalar>::scalar(static_cast<Scalar>(softplus_inverse(kernel.alpha_init))));
    }
  }

  Index embedding_dim() const { return embedding_dim_; }
  Index key_dim() const { return reduced_width(embedding_dim_); }
  const KernelSpec& kernel() const { return kernel_; }
  ParamId wq() const { return wq_; }
  ParamId wk() const { return wk_; }
  ParamId wv() const { return wv_; }
  ParamId gamma() const { return gamma_; }
  ParamId alpha_raw() const { return alpha_raw_; }

  /// Current positive alpha, or nullopt for kernels without one.
  std::optional<double> alpha(const ParameterStore<Scalar>& store) const {
    if (!alpha_raw_.valid()) return std::nullopt;
    const double raw = static_cast<double>(store[alpha_raw_].value.item());
    return std::max(raw, 0.0) + std::log1p(std::exp(-std::abs(raw)));
  }

  Output forward(Graph<Scalar>& graph, ParameterStore<Scalar>& store, const Var<Scalar>& h) const {
    if (h.value().rank() != 2 || h.shape()[0] < 1) {
      throw std::invalid_argument("self-attention needs a non-empty bag, got " + to_string(h.shape()));
    }
    if (h.shape()[1] != embedding_dim_) {
      throw ShapeError("self-attention expects embeddings of width " + std::to_string(embedding_dim_) +
                       ", got " + to_string(h.shape()));
    }
    auto keys = matmul(h, transpose(graph.param(store[wk_])));
    auto queries = matmul(h, transpose(graph.param(store[wq_])));
    auto values = matmul(h, transpose(graph.param(store[wv_])));
    std::optional<Var<Scalar>> alpha;
    if (alpha_raw_.valid()) alpha = softplus(graph.param(store[alpha_raw_]));
    auto scores = score_matrix(kernel_.kind, keys, queries, alpha);  // S(i, j)
    auto beta = softmax_rows(transpose(scores));                     // beta(j, i)
    auto mixed = matmul(beta, values);
    return {add(scale_by(graph.param(store[gamma_]), mixed), h), beta};
  }

 private:
  Index embedding_dim_ = 0;
  KernelSpec kernel_;
  ParamId wq_, wk_, wv_, gamma_, alpha_raw_;
};

}  // namespace ksa
