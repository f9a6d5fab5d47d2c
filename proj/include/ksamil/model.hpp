#pragma once

#include "ksamil/attention.hpp"
#include "ksamil/nn.hpp"
#include "ksamil/random.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace ksa {

/// Architecture of a MIL model: extractor -> [kernel self-attention] ->
/// AbMILP pooling -> linear head -> sigmoid.
struct ModelSpec {
  std::vector<LayerSpec> extractor = lenet5_spec();
  Shape instance_shape{1, 28, 28};
  Index attention_hidden = 128;
  bool self_attention = true;
  KernelSpec kernel;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Display name: AbMILP, SA-AbMILP, GSA-, IQSA-,
/// LSA- and MSA-AbMILP.
std::string method_name(const ModelSpec& spec);

/// Plain-value result of one forward pass.
struct Prediction {
  double probability = 0;
  std::vector<double> weights;              // pooling weights a, length N
  std::optional<Tensor<double>> attention;  // beta [N x N] when self-attention is on
};

template <typename Scalar>
class MilModel {
 public:
  struct Output {
    Var<Scalar> probability;  // [1 x 1]
    Var<Scalar> weights;      // [1 x N]
    std::optional<Var<Scalar>> attention;
    Var<Scalar> embeddings;   // [N x L], before self-attention
  };

  MilModel() = default;

  /// Each component draws from its own seed stream; models differing only in
  /// the self-attention block share extractor, pooling and head weights.
  MilModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    std::mt19937_64 extractor_rng(derive_seed(seed, {1}));
    std::mt19937_64 attention_rng(derive_seed(seed, {2}));
    std::mt19937_64 pooling_rng(derive_seed(seed, {3}));
    std::mt19937_64 head_rng(derive_seed(seed, {4}));
    extractor_ = Extractor<Scalar>(spec_.extractor, spec_.instance_shape, params_, extractor_rng);
    const Index width = extractor_.embedding_dim();
    if (spec_.self_attention) {
      attention_.emplace(width, spec_.kernel, params_, attention_rng);
    }
    pooling_ = AbMILPLayer<Scalar>(width, spec_.attention_hidden, params_, pooling_rng);
    head_weight_ = params_.add("head.weight", glorot_uniform<Scalar>({1, width}, width, 1, head_rng));
    head_bias_ = params_.add("head.bias", Tensor<Scalar>::zeros({1}));
  }

  const ModelSpec& spec() const { return spec_; }
  Index embedding_dim() const { return extractor_.embedding_dim(); }
  ParameterStore<Scalar>& params() { return params_; }
  const ParameterStore<Scalar>& params() const { return params_; }
  const Extractor<Scalar>& extractor() const { return extractor_; }
  const std::optional<SelfAttentionLayer<Scalar>>& attention() const { return attention_; }
  const AbMILPLayer<Scalar>& pooling() const { return pooling_; }
  ParamId head_weight() const { return head_weight_; }
  ParamId head_bias() const { return head_bias_; }

  Output forward(Graph<Scalar>& graph, const Var<Scalar>& instances) {
    if (instances.shape().empty() || instances.shape()[0] < 1) {
      throw std::invalid_argument("model forward needs a non-empty bag");
    }
    auto h = extractor_.forward(graph, params_, instances);
    Output out;
    out.embeddings = h;
    if (attention_) {
      auto sa = attention_->forward(graph, params_, h);
      h = sa.h;
      out.attention = sa.beta;
    }
    auto pooled = pooling_.forward(graph, params_, h);
    out.weights = pooled.weights;
    auto logit = linear(pooled.z, graph.param(params_[head_weight_]), graph.param(params_[head_bias_]));
    out.probability = sigmoid(logit);
    return out;
  }

  Output forward(Graph<Scalar>& graph, const Tensor<Scalar>& instances) {
    return forward(graph, graph.constant(instances));
  }

  Prediction predict(const Tensor<Scalar>& instances) {
    Graph<Scalar> graph;
    auto out = forward(graph, instances);
    Prediction p;
    p.probability = static_cast<double>(out.probability.value().item());
    const auto& a = out.weights.value();
    p.weights.assign(a.data(), a.data() + a.size());
    if (out.attention) {
      const auto& beta = out.attention->value();
      p.attention = Tensor<double>(beta.shape(), beta.array().template cast<double>());
    }
    return p;
  }

 private:
  ModelSpec spec_;
  ParameterStore<Scalar> params_;
  Extractor<Scalar> extractor_;
  std::optional<SelfAttentionLayer<Scalar>> attention_;
  AbMILPLayer<Scalar> pooling_;
  ParamId head_weight_;
  ParamId head_bias_;
};

/// Smallest and largest probability fed to the logarithms of bce_loss.
inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy -(y log p + (1 - y) log(1 - p)) with p clamped to
/// [1e-7, 1 - 1e-7].
template <typename Scalar>
Var<Scalar> bce_loss(const Var<Scalar>& probability, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
  auto p = clamp(probability, Scalar(kProbabilityClamp), Scalar(1 - kProbabilityClamp));
  if (label == 1) return neg(sum(log(p)));
  return neg(sum(log(add_scalar(neg(p), Scalar(1)))));
}

using MilModelD = MilModel<double>;

}  // namespace ksa
