#pragma once

#include "ksamil/ops.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ksa {

// ---------------------------------------------------------------------------
// Convolution and pooling primitives

/// Valid (unpadded) cross-correlation of x [N x C x H x W] with weights
/// [O x C x k x k] plus a per-channel bias [O].
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   Index stride = 1) {
  using T = Tensor<Scalar>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 4 || ws.size() != 4 || ws[2] != ws[3]) {
    throw ShapeError("conv2d: expected input [N,C,H,W] and square kernel [O,C,k,k], got " +
                     to_string(xs) + " and " + to_string(ws));
  }
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: kernel has " + std::to_string(ws[1]) + " input channels, input has " +
                     std::to_string(xs[1]));
  }
  if (bias.size() != ws[0]) throw ShapeError("conv2d: bias length does not match output channels");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  const Index n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const Index out_c = ws[0], k = ws[2];
  if (k > h || k > w) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + "x" + std::to_string(k) +
                     " larger than input " + std::to_string(h) + "x" + std::to_string(w));
  }
  const Index oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  const Index patch = c * k * k, positions = oh * ow;

  // im2col: column p of cols[i] holds the receptive field of output position p.
  auto im2col = [=](const Scalar* img, Matrix& cols) {
    cols.resize(patch, positions);
    for (Index ch = 0; ch < c; ++ch) {
      for (Index ki = 0; ki < k; ++ki) {
        for (Index kj = 0; kj < k; ++kj) {
          const Index row = (ch * k + ki) * k + kj;
          for (Index y = 0; y < oh; ++y) {
            const Scalar* src = img + (ch * h + y * stride + ki) * w + kj;
            for (Index xx = 0; xx < ow; ++xx) cols(row, y * ow + xx) = src[xx * stride];
          }
        }
      }
    }
  };

  std::vector<Matrix> cols(static_cast<std::size_t>(n));
  T out({n, out_c, oh, ow});
  const auto wm = weight.value().matrix();  // O x (C k k)
  const auto& b = bias.value().array();
  for (Index i = 0; i < n; ++i) {
    auto& col = cols[static_cast<std::size_t>(i)];
    im2col(x.value().data() + i * c * h * w, col);
    Eigen::Map<Matrix> dst(out.data() + i * out_c * positions, out_c, positions);
    dst.noalias() = wm * col;
    dst.colwise() += b.matrix();
  }

  return x.graph().record(
      "conv2d", std::move(out), {x, weight, bias},
      [=, cols = std::move(cols)](Graph<Scalar>& g, const T& grad) {
        const auto wm = weight.value().matrix();
        Matrix dcol;
        for (Index i = 0; i < n; ++i) {
          Eigen::Map<const Matrix> gi(grad.data() + i * out_c * positions, out_c, positions);
          const auto& col = cols[static_cast<std::size_t>(i)];
          if (weight.requires_grad()) g.grad_buffer(weight.id()).matrix().noalias() += gi * col.transpose();
          if (bias.requires_grad()) g.grad_buffer(bias.id()).array() += gi.rowwise().sum().array();
          if (!x.requires_grad()) continue;
          dcol.noalias() = wm.transpose() * gi;
          Scalar* dx = g.grad_buffer(x.id()).data() + i * c * h * w;
          for (Index ch = 0; ch < c; ++ch) {
            for (Index ki = 0; ki < k; ++ki) {
              for (Index kj = 0; kj < k; ++kj) {
                const Index row = (ch * k + ki) * k + kj;
                for (Index y = 0; y < oh; ++y) {
                  Scalar* dst = dx + (ch * h + y * stride + ki) * w + kj;
                  for (Index xx = 0; xx < ow; ++xx) dst[xx * stride] += dcol(row, y * ow + xx);
                }
              }
            }
          }
        }
      });
}

/// Non-overlapping max pooling over window x window tiles of [N x C x H x W];
/// trailing rows/columns that do not fill a tile are dropped.
template <typename Scalar>
Var<Scalar> maxpool2d(const Var<Scalar>& x, Index window) {
  using T = Tensor<Scalar>;
  const Shape& xs = x.shape();
  if (xs.size() != 4) throw ShapeError("maxpool2d: expected [N,C,H,W], got " + to_string(xs));
  if (window < 1 || window > xs[2] || window > xs[3]) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " does not fit " + to_string(xs));
  }
  const Index planes = xs[0] * xs[1], h = xs[2], w = xs[3];
  const Index oh = h / window, ow = w / window;
  T out({xs[0], xs[1], oh, ow});
  std::vector<Index> argmax(static_cast<std::size_t>(out.size()));
  const Scalar* src = x.value().data();
  for (Index p = 0; p < planes; ++p) {
    for (Index y = 0; y < oh; ++y) {
      for (Index xx = 0; xx < ow; ++xx) {
        Index best = p * h * w + (y * window) * w + xx * window;
        for (Index dy = 0; dy < window; ++dy) {
          for (Index dx = 0; dx < window; ++dx) {
            const Index idx = p * h * w + (y * window + dy) * w + xx * window + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const Index o = (p * oh + y) * ow + xx;
        out[o] = src[best];
        argmax[static_cast<std::size_t>(o)] = best;
      }
    }
  }
  return x.graph().record("maxpool2d", std::move(out), {x},
                          [x, argmax = std::move(argmax)](Graph<Scalar>& g, const T& grad) {
                            auto& gx = g.grad_buffer(x.id());
                            for (std::size_t o = 0; o < argmax.size(); ++o) {
                              gx[argmax[o]] += grad[static_cast<Index>(o)];
                            }
                          });
}

/// x [N x in] times weight [out x in] transposed, plus bias [out].
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  return add_rowwise(matmul(x, transpose(weight)), bias);
}

// ---------------------------------------------------------------------------
// Layer specs

struct LayerSpec {
  enum class Kind { conv2d, maxpool2d, linear, relu, tanh, flatten };

  Kind kind = Kind::relu;
  Index out = 0;     // conv2d output channels, linear output features
  Index kernel = 0;  // conv2d kernel size
  Index stride = 1;  // conv2d stride
  Index window = 0;  // maxpool2d window

  static LayerSpec conv2d(Index out_channels, Index kernel_size, Index stride = 1) {
    return {Kind::conv2d, out_channels, kernel_size, stride, 0};
  }
  static LayerSpec maxpool2d(Index window) { return {Kind::maxpool2d, 0, 0, 1, window}; }
  static LayerSpec linear(Index out_features) { return {Kind::linear, out_features, 0, 1, 0}; }
  static LayerSpec relu() { return {Kind::relu}; }
  static LayerSpec tanh() { return {Kind::tanh}; }
  static LayerSpec flatten() { return {Kind::flatten}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::string to_string(LayerSpec::Kind kind);
LayerSpec::Kind layer_kind_from_string(const std::string& name);

/// Classic LeNet5 feature block: two 5x5 conv/relu/pool stages followed by
/// 120- and 84-wide hidden layers; the 84-wide activation is the embedding.
std::vector<LayerSpec> lenet5_spec();

/// Per-instance shapes through the chain: element 0 is the input shape and
/// element i + 1 the output of layer i.  Throws ShapeError naming the first
/// layer that cannot accept its input.
std::vector<Shape> propagate_shapes(const std::vector<LayerSpec>& spec, const Shape& instance_shape);

// ---------------------------------------------------------------------------
// Initialisation

/// Glorot-uniform draw: U(-r, r) with r = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
Tensor<Scalar> glorot_uniform(Shape shape, Index fan_in, Index fan_out, std::mt19937_64& rng) {
  Tensor<Scalar> t(std::move(shape));
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-r, r);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

// ---------------------------------------------------------------------------
// Feature extractor

/// Instantiated layer stack mapping an instance stack [N x instance_shape] to
/// embeddings [N x L].  Parameters live in the owning model's store.
template <typename Scalar>
class Extractor {
 public:
  Extractor() = default;

  Extractor(std::vector<LayerSpec> spec, Shape instance_shape, ParameterStore<Scalar>& store,
            std::mt19937_64& rng, const std::string& prefix = "extractor")
      : spec_(std::move(spec)), instance_shape_(std::move(instance_shape)) {
    const auto shapes = propagate_shapes(spec_, instance_shape_);
    if (shapes.back().size() != 1) {
      throw ShapeError("extractor output " + to_string(shapes.back()) +
                       " is not flat; end the layer list with flatten or linear");
    }
    embedding_dim_ = shapes.back()[0];
    for (std::size_t i = 0; i < spec_.size(); ++i) {
      const auto& layer = spec_[i];
      const Shape& in = shapes[i];
      const std::string name = prefix + "." + std::to_string(i) + "." + to_string(layer.kind);
      Slot slot;
      if (layer.kind == LayerSpec::Kind::conv2d) {
        const Index fan_in = in[0] * layer.kernel * layer.kernel;
        const Index fan_out = layer.out * layer.kernel * layer.kernel;
        slot.weight = store.add(name + ".weight",
                                glorot_uniform<Scalar>({layer.out, in[0], layer.kernel, layer.kernel},
                                                       fan_in, fan_out, rng));
        slot.bias = store.add(name + ".bias", Tensor<Scalar>::zeros({layer.out}));
      } else if (layer.kind == LayerSpec::Kind::linear) {
        slot.weight = store.add(name + ".weight",
                                glorot_uniform<Scalar>({layer.out, in[0]}, in[0], layer.out, rng));
        slot.bias = store.add(name + ".bias", Tensor<Scalar>::zeros({layer.out}));
      }
      slots_.push_back(slot);
    }
  }

  Index embedding_dim() const { return embedding_dim_; }
  const Shape& instance_shape() const { return instance_shape_; }
  const std::vector<LayerSpec>& spec() const { return spec_; }

  Var<Scalar> forward(Graph<Scalar>& graph, ParameterStore<Scalar>& store, Var<Scalar> x) const {
    Shape expected{x.shape().empty() ? 0 : x.shape()[0]};
    expected.insert(expected.end(), instance_shape_.begin(), instance_shape_.end());
    if (x.shape() != expected) {
      throw ShapeError("extractor expects instances of shape " + to_string(instance_shape_) +
                       ", got stack " + to_string(x.shape()));
    }
    if (instance_shape_.size() == 1 && spec_.empty()) return x;
    for (std::size_t i = 0; i < spec_.size(); ++i) {
      const auto& layer = spec_[i];
      const auto& slot = slots_[i];
      switch (layer.kind) {
        case LayerSpec::Kind::conv2d:
          x = conv2d(x, graph.param(store[slot.weight]), graph.param(store[slot.bias]), layer.stride);
          break;
        case LayerSpec::Kind::maxpool2d:
          x = maxpool2d(x, layer.window);
          break;
        case LayerSpec::Kind::linear:
          x = linear(x, graph.param(store[slot.weight]), graph.param(store[slot.bias]));
          break;
        case LayerSpec::Kind::relu:
          x = relu(x);
          break;
        case LayerSpec::Kind::tanh:
          x = tanh(x);
          break;
        case LayerSpec::Kind::flatten:
          x = flatten(x);
          break;
      }
    }
    return x;
  }

 private:
  struct Slot {
    ParamId weight;
    ParamId bias;
  };

  std::vector<LayerSpec> spec_;
  Shape instance_shape_;
  std::vector<Slot> slots_;
  Index embedding_dim_ = 0;
};

}  // namespace ksa
