#pragma once

// Differentiable primitives.  Each function computes its forward value with
// Eigen and records a closure that maps the output gradient to the inputs.

#include "ksamil/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ksa {

enum class DistanceNorm { l1, l2sq };

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename Scalar>
void require_rank2(const char* op, const Var<Scalar>& a) {
  if (a.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + to_string(a.shape()));
  }
}

template <typename Scalar>
void require_scalar(const char* op, const Var<Scalar>& s) {
  if (s.size() != 1) {
    throw ShapeError(std::string(op) + ": expected a one-element tensor, got shape " +
                     to_string(s.shape()));
  }
}

template <typename Scalar>
void add_grad(Graph<Scalar>& g, const Var<Scalar>& v, const Tensor<Scalar>& contribution) {
  if (v.requires_grad()) g.grad_buffer(v.id()).array() += contribution.array();
}

/// Elementwise map y = f(x) with dy/dx supplied as a function of (x, y).
template <typename Scalar, typename Forward, typename Derivative>
Var<Scalar> unary(const char* op, const Var<Scalar>& a, Forward forward, Derivative derivative) {
  using T = Tensor<Scalar>;
  T out(a.shape(), forward(a.value().array()));
  T saved_out = out;
  return a.graph().record(op, std::move(out), {a},
                          [a, saved_out, derivative](Graph<Scalar>& g, const T& grad) {
                            const auto& x = a.value().array();
                            g.grad_buffer(a.id()).array() +=
                                grad.array() * derivative(x, saved_out.array());
                          });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  using T = Tensor<Scalar>;
  detail::require_rank2("matmul", a);
  detail::require_rank2("matmul", b);
  if (a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  T out({a.shape()[0], b.shape()[1]});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return a.graph().record("matmul", std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const T& grad) {
    if (a.requires_grad()) {
      g.grad_buffer(a.id()).matrix().noalias() += grad.matrix() * b.value().matrix().transpose();
    }
    if (b.requires_grad()) {
      g.grad_buffer(b.id()).matrix().noalias() += a.value().matrix().transpose() * grad.matrix();
    }
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  using T = Tensor<Scalar>;
  detail::require_rank2("transpose", a);
  T out({a.shape()[1], a.shape()[0]});
  out.matrix() = a.value().matrix().transpose();
  return a.graph().record("transpose", std::move(out), {a}, [a](Graph<Scalar>& g, const T& grad) {
    g.grad_buffer(a.id()).matrix() += grad.matrix().transpose();
  });
}

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Shape shape) {
  using T = Tensor<Scalar>;
  T out = a.value().reshaped(std::move(shape));
  return a.graph().record("reshape", std::move(out), {a}, [a](Graph<Scalar>& g, const T& grad) {
    g.grad_buffer(a.id()).array() += grad.array();
  });
}

/// Collapses all but the leading dimension: [N x ...] -> [N x F].
template <typename Scalar>
Var<Scalar> flatten(const Var<Scalar>& a) {
  const Index n = a.shape().empty() ? 1 : a.shape()[0];
  return reshape(a, Shape{n, n == 0 ? 0 : a.size() / n});
}

/// Adds a length-m bias to every row of an n x m matrix.
template <typename Scalar>
Var<Scalar> add_rowwise(const Var<Scalar>& a, const Var<Scalar>& bias) {
  using T = Tensor<Scalar>;
  detail::require_rank2("add_rowwise", a);
  if (bias.size() != a.shape()[1]) {
    throw ShapeError("add_rowwise: bias " + to_string(bias.shape()) + " does not match " +
                     to_string(a.shape()));
  }
  T out = a.value();
  out.matrix().rowwise() += bias.value().array().matrix().transpose();
  return a.graph().record("add_rowwise", std::move(out), {a, bias},
                          [a, bias](Graph<Scalar>& g, const T& grad) {
                            detail::add_grad(g, a, grad);
                            if (bias.requires_grad()) {
                              g.grad_buffer(bias.id()).array() +=
                                  grad.matrix().colwise().sum().transpose().array();
                            }
                          });
}

// ---------------------------------------------------------------------------
// Elementwise binary

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  using T = Tensor<Scalar>;
  detail::require_same_shape("add", a, b);
  T out(a.shape(), a.value().array() + b.value().array());
  return a.graph().record("add", std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const T& grad) {
    detail::add_grad(g, a, grad);
    detail::add_grad(g, b, grad);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  using T = Tensor<Scalar>;
  detail::require_same_shape("sub", a, b);
  T out(a.shape(), a.value().array() - b.value().array());
  return a.graph().record("sub", std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const T& grad) {
    detail::add_grad(g, a, grad);
    if (b.requires_grad()) g.grad_buffer(b.id()).array() -= grad.array();
  });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  using T = Tensor<Scalar>;
  detail::require_same_shape("mul", a, b);
  T out(a.shape(), a.value().array() * b.value().array());
  return a.graph().record("mul", std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const T& grad) {
    if (a.requires_grad()) g.grad_buffer(a.id()).array() += grad.array() * b.value().array();
    if (b.requires_grad()) g.grad_buffer(b.id()).array() += grad.array() * a.value().array();
  });
}

/// Multiplies every entry of `a` by the one-element tensor `s`.
template <typename Scalar>
Var<Scalar> scale_by(const Var<Scalar>& s, const Var<Scalar>& a) {
  using T = Tensor<Scalar>;
  detail::require_scalar("scale_by", s);
  const Scalar factor = s.value()[0];
  T out(a.shape(), a.value().array() * factor);
  return a.graph().record("scale_by", std::move(out), {s, a}, [s, a](Graph<Scalar>& g, const T& grad) {
    if (s.requires_grad()) g.grad_buffer(s.id())[0] += (grad.array() * a.value().array()).sum();
    if (a.requires_grad()) g.grad_buffer(a.id()).array() += grad.array() * s.value()[0];
  });
}

// ---------------------------------------------------------------------------
// Elementwise unary

template <typename Scalar>
Var<Scalar> neg(const Var<Scalar>& a) {
  return detail::unary("neg", a, [](const auto& x) { return (-x).eval(); },
                       [](const auto& x, const auto&) { return Tensor<Scalar>::Array::Constant(x.size(), Scalar(-1)); });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar c) {
  return detail::unary("scale", a, [c](const auto& x) { return (x * c).eval(); },
                       [c](const auto& x, const auto&) { return Tensor<Scalar>::Array::Constant(x.size(), c); });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar c) {
  return detail::unary("add_scalar", a, [c](const auto& x) { return (x + c).eval(); },
                       [](const auto& x, const auto&) { return Tensor<Scalar>::Array::Ones(x.size()); });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  return detail::unary("exp", a, [](const auto& x) { return x.exp().eval(); },
                       [](const auto&, const auto& y) { return y; });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  return detail::unary("log", a, [](const auto& x) { return x.log().eval(); },
                       [](const auto& x, const auto&) { return x.inverse().eval(); });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  return detail::unary("tanh", a, [](const auto& x) { return x.tanh().eval(); },
                       [](const auto&, const auto& y) { return (Scalar(1) - y.square()).eval(); });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  return detail::unary(
      "sigmoid", a,
      [](const auto& x) {
        return x.unaryExpr([](Scalar v) {
                 return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                               : std::exp(v) / (Scalar(1) + std::exp(v));
               })
            .eval();
      },
      [](const auto&, const auto& y) { return (y * (Scalar(1) - y)).eval(); });
}

/// log(1 + exp(x)), evaluated without overflow.
template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& a) {
  return detail::unary(
      "softplus", a,
      [](const auto& x) {
        return x.unaryExpr([](Scalar v) { return std::max(v, Scalar(0)) + std::log1p(std::exp(-std::abs(v))); })
            .eval();
      },
      [](const auto& x, const auto&) {
        return x.unaryExpr([](Scalar v) {
                 return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                               : std::exp(v) / (Scalar(1) + std::exp(v));
               })
            .eval();
      });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  return detail::unary("relu", a, [](const auto& x) { return x.max(Scalar(0)).eval(); },
                       [](const auto& x, const auto&) {
                         return (x > Scalar(0)).template cast<Scalar>().eval();
                       });
}

/// |x| with subgradient 0 at x = 0.
template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& a) {
  return detail::unary("abs", a, [](const auto& x) { return x.abs().eval(); },
                       [](const auto& x, const auto&) { return x.sign().eval(); });
}

template <typename Scalar>
Var<Scalar> reciprocal(const Var<Scalar>& a) {
  return detail::unary("reciprocal", a, [](const auto& x) { return x.inverse().eval(); },
                       [](const auto&, const auto& y) { return (-y.square()).eval(); });
}

template <typename Scalar>
Var<Scalar> pow_scalar(const Var<Scalar>& a, Scalar p) {
  auto out = a.value().array().pow(p).eval();
  if (!out.allFinite()) {
    throw NumericError("pow_scalar: non-finite result for exponent " + std::to_string(p));
  }
  return detail::unary("pow_scalar", a, [p](const auto& x) { return x.pow(p).eval(); },
                       [p](const auto& x, const auto&) { return (p * x.pow(p - Scalar(1))).eval(); });
}

/// Clamps into [lo, hi]; the gradient passes through only strictly inside.
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& a, Scalar lo, Scalar hi) {
  return detail::unary("clamp", a, [lo, hi](const auto& x) { return x.max(lo).min(hi).eval(); },
                       [lo, hi](const auto& x, const auto&) {
                         return ((x > lo) && (x < hi)).template cast<Scalar>().eval();
                       });
}

/// x^e for x >= 0 and a trainable one-element exponent e.  At x = 0 the
/// value is 0 and both partial derivatives are taken as 0.
template <typename Scalar>
Var<Scalar> pow_var(const Var<Scalar>& base, const Var<Scalar>& exponent) {
  using T = Tensor<Scalar>;
  detail::require_scalar("pow_var", exponent);
  const Scalar e = exponent.value()[0];
  if (!(e > 0)) throw NumericError("pow_var: exponent must be positive, got " + std::to_string(e));
  if ((base.value().array() < 0).any()) throw NumericError("pow_var: negative base");
  T out(base.shape(), base.value().array().unaryExpr([e](Scalar x) {
    return x == 0 ? Scalar(0) : std::pow(x, e);
  }));
  T saved = out;
  return base.graph().record(
      "pow_var", std::move(out), {base, exponent},
      [base, exponent, saved](Graph<Scalar>& g, const T& grad) {
        const Scalar e = exponent.value()[0];
        const auto& x = base.value().array();
        const auto& y = saved.array();
        if (base.requires_grad()) {
          auto& gb = g.grad_buffer(base.id()).array();
          for (Index i = 0; i < x.size(); ++i) {
            if (x[i] != 0) gb[i] += grad[i] * e * y[i] / x[i];
          }
        }
        if (exponent.requires_grad()) {
          Scalar acc = 0;
          for (Index i = 0; i < x.size(); ++i) {
            if (x[i] != 0) acc += grad[i] * y[i] * std::log(x[i]);
          }
          g.grad_buffer(exponent.id())[0] += acc;
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and row-wise maps

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  using T = Tensor<Scalar>;
  T out = T::scalar(a.value().array().sum());
  return a.graph().record("sum", std::move(out), {a}, [a](Graph<Scalar>& g, const T& grad) {
    g.grad_buffer(a.id()).array() += grad[0];
  });
}

/// Row-wise softmax with per-row max subtraction.
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& s) {
  using T = Tensor<Scalar>;
  detail::require_rank2("softmax_rows", s);
  T out = s.value();
  auto m = out.matrix();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  T saved = out;
  return s.graph().record("softmax_rows", std::move(out), {s}, [s, saved](Graph<Scalar>& g, const T& grad) {
    const auto y = saved.matrix();
    const auto gy = grad.matrix();
    auto gx = g.grad_buffer(s.id()).matrix();
    for (Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = gy.row(r).dot(y.row(r));
      gx.row(r).array() += y.row(r).array() * (gy.row(r).array() - dot);
    }
  });
}

/// Entry (i, j) is ||a_i - b_j||_1 or ||a_i - b_j||_2^2 for rows a_i of the
/// n x d matrix a and rows b_j of the m x d matrix b.
template <typename Scalar>
Var<Scalar> pairwise_distances(const Var<Scalar>& a, const Var<Scalar>& b, DistanceNorm norm) {
  using T = Tensor<Scalar>;
  detail::require_rank2("pairwise_distances", a);
  detail::require_rank2("pairwise_distances", b);
  if (a.shape()[1] != b.shape()[1]) {
    throw ShapeError("pairwise_distances: feature widths differ, " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  const auto A = a.value().matrix();
  const auto B = b.value().matrix();
  T out({A.rows(), B.rows()});
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < B.rows(); ++j) {
      const auto diff = (A.row(i) - B.row(j)).array();
      out(i, j) = norm == DistanceNorm::l1 ? diff.abs().sum() : diff.square().sum();
    }
  }
  return a.graph().record(
      "pairwise_distances", std::move(out), {a, b}, [a, b, norm](Graph<Scalar>& g, const T& grad) {
        const auto A = a.value().matrix();
        const auto B = b.value().matrix();
        const auto G = grad.matrix();
        using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
        T ga = T::zeros(a.shape());
        T gb = T::zeros(b.shape());
        auto GA = ga.matrix();
        auto GB = gb.matrix();
        for (Index i = 0; i < A.rows(); ++i) {
          for (Index j = 0; j < B.rows(); ++j) {
            const Scalar w = G(i, j);
            if (w == 0) continue;
            Row d = A.row(i) - B.row(j);
            if (norm == DistanceNorm::l1) {
              d = d.array().sign().matrix();
            } else {
              d *= Scalar(2);
            }
            GA.row(i) += w * d;
            GB.row(j) -= w * d;
          }
        }
        detail::add_grad(g, a, ga);
        detail::add_grad(g, b, gb);
      });
}

// ---------------------------------------------------------------------------
// Operators

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return mul(a, b); }
template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a) { return neg(a); }
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar c) { return scale(a, c); }
template <typename Scalar>
Var<Scalar> operator*(Scalar c, const Var<Scalar>& a) { return scale(a, c); }

}  // namespace ksa
