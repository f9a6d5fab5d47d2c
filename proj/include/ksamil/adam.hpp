#pragma once

#include "ksamil/parameter.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ksa {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(beta1 >= 0 && beta1 < 1)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("beta2 must lie in [0, 1)");
    if (!(eps > 0)) throw std::invalid_argument("eps must be > 0");
  }
};

/// Adam with bias correction.  Moment buffers are indexed like the parameter
/// store they were created for.  step() leaves gradients untouched.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) { options_.validate(); }

  const AdamOptions& options() const { return options_; }
  std::int64_t steps() const { return t_; }
  const std::vector<Tensor<Scalar>>& first_moments() const { return m_; }
  const std::vector<Tensor<Scalar>>& second_moments() const { return v_; }

  void step(ParameterStore<Scalar>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Tensor<Scalar>::zeros(p.value.shape()));
        v_.push_back(Tensor<Scalar>::zeros(p.value.shape()));
      }
    }
    if (m_.size() != params.size()) {
      throw std::invalid_argument("Adam state was created for a different parameter set");
    }
    for (const auto& p : params) {
      if (p.requires_grad && !p.has_grad()) throw std::logic_error("Adam: parameter " + p.name + " has no gradient");
    }

    ++t_;
    const Scalar b1 = static_cast<Scalar>(options_.beta1);
    const Scalar b2 = static_cast<Scalar>(options_.beta2);
    const Scalar lr = static_cast<Scalar>(options_.lr);
    const Scalar eps = static_cast<Scalar>(options_.eps);
    const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    std::size_t i = 0;
    for (auto& p : params) {
      auto& m = m_[i].array();
      auto& v = v_[i].array();
      ++i;
      if (!p.requires_grad) continue;
      const auto& g = p.grad.array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      p.value.array() -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
    }
  }

 private:
  AdamOptions options_;
  std::int64_t t_ = 0;
  std::vector<Tensor<Scalar>> m_;
  std::vector<Tensor<Scalar>> v_;
};

}  // namespace ksa
