#pragma once

#include "ksamil/tensor.hpp"

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ksa {

/// Trainable tensor with a name and an accumulated gradient.  The gradient
/// buffer stays empty until the first backward pass reaches the parameter.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = true;

  bool has_grad() const { return grad.size() == value.size() && !grad.empty(); }

  void zero_grad() {
    if (has_grad()) grad.array().setZero();
  }

  void accumulate(const Tensor<Scalar>& g) {
    if (!has_grad()) grad = Tensor<Scalar>::zeros(value.shape());
    grad.array() += g.array();
  }
};

/// Stable handle to a parameter inside a ParameterStore.  Handles survive
/// copies of the owning store, so models can be copied by value.
struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
  friend bool operator==(ParamId, ParamId) = default;
};

template <typename Scalar>
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor<Scalar> value, bool requires_grad = true) {
    if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    ParamId id{params_.size()};
    by_name_.emplace(name, id.index);
    params_.push_back(Parameter<Scalar>{std::move(name), std::move(value), {}, requires_grad});
    return id;
  }

  Parameter<Scalar>& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter<Scalar>& operator[](ParamId id) const { return params_.at(id.index); }

  Parameter<Scalar>& at(const std::string& name) { return params_.at(by_name_.at(name)); }
  const Parameter<Scalar>& at(const std::string& name) const {
    return params_.at(by_name_.at(name));
  }
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  Index total_size() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::vector<Parameter<Scalar>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace ksa
