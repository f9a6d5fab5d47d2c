#pragma once

#include "ksamil/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ksa {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0;
  double max_abs_error = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0;
  bool passed = true;
};

/// Compares analytic gradients of a scalar function with central differences
/// (f(x + eps) - f(x - eps)) / 2 eps, entry by entry for every parameter.
///
/// `loss` builds the scalar output on a fresh graph from the current parameter
/// values.  The relative error of one entry is |analytic - numeric| divided by
/// max(|analytic|, |numeric|, scale_floor); the floor keeps entries whose true
/// gradient is zero from dividing by round-off.
template <typename Scalar, typename LossFn>
GradCheckReport grad_check(LossFn&& loss, const std::vector<Parameter<Scalar>*>& params, Scalar eps,
                           Scalar tol, Scalar scale_floor = Scalar(1e-6)) {
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");

  auto evaluate = [&]() -> Scalar {
    Graph<Scalar> graph;
    return loss(graph).value().item();
  };

  for (auto* p : params) p->grad = Tensor<Scalar>{};
  {
    Graph<Scalar> graph;
    auto out = loss(graph);
    graph.backward(out);
  }

  GradCheckReport report;
  for (auto* p : params) {
    GradCheckEntry entry{p->name, 0, 0};
    const Tensor<Scalar> analytic = p->has_grad() ? p->grad : Tensor<Scalar>::zeros(p->value.shape());
    for (Index i = 0; i < p->value.size(); ++i) {
      const Scalar saved = p->value[i];
      p->value[i] = saved + eps;
      const Scalar up = evaluate();
      p->value[i] = saved - eps;
      const Scalar down = evaluate();
      p->value[i] = saved;
      const Scalar numeric = (up - down) / (Scalar(2) * eps);
      if (!std::isfinite(static_cast<double>(numeric))) {
        throw NumericError("grad_check: non-finite difference quotient for " + p->name);
      }
      const Scalar diff = std::abs(analytic[i] - numeric);
      const Scalar denom = std::max({std::abs(analytic[i]), std::abs(numeric), scale_floor});
      entry.max_abs_error = std::max(entry.max_abs_error, static_cast<double>(diff));
      entry.max_rel_error = std::max(entry.max_rel_error, static_cast<double>(diff / denom));
    }
    report.worst = std::max(report.worst, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.worst <= static_cast<double>(tol);
  for (auto* p : params) p->grad = Tensor<Scalar>{};
  return report;
}

}  // namespace ksa
