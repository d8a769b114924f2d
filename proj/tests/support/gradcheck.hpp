#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ndgan/tensor.hpp"

namespace ndgan::checks {

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// |a - n| / max(floor, |a|, |n|)
inline double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({floor, std::abs(a), std::abs(n)});
}

/// Compares tape gradients of a scalar function with a five-point central
/// difference on every input element.
/// With several steps each element keeps its best-agreeing step: a wrong
/// gradient disagrees at every step, while roundoff (small h) and ReLU kinks
/// inside the stencil (large h) only spoil some of them.
inline GradCheck check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, std::span<const double> steps,
                                 double floor = 1e-7) {
  Tape tape;
  std::vector<Tensor> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.variable(t));
  const Tensor out = f(leaves);
  const Gradients grads = tape.backward(out);

  GradCheck worst;
  std::vector<Tensor> probe = inputs;
  const auto eval_at = [&](std::size_t i, std::size_t j, double delta) {
    std::vector<double> v = inputs[i].storage();
    v[j] += delta;
    probe[i] = Tensor(inputs[i].shape(), std::move(v));
    const double r = f(probe).item();
    probe[i] = inputs[i];
    return r;
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& g = grads.of(leaves[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      double err = INFINITY, numeric = 0.0;
      for (double h : steps) {
        const double n =
            (-eval_at(i, j, 2 * h) + 8 * eval_at(i, j, h) - 8 * eval_at(i, j, -h) + eval_at(i, j, -2 * h)) / (12 * h);
        const double e = relative_error(g[j], n, floor);
        if (e < err || std::isnan(e)) {
          err = e;
          numeric = n;
          if (std::isnan(e)) break;
        }
      }
      if (err > worst.max_rel_error || std::isnan(err)) worst = {std::isnan(err) ? INFINITY : err, i, j, g[j], numeric};
    }
  }
  return worst;
}

inline GradCheck check_gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-5,
                                 double floor = 1e-7) {
  const double steps[] = {h};
  return check_gradients(f, inputs, steps, floor);
}

}  // namespace ndgan::checks
