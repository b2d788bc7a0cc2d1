#pragma once

// Central finite-difference checks for the autodiff graph (double precision).
//
// Error metric: max_i |analytic_i - numeric_i| / max(max_i |analytic_i|,
// max_i |numeric_i|, floor). Normalising by the gradient's scale rather than
// per element keeps tiny components from drowning in rounding noise.

#include <rsgan/autodiff.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gradcheck {

using VarD = rsgan::ad::Var<double>;

struct Result {
  double coordinate_error = 0;   // over sampled coordinates
  double directional_error = 0;  // along one random direction over all inputs
};

/// `f` must rebuild the graph from the current values of `inputs` and
/// return a one-element Var. All inputs must be parameter (tracked) Vars.
inline Result check(const std::function<VarD()>& f, const std::vector<VarD>& inputs, std::mt19937_64& rng,
                    int coords_per_input = 6, double h = 1e-6) {
  VarD out = f();
  rsgan::ad::backward(out, inputs);
  std::vector<std::vector<double>> grads;
  for (const auto& v : inputs) grads.emplace_back(v.grad().begin(), v.grad().end());

  auto eval = [&] {
    rsgan::ad::NoGradGuard guard;
    return f().item();
  };

  Result r;
  // coordinates
  double max_diff = 0, scale = 1e-8;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& data = const_cast<VarD&>(inputs[k]).mutable_value().data;
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (int c = 0; c < coords_per_input; ++c) {
      const std::size_t i = pick(rng);
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = eval();
      data[i] = orig - h;
      const double fm = eval();
      data[i] = orig;
      const double num = (fp - fm) / (2 * h);
      max_diff = std::max(max_diff, std::abs(num - grads[k][i]));
      scale = std::max({scale, std::abs(num), std::abs(grads[k][i])});
    }
  }
  r.coordinate_error = max_diff / scale;

  // random direction
  std::normal_distribution<double> nd;
  std::vector<std::vector<double>> dir(inputs.size());
  double analytic = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    dir[k].resize(inputs[k].size());
    for (std::size_t i = 0; i < dir[k].size(); ++i) {
      dir[k][i] = nd(rng);
      analytic += dir[k][i] * grads[k][i];
    }
  }
  std::vector<std::vector<double>> saved;
  for (const auto& v : inputs) saved.emplace_back(v.value().data.begin(), v.value().data.end());
  auto shift = [&](double t) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto& data = const_cast<VarD&>(inputs[k]).mutable_value().data;
      for (std::size_t i = 0; i < data.size(); ++i) data[i] = saved[k][i] + t * dir[k][i];
    }
  };
  shift(h);
  const double fp = eval();
  shift(-h);
  const double fm = eval();
  shift(0);
  const double num = (fp - fm) / (2 * h);
  r.directional_error = std::abs(num - analytic) / std::max({std::abs(num), std::abs(analytic), 1e-8});
  return r;
}

}  // namespace gradcheck
