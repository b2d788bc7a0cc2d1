#pragma once

// Adam with per-group step counters. Moments are stored per parameter tensor.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rsgan/autodiff.hpp"

namespace rsgan {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 disables gradient-norm clipping

  bool operator==(const AdamConfig&) const = default;
};

/// First/second moments for one parameter group plus its step counter.
struct AdamGroupState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t step = 0;

  bool operator==(const AdamGroupState&) const = default;
};

inline AdamGroupState make_adam_state(std::span<const ad::Var<float>> params) {
  AdamGroupState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.f);
    s.v.emplace_back(p.size(), 0.f);
  }
  return s;
}

/// One Adam step on a parameter group. grads[i] matches params[i].
inline void adam_update(std::span<const ad::Var<float>> params, const std::vector<std::vector<float>>& grads,
                        AdamGroupState& st, const AdamConfig& cfg) {
  if (grads.size() != params.size() || st.m.size() != params.size())
    throw std::invalid_argument("adam_update: parameter/gradient/state count mismatch");
  double scale = 1.0;
  if (cfg.clip_norm > 0) {
    double sq = 0;
    for (const auto& g : grads)
      for (float v : g) sq += double(v) * v;
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const float step_size = static_cast<float>(cfg.learning_rate / bc1);
  const float inv_bc2 = static_cast<float>(1.0 / bc2);
  const float eps = static_cast<float>(cfg.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = const_cast<ad::Var<float>&>(params[k]).mutable_value().data;
    const auto& g = grads[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    if (g.size() != w.size()) throw std::invalid_argument("adam_update: gradient size mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const float gi = static_cast<float>(g[i] * scale);
      m[i] = b1 * m[i] + (1 - b1) * gi;
      v[i] = b2 * v[i] + (1 - b2) * gi * gi;
      w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
    }
  }
}

}  // namespace rsgan
