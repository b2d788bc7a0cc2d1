#pragma once

// Training objectives. Each loss exists twice: a value-level function over
// plain tensors (used by evaluation code and as the forward pass) and an
// autodiff op with an analytic backward.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "rsgan/autodiff.hpp"
#include "rsgan/tensor.hpp"

namespace rsgan {

/// Probability clamp used wherever a log is taken.
inline constexpr double kProbEps = 1e-7;

struct LossWeights {
  double rec = 4000.0;
  double kl = 1.0;
  double adv_g = 20.0;
  double adv_p = 30.0;
  double cls = 1.0;
  double gen_cls = 50.0;
  double beta = 0.5;

  void validate() const {
    for (double v : {rec, kl, adv_g, adv_p, cls, gen_cls, beta})
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
    if (beta > 1.0) throw std::invalid_argument("beta must lie in [0,1]");
  }

  bool operator==(const LossWeights&) const = default;
};

/// Every scalar objective of one training step, plus the weighted total.
struct LossReport {
  double rec_f = 0, rec_h = 0, rec = 0;
  double kl_xf = 0, kl_xh = 0, kl_cf = 0, kl_ch = 0;
  double adv_g = 0, adv_p = 0;
  double cls = 0, gen_cls = 0;
  double total = 0;

  /// (name, value) for every field, in declaration order.
  std::vector<std::pair<std::string, double>> fields() const {
    return {{"rec_f", rec_f}, {"rec_h", rec_h}, {"rec", rec},     {"kl_xf", kl_xf},
            {"kl_xh", kl_xh}, {"kl_cf", kl_cf}, {"kl_ch", kl_ch}, {"adv_g", adv_g},
            {"adv_p", adv_p}, {"cls", cls},     {"gen_cls", gen_cls}, {"total", total}};
  }

  /// Name of the first non-finite component, if any.
  std::optional<std::string> first_non_finite() const {
    for (const auto& [name, v] : fields())
      if (!std::isfinite(v)) return name;
    return std::nullopt;
  }

  bool operator==(const LossReport&) const = default;
};

/// Weighted sum in the same grouping as the objective is usually written:
/// rec * (rec_f + rec_h + rec) + kl * (sum of four KL) + adv_g + adv_p + cls + gen_cls.
inline double total_loss(const LossReport& r, const LossWeights& w) {
  return w.rec * (r.rec_f + r.rec_h + r.rec) + w.kl * (r.kl_xf + r.kl_xh + r.kl_cf + r.kl_ch) +
         w.adv_g * r.adv_g + w.adv_p * r.adv_p + w.cls * r.cls + w.gen_cls * r.gen_cls;
}

namespace loss {

template <typename T>
T clamp_prob(T p) {
  const T eps = static_cast<T>(kProbEps);
  return std::min(std::max(p, eps), T(1) - eps);
}

/// Per-element weight 1 - beta * m_bg, where m_bg is N x 1 x H x W (broadcast
/// over channels) or the same shape as the images.
template <typename T>
T mask_weight(const Tensor<T>* m_bg, double beta, const Shape& img, std::size_t i) {
  if (!m_bg) return T(1);
  if (m_bg->size() == shape_numel(img)) return T(1) - static_cast<T>(beta) * m_bg->data[i];
  const std::size_t plane = static_cast<std::size_t>(img[2]) * img[3];
  const std::size_t per_sample = static_cast<std::size_t>(img[1]) * plane;
  const std::size_t n = i / per_sample;
  const std::size_t p = i % plane;
  return T(1) - static_cast<T>(beta) * m_bg->data[n * plane + p];
}

template <typename T>
void check_mask(const Tensor<T>* m_bg, const Shape& img) {
  if (!m_bg) return;
  if (img.size() != 4) throw ShapeError("recon_loss: masked images must be N x C x H x W");
  if (m_bg->size() == shape_numel(img)) return;
  require_shape(m_bg->shape, Shape{img[0], 1, img[2], img[3]}, "recon_loss mask");
}

/// Mean over pixels and channels of (1 - beta m_bg) |x_ref - x_out|.
/// Without a mask this is the plain mean absolute error.
template <typename T>
T recon(const Tensor<T>& x_ref, const Tensor<T>& x_out, const Tensor<T>* m_bg, double beta) {
  require_shape(x_out.shape, x_ref.shape, "recon_loss");
  check_mask(m_bg, x_ref.shape);
  T acc = 0;
  for (std::size_t i = 0; i < x_ref.size(); ++i)
    acc += mask_weight(m_bg, beta, x_ref.shape, i) * std::abs(x_ref.data[i] - x_out.data[i]);
  return acc / static_cast<T>(x_ref.size());
}

/// KL term per sample, averaged over the batch. `mu`, `log_var` are N x d.
/// The default form is 1/2 (mu^T mu + sum(s - log s - 1)) with s the standard
/// deviation exp(log_var / 2); `standard` selects 1/2 sum(mu^2 + s^2 - log s^2 - 1).
template <typename T>
T kl(const Tensor<T>& mu, const Tensor<T>& log_var, bool standard = false) {
  require_shape(log_var.shape, mu.shape, "kl_loss");
  const int n = mu.rank() == 2 ? mu.shape[0] : 1;
  T acc = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const T lv = log_var.data[i];
    const T m = mu.data[i];
    if (standard)
      acc += T(0.5) * (m * m + std::exp(lv) - lv - T(1));
    else
      acc += T(0.5) * (m * m + std::exp(lv / 2) - lv / 2 - T(1));
  }
  return acc / static_cast<T>(n);
}

/// -sum_i (c_i log p_i + (1 - c_i) log(1 - p_i)), summed over attributes and
/// averaged over the batch. Inputs are N x A (or a single length-A vector).
template <typename T>
T bce(const Tensor<T>& target, const Tensor<T>& pred) {
  if (target.size() != pred.size())
    throw ShapeError("bce_attr_loss: length mismatch " + shape_str(target.shape) + " vs " +
                     shape_str(pred.shape));
  const int n = pred.rank() == 2 ? pred.shape[0] : 1;
  T acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T p = clamp_prob(pred.data[i]);
    const T c = target.data[i];
    acc -= c * std::log(p) + (T(1) - c) * std::log(T(1) - p);
  }
  return acc / static_cast<T>(n);
}

/// Mean of log(clamp(p)) (or log(1 - clamp(p)) when `complement`).
template <typename T>
T mean_log(const Tensor<T>& p, bool complement) {
  T acc = 0;
  for (T v : p.data) {
    const T q = clamp_prob(v);
    acc += complement ? std::log(T(1) - q) : std::log(q);
  }
  return acc / static_cast<T>(p.size());
}

template <typename T>
struct AdversarialPair {
  T discriminator;  // -E log D(x) - E log(1 - D(x')) - E log(1 - D(x^'))
  T generator;      // -E log D(x') - E log D(x^')
};

/// Discriminator outputs may be N x 1 (global) or N x 1 x h x w (patch); the
/// log is applied per element and averaged over grid and batch.
template <typename T>
AdversarialPair<T> adversarial(const Tensor<T>& d_real, const Tensor<T>& d_fake_rec,
                               const Tensor<T>& d_fake_rand) {
  return {-mean_log(d_real, false) - mean_log(d_fake_rec, true) - mean_log(d_fake_rand, true),
          -mean_log(d_fake_rec, false) - mean_log(d_fake_rand, false)};
}

template <typename T>
T gen_cls(const Tensor<T>& c, const Tensor<T>& c_prime, const Tensor<T>& c_hat_prime) {
  return bce(c, c_prime) + bce(c, c_hat_prime);
}

}  // namespace loss

// ---------------------------------------------------------------------------
// Differentiable versions

namespace ad {

template <typename T>
Var<T> recon_loss(const Var<T>& x_ref, const Var<T>& x_out, const Tensor<T>* m_bg, double beta) {
  const T value = loss::recon(x_ref.value(), x_out.value(), m_bg, beta);
  std::optional<Tensor<T>> mask;
  if (m_bg) mask = *m_bg;
  return make_op<T>(Tensor<T>({1}, {value}), {x_ref, x_out},
                    [mask = std::move(mask), beta](Node<T>& self) {
                      auto& pr = *self.parents[0];
                      auto& po = *self.parents[1];
                      const auto& shape = pr.value.shape;
                      const T scale = self.grad[0] / static_cast<T>(pr.value.size());
                      const Tensor<T>* m = mask ? &*mask : nullptr;
                      for (std::size_t i = 0; i < pr.value.size(); ++i) {
                        const T d = pr.value.data[i] - po.value.data[i];
                        const T sgn = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
                        const T g = scale * loss::mask_weight(m, beta, shape, i) * sgn;
                        if (pr.needs_grad) pr.grad[i] += g;
                        if (po.needs_grad) po.grad[i] -= g;
                      }
                    });
}

template <typename T>
Var<T> kl_loss(const Var<T>& mu, const Var<T>& log_var, bool standard = false) {
  const T value = loss::kl(mu.value(), log_var.value(), standard);
  const int n = mu.value().rank() == 2 ? mu.shape()[0] : 1;
  return make_op<T>(Tensor<T>({1}, {value}), {mu, log_var}, [n, standard](Node<T>& self) {
    auto& pm = *self.parents[0];
    auto& pl = *self.parents[1];
    const T scale = self.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < pm.value.size(); ++i) {
      if (pm.needs_grad) pm.grad[i] += scale * pm.value.data[i];
      if (pl.needs_grad) {
        const T lv = pl.value.data[i];
        pl.grad[i] += standard ? scale * T(0.5) * (std::exp(lv) - T(1))
                               : scale * T(0.25) * (std::exp(lv / 2) - T(1));
      }
    }
  });
}

template <typename T>
Var<T> bce_loss(const Var<T>& target, const Var<T>& pred) {
  const T value = loss::bce(target.value(), pred.value());
  const int n = pred.value().rank() == 2 ? pred.shape()[0] : 1;
  return make_op<T>(Tensor<T>({1}, {value}), {target, pred}, [n](Node<T>& self) {
    auto& pt = *self.parents[0];
    auto& pp = *self.parents[1];
    const T scale = self.grad[0] / static_cast<T>(n);
    const T eps = static_cast<T>(kProbEps);
    for (std::size_t i = 0; i < pp.value.size(); ++i) {
      const T raw = pp.value.data[i];
      const T p = loss::clamp_prob(raw);
      const T c = pt.value.data[i];
      if (pt.needs_grad) pt.grad[i] -= scale * (std::log(p) - std::log(T(1) - p));
      if (pp.needs_grad && raw > eps && raw < T(1) - eps)
        pp.grad[i] -= scale * (c / p - (T(1) - c) / (T(1) - p));
    }
  });
}

/// mean(log clamp(p)) or mean(log(1 - clamp(p))).
template <typename T>
Var<T> mean_log(const Var<T>& p, bool complement) {
  const T value = loss::mean_log(p.value(), complement);
  return make_op<T>(Tensor<T>({1}, {value}), {p}, [complement](Node<T>& self) {
    auto& pp = *self.parents[0];
    if (!pp.needs_grad) return;
    const T scale = self.grad[0] / static_cast<T>(pp.value.size());
    const T eps = static_cast<T>(kProbEps);
    for (std::size_t i = 0; i < pp.value.size(); ++i) {
      const T raw = pp.value.data[i];
      if (raw <= eps || raw >= T(1) - eps) continue;
      pp.grad[i] += complement ? -scale / (T(1) - raw) : scale / raw;
    }
  });
}

template <typename T>
struct AdversarialVars {
  Var<T> discriminator;
  Var<T> generator;
};

template <typename T>
AdversarialVars<T> adversarial_losses(const Var<T>& d_real, const Var<T>& d_fake_rec,
                                      const Var<T>& d_fake_rand) {
  return {weighted_sum<T>({{mean_log(d_real, false), T(-1)},
                           {mean_log(d_fake_rec, true), T(-1)},
                           {mean_log(d_fake_rand, true), T(-1)}}),
          weighted_sum<T>({{mean_log(d_fake_rec, false), T(-1)},
                           {mean_log(d_fake_rand, false), T(-1)}})};
}

template <typename T>
Var<T> gen_cls_loss(const Var<T>& c, const Var<T>& c_prime, const Var<T>& c_hat_prime) {
  return weighted_sum<T>({{bce_loss(c, c_prime), T(1)}, {bce_loss(c, c_hat_prime), T(1)}});
}

}  // namespace ad
}  // namespace rsgan
