#pragma once

#include <array>
#include <memory>
#include <span>
#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rsgan/autodiff.hpp"
#include "rsgan/tensor.hpp"

namespace rsgan {

/// Raised for invalid model or training configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  int resolution = 32;
  int d_face = 16;
  int d_hair = 16;
  int d_attr_face = 4;
  int d_attr_hair = 4;
  int n_attr = 12;
  /// Output channels of each stride-2 stage, from full resolution down to 4x4.
  std::vector<int> widths = {16, 32, 64};
  int attr_hidden = 64;
  int inject_channels = 8;
  int patch_stages = 3;
  std::uint64_t init_seed = 1;

  int stages() const {
    int s = 0;
    for (int r = resolution; r > 4; r /= 2) ++s;
    return s;
  }
  int d_total() const { return d_face + d_attr_face + d_hair + d_attr_hair; }

  void validate() const {
    if (resolution < 8 || resolution % 8 != 0 || (resolution & (resolution - 1)) != 0)
      throw ConfigError("resolution must be a power of two and a multiple of 8, got " +
                        std::to_string(resolution));
    for (int v : {d_face, d_hair, d_attr_face, d_attr_hair, n_attr, attr_hidden, inject_channels,
                  patch_stages})
      if (v <= 0) throw ConfigError("model dimensions must be positive");
    if (static_cast<int>(widths.size()) != stages())
      throw ConfigError("widths must list one channel count per stage (" +
                        std::to_string(stages()) + " for resolution " +
                        std::to_string(resolution) + ")");
    for (int w : widths)
      if (w <= 0) throw ConfigError("channel widths must be positive");
    if (patch_stages > stages()) throw ConfigError("patch_stages exceeds available stages");
  }

  /// Desk-scale default used by CI and the synthetic experiments.
  static ModelConfig miniature() { return {}; }

  /// Full 128x128 geometry.
  static ModelConfig paper_scale() {
    ModelConfig c;
    c.resolution = 128;
    c.d_face = c.d_hair = 128;
    c.d_attr_face = c.d_attr_hair = 32;
    c.n_attr = 40;
    c.widths = {32, 64, 128, 256, 256};
    c.attr_hidden = 128;
    c.inject_channels = 32;
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"resolution", c.resolution},   {"d_face", c.d_face},
                     {"d_hair", c.d_hair},           {"d_attr_face", c.d_attr_face},
                     {"d_attr_hair", c.d_attr_hair}, {"n_attr", c.n_attr},
                     {"widths", c.widths},           {"attr_hidden", c.attr_hidden},
                     {"inject_channels", c.inject_channels}, {"patch_stages", c.patch_stages},
                     {"init_seed", c.init_seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("resolution").get_to(c.resolution);
  j.at("d_face").get_to(c.d_face);
  j.at("d_hair").get_to(c.d_hair);
  j.at("d_attr_face").get_to(c.d_attr_face);
  j.at("d_attr_hair").get_to(c.d_attr_hair);
  j.at("n_attr").get_to(c.n_attr);
  j.at("widths").get_to(c.widths);
  j.at("attr_hidden").get_to(c.attr_hidden);
  j.at("inject_channels").get_to(c.inject_channels);
  j.at("patch_stages").get_to(c.patch_stages);
  c.init_seed = j.value("init_seed", std::uint64_t{1});
}

/// Mean and log-variance of a diagonal Gaussian (sigma^2 = exp(log_var)).
template <typename T>
struct GaussianParams {
  Tensor<T> mu;
  Tensor<T> log_var;
};

/// Value-level reparameterization: mu + exp(log_var / 2) * noise.
template <typename T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> log_var,
                              std::span<const T> noise) {
  if (mu.size() != log_var.size() || noise.size() != mu.size())
    throw ShapeError("reparameterize: noise length must equal the latent dimension");
  std::vector<T> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(log_var[i] / 2) * noise[i];
  return z;
}

namespace ad {

template <typename T>
struct GaussianVar {
  Var<T> mu;
  Var<T> log_var;

  GaussianParams<T> value() const { return {mu.value(), log_var.value()}; }
};

template <typename T>
Var<T> reparameterize(const GaussianVar<T>& p, const Tensor<T>& noise) {
  require_shape(noise.shape, p.mu.shape(), "reparameterize noise");
  Tensor<T> z(p.mu.shape());
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data[i] = p.mu.value().data[i] + std::exp(p.log_var.value().data[i] / 2) * noise.data[i];
  return make_op<T>(std::move(z), {p.mu, p.log_var}, [noise](Node<T>& self) {
    auto& pm = *self.parents[0];
    auto& pl = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pm.needs_grad) pm.grad[i] += self.grad[i];
      if (pl.needs_grad)
        pl.grad[i] += self.grad[i] * noise.data[i] * T(0.5) * std::exp(pl.value.data[i] / 2);
    }
  });
}

}  // namespace ad

namespace nn {

using ad::Var;

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kLogVarBound = 8.0;

/// Named parameter list of one network block.
template <typename T>
using ParamList = std::vector<Var<T>>;

template <typename T>
Tensor<T> gaussian_init(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

inline double lrelu_gain() { return std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope)); }

template <typename T>
struct Linear {
  Var<T> w, b;
  Linear() = default;
  Linear(const std::string& name, int in, int out, double gain, std::mt19937_64& rng)
      : w(ad::parameter(gaussian_init<T>({out, in}, gain / std::sqrt(in), rng), name + ".weight")),
        b(ad::parameter(Tensor<T>({out}), name + ".bias")) {}
  Var<T> operator()(const Var<T>& x) const { return ad::linear(x, w, b); }
  void collect(ParamList<T>& out) const { out.insert(out.end(), {w, b}); }
};

template <typename T>
struct Conv {
  Var<T> w, b;
  int stride = 2, pad = 1;
  bool transposed = false;
  Conv() = default;
  Conv(const std::string& name, int in, int out, int kernel, int stride_, int pad_, bool transposed_,
       double gain, std::mt19937_64& rng)
      : stride(stride_), pad(pad_), transposed(transposed_) {
    const double fan_in = transposed ? in * kernel * kernel / double(stride * stride)
                                     : in * kernel * kernel;
    Shape ws = transposed ? Shape{in, out, kernel, kernel} : Shape{out, in, kernel, kernel};
    w = ad::parameter(gaussian_init<T>(ws, gain / std::sqrt(fan_in), rng), name + ".weight");
    b = ad::parameter(Tensor<T>({out}), name + ".bias");
  }
  Var<T> operator()(const Var<T>& x) const {
    return transposed ? ad::conv_transpose2d(x, w, b, stride, pad) : ad::conv2d(x, w, b, stride, pad);
  }
  void collect(ParamList<T>& out) const { out.insert(out.end(), {w, b}); }
};

template <typename T>
Var<T> lrelu(const Var<T>& x) {
  return ad::leaky_relu(x, static_cast<T>(kLeakySlope));
}

template <typename T>
void check_image(const Var<T>& x, const ModelConfig& cfg, const char* what) {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != cfg.resolution || s[3] != cfg.resolution)
    throw ConfigError(std::string(what) + ": expected N x 3 x " + std::to_string(cfg.resolution) +
                     " x " + std::to_string(cfg.resolution) + " image, got " + shape_str(s));
}

template <typename T>
void check_vector(const Var<T>& v, int n, int dim, const char* what) {
  if (v.value().rank() != 2 || v.shape()[1] != dim || (n >= 0 && v.shape()[0] != n))
    throw ConfigError(std::string(what) + ": expected N x " + std::to_string(dim) + ", got " +
                     shape_str(v.shape()));
}

/// Strided conv stack from S x S down to 4 x 4.
template <typename T>
struct DownStack {
  std::vector<Conv<T>> convs;
  DownStack() = default;
  DownStack(const std::string& name, int in, const std::vector<int>& widths, int count,
            std::mt19937_64& rng) {
    for (int i = 0; i < count; ++i) {
      convs.emplace_back(name + ".conv" + std::to_string(i), i == 0 ? in : widths[i - 1], widths[i],
                         4, 2, 1, false, lrelu_gain(), rng);
    }
  }
  Var<T> operator()(Var<T> h) const {
    for (const auto& c : convs) h = lrelu(c(h));
    return h;
  }
  void collect(ParamList<T>& out) const {
    for (const auto& c : convs) c.collect(out);
  }
};

template <typename T>
ad::GaussianVar<T> split_gaussian(const Var<T>& head, int d) {
  return {ad::slice_cols(head, 0, d),
          ad::soft_clamp(ad::slice_cols(head, d, d), static_cast<T>(kLogVarBound))};
}

/// Image encoder conditioned on attributes broadcast as extra channels.
template <typename T>
struct ImageEncoder {
  DownStack<T> body;
  Linear<T> head;
  int latent = 0;
  const ModelConfig* cfg = nullptr;

  ImageEncoder() = default;
  ImageEncoder(const std::string& name, const ModelConfig& c, int d, std::mt19937_64& rng)
      : body(name, 3 + c.n_attr, c.widths, c.stages(), rng),
        head(name + ".head", c.widths.back() * 16, 2 * d, 1.0, rng),
        latent(d),
        cfg(&c) {}

  ad::GaussianVar<T> operator()(const Var<T>& x, const Var<T>& c) const {
    check_image(x, *cfg, "image encoder");
    check_vector(c, x.shape()[0], cfg->n_attr, "image encoder attributes");
    const int s = cfg->resolution;
    auto h = body(ad::concat<T>({x, ad::broadcast_spatial(c, s, s)}));
    h = ad::reshape(h, {x.shape()[0], cfg->widths.back() * 16});
    return split_gaussian(head(h), latent);
  }
  void collect(ParamList<T>& out) const {
    body.collect(out);
    head.collect(out);
  }
};

template <typename T>
struct AttrEncoder {
  Linear<T> hidden, head;
  int latent = 0;
  const ModelConfig* cfg = nullptr;

  AttrEncoder() = default;
  AttrEncoder(const std::string& name, const ModelConfig& c, int d, std::mt19937_64& rng)
      : hidden(name + ".fc0", c.n_attr, c.attr_hidden, lrelu_gain(), rng),
        head(name + ".head", c.attr_hidden, 2 * d, 1.0, rng),
        latent(d),
        cfg(&c) {}

  ad::GaussianVar<T> operator()(const Var<T>& c) const {
    check_vector(c, -1, cfg->n_attr, "attribute encoder");
    return split_gaussian(head(lrelu(hidden(c))), latent);
  }
  void collect(ParamList<T>& out) const {
    hidden.collect(out);
    head.collect(out);
  }
};

/// Fully connected projection to 4x4, then stride-2 transposed convolutions up
/// to S x S and a 3x3 output convolution with tanh. When `inject_in` > 0 an
/// extra vector is projected to a feature map and concatenated at the
/// mid-resolution stage.
template <typename T>
struct UpStack {
  Linear<T> fc;
  Linear<T> inject_fc;
  std::vector<Conv<T>> ups;
  Conv<T> out;
  int inject_stage = -1;
  int inject_res = 0;
  const ModelConfig* cfg = nullptr;

  UpStack() = default;
  UpStack(const std::string& name, const ModelConfig& c, int in, int inject_in, std::mt19937_64& rng)
      : fc(name + ".fc", in, c.widths.back() * 16, lrelu_gain(), rng), cfg(&c) {
    const int n = c.stages();
    if (inject_in > 0) {
      inject_stage = n / 2;
      inject_res = 4 << inject_stage;
      inject_fc = Linear<T>(name + ".inject", inject_in, c.inject_channels * inject_res * inject_res,
                            lrelu_gain(), rng);
    }
    const int last = std::max(4, c.widths.front() / 2);
    for (int i = 0; i < n; ++i) {
      const int src = n - 1 - i;  // widths index of the incoming feature map
      int cin = c.widths[static_cast<std::size_t>(src)];
      if (i == inject_stage) cin += c.inject_channels;
      const int cout = src > 0 ? c.widths[static_cast<std::size_t>(src - 1)] : last;
      ups.emplace_back(name + ".up" + std::to_string(i), cin, cout, 4, 2, 1, true, lrelu_gain(), rng);
    }
    out = Conv<T>(name + ".out", last, 3, 3, 1, 1, false, 1.0, rng);
  }

  Var<T> operator()(const Var<T>& z, const Var<T>* inject) const {
    const int batch = z.shape()[0];
    auto h = lrelu(ad::reshape(fc(z), {batch, cfg->widths.back(), 4, 4}));
    for (std::size_t i = 0; i < ups.size(); ++i) {
      if (static_cast<int>(i) == inject_stage) {
        auto m = lrelu(ad::reshape(inject_fc(*inject),
                                   {batch, cfg->inject_channels, inject_res, inject_res}));
        h = ad::concat<T>({h, m});
      }
      h = lrelu(ups[i](h));
    }
    return ad::tanh(out(h));
  }
  void collect(ParamList<T>& out_params) const {
    fc.collect(out_params);
    if (inject_stage >= 0) inject_fc.collect(out_params);
    for (const auto& u : ups) u.collect(out_params);
    out.collect(out_params);
  }
};

/// Region decoder: (z_x, z_c) -> S x S image in [-1,1].
template <typename T>
struct Decoder {
  UpStack<T> body;
  int d_x = 0, d_c = 0;
  Decoder() = default;
  Decoder(const std::string& name, const ModelConfig& c, int dx, int dc, std::mt19937_64& rng)
      : body(name, c, dx + dc, 0, rng), d_x(dx), d_c(dc) {}
  Var<T> operator()(const Var<T>& zx, const Var<T>& zc) const {
    check_vector(zx, -1, d_x, "decoder image latent");
    check_vector(zc, zx.shape()[0], d_c, "decoder attribute latent");
    return body(ad::concat<T>({zx, zc}), nullptr);
  }
  void collect(ParamList<T>& out) const { body.collect(out); }
};

/// Composer: all four latents -> full portrait. Face latents are re-injected
/// at the mid-resolution stage.
template <typename T>
struct Composer {
  UpStack<T> body;
  const ModelConfig* cfg = nullptr;
  Composer() = default;
  Composer(const std::string& name, const ModelConfig& c, std::mt19937_64& rng)
      : body(name, c, c.d_total(), c.d_face + c.d_attr_face, rng), cfg(&c) {}
  Var<T> operator()(const Var<T>& z_xf, const Var<T>& z_cf, const Var<T>& z_xh,
                    const Var<T>& z_ch) const {
    check_vector(z_xf, -1, cfg->d_face, "composer z_xf");
    const int n = z_xf.shape()[0];
    check_vector(z_cf, n, cfg->d_attr_face, "composer z_cf");
    check_vector(z_xh, n, cfg->d_hair, "composer z_xh");
    check_vector(z_ch, n, cfg->d_attr_hair, "composer z_ch");
    auto face = ad::concat<T>({z_xf, z_cf});
    return body(ad::concat<T>({z_xf, z_cf, z_xh, z_ch}), &face);
  }
  void collect(ParamList<T>& out) const { body.collect(out); }
};

/// Conv stack to 4x4, flatten, linear head of `outputs` units, sigmoid.
/// Used for the global discriminator (1 output) and the attribute classifier.
template <typename T>
struct ConvHead {
  DownStack<T> body;
  Linear<T> head;
  const ModelConfig* cfg = nullptr;
  ConvHead() = default;
  ConvHead(const std::string& name, const ModelConfig& c, int outputs, std::mt19937_64& rng)
      : body(name, 3, c.widths, c.stages(), rng),
        head(name + ".head", c.widths.back() * 16, outputs, 1.0, rng),
        cfg(&c) {}
  Var<T> operator()(const Var<T>& x) const {
    check_image(x, *cfg, "discriminator/classifier");
    auto h = ad::reshape(body(x), {x.shape()[0], cfg->widths.back() * 16});
    return ad::sigmoid(head(h));
  }
  void collect(ParamList<T>& out) const {
    body.collect(out);
    head.collect(out);
  }
};

/// Fully convolutional patch discriminator: k stride-2 stages then a 3x3
/// convolution to one channel, giving an (S/2^k)^2 grid of sigmoid scores.
template <typename T>
struct PatchDiscriminator {
  DownStack<T> body;
  Conv<T> head;
  const ModelConfig* cfg = nullptr;
  PatchDiscriminator() = default;
  PatchDiscriminator(const std::string& name, const ModelConfig& c, std::mt19937_64& rng)
      : body(name, 3, c.widths, c.patch_stages, rng),
        head(name + ".head", c.widths[static_cast<std::size_t>(c.patch_stages - 1)], 1, 3, 1, 1,
             false, 1.0, rng),
        cfg(&c) {}
  Var<T> operator()(const Var<T>& x) const {
    check_image(x, *cfg, "patch discriminator");
    return ad::sigmoid(head(body(x)));
  }
  void collect(ParamList<T>& out) const {
    body.collect(out);
    head.collect(out);
  }
};

}  // namespace nn

/// Parameter groups, in the order the training update lists them.
enum class Group {
  EncFace,
  EncHair,
  EncAttrFace,
  EncAttrHair,
  DecFace,
  DecHair,
  Composer,
  DiscGlobal,
  DiscPatch,
  Classifier,
};

inline constexpr std::array<Group, 10> kAllGroups = {
    Group::EncFace,  Group::EncHair,    Group::EncAttrFace, Group::EncAttrHair, Group::DecFace,
    Group::DecHair,  Group::Composer,   Group::DiscGlobal,  Group::DiscPatch,   Group::Classifier};

inline const char* group_name(Group g) {
  switch (g) {
    case Group::EncFace: return "enc_xf";
    case Group::EncHair: return "enc_xh";
    case Group::EncAttrFace: return "enc_cf";
    case Group::EncAttrHair: return "enc_ch";
    case Group::DecFace: return "dec_f";
    case Group::DecHair: return "dec_h";
    case Group::Composer: return "composer";
    case Group::DiscGlobal: return "disc_g";
    case Group::DiscPatch: return "disc_p";
    case Group::Classifier: return "classifier";
  }
  return "?";
}

/// All nine networks. Copying a Model shares parameters; use clone() for an
/// independent copy.
template <typename T>
class Model {
 public:
  using Var = ad::Var<T>;

  Model() : Model(ModelConfig::miniature()) {}

  explicit Model(const ModelConfig& cfg) : cfg_(std::make_unique<ModelConfig>(cfg)) {
    cfg_->validate();
    std::mt19937_64 rng(cfg_->init_seed);
    const auto& c = *cfg_;
    enc_face = nn::ImageEncoder<T>("enc_xf", c, c.d_face, rng);
    enc_hair = nn::ImageEncoder<T>("enc_xh", c, c.d_hair, rng);
    enc_attr_face = nn::AttrEncoder<T>("enc_cf", c, c.d_attr_face, rng);
    enc_attr_hair = nn::AttrEncoder<T>("enc_ch", c, c.d_attr_hair, rng);
    dec_face = nn::Decoder<T>("dec_f", c, c.d_face, c.d_attr_face, rng);
    dec_hair = nn::Decoder<T>("dec_h", c, c.d_hair, c.d_attr_hair, rng);
    composer = nn::Composer<T>("composer", c, rng);
    disc_global = nn::ConvHead<T>("disc_g", c, 1, rng);
    disc_patch = nn::PatchDiscriminator<T>("disc_p", c, rng);
    classifier = nn::ConvHead<T>("classifier", c, c.n_attr, rng);
  }

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return *cfg_; }

  /// Deep copy with independent parameter storage.
  Model clone() const {
    Model m(*cfg_);
    auto dst = m.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].mutable_value() = src[i].value();
    return m;
  }

  nn::ParamList<T> group(Group g) const {
    nn::ParamList<T> out;
    switch (g) {
      case Group::EncFace: enc_face.collect(out); break;
      case Group::EncHair: enc_hair.collect(out); break;
      case Group::EncAttrFace: enc_attr_face.collect(out); break;
      case Group::EncAttrHair: enc_attr_hair.collect(out); break;
      case Group::DecFace: dec_face.collect(out); break;
      case Group::DecHair: dec_hair.collect(out); break;
      case Group::Composer: composer.collect(out); break;
      case Group::DiscGlobal: disc_global.collect(out); break;
      case Group::DiscPatch: disc_patch.collect(out); break;
      case Group::Classifier: classifier.collect(out); break;
    }
    return out;
  }

  nn::ParamList<T> parameters() const {
    nn::ParamList<T> out;
    for (Group g : kAllGroups) {
      auto p = group(g);
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
  }

  // Block entry points over autodiff values.
  ad::GaussianVar<T> encode_face(const Var& x, const Var& c) const { return enc_face(x, c); }
  ad::GaussianVar<T> encode_hair(const Var& x, const Var& c) const { return enc_hair(x, c); }
  ad::GaussianVar<T> encode_attr_face(const Var& c) const { return enc_attr_face(c); }
  ad::GaussianVar<T> encode_attr_hair(const Var& c) const { return enc_attr_hair(c); }
  Var decode_face(const Var& z_xf, const Var& z_cf) const { return dec_face(z_xf, z_cf); }
  Var decode_hair(const Var& z_xh, const Var& z_ch) const { return dec_hair(z_xh, z_ch); }
  Var compose(const Var& z_xf, const Var& z_cf, const Var& z_xh, const Var& z_ch) const {
    return composer(z_xf, z_cf, z_xh, z_ch);
  }
  Var discriminate_global(const Var& x) const { return disc_global(x); }
  Var discriminate_patch(const Var& x) const { return disc_patch(x); }
  Var classify(const Var& x) const { return classifier(x); }

  nn::ImageEncoder<T> enc_face, enc_hair;
  nn::AttrEncoder<T> enc_attr_face, enc_attr_hair;
  nn::Decoder<T> dec_face, dec_hair;
  nn::Composer<T> composer;
  nn::ConvHead<T> disc_global;
  nn::PatchDiscriminator<T> disc_patch;
  nn::ConvHead<T> classifier;

 private:
  // Heap-allocated so the blocks' config pointers survive moves.
  std::unique_ptr<ModelConfig> cfg_;
};

}  // namespace rsgan
