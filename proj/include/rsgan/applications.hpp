#pragma once

// Inference on a trained model: encode, swap, gradient-domain swap,
// attribute editing, random parts, latent interpolation. Everything here runs
// without graph recording and uses the posterior means, so calls are
// deterministic and safe to run concurrently over one shared model.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rsgan/checkpoint.hpp"
#include "rsgan/networks.hpp"
#include "rsgan/poisson.hpp"
#include "rsgan/sample.hpp"

namespace rsgan {

/// Bad request parameters (unknown attribute, t outside [0,1], bad region).
class RequestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input image is not at model resolution.
class ResolutionError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

enum class Region { Face, Hair, Both };

inline Region parse_region(std::string_view s) {
  if (s == "face") return Region::Face;
  if (s == "hair") return Region::Hair;
  if (s == "both") return Region::Both;
  throw RequestError("region must be face, hair or both, got '" + std::string(s) + "'");
}

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Face: return "face";
    case Region::Hair: return "hair";
    case Region::Both: return "both";
  }
  return "?";
}

inline bool touches_face(Region r) { return r != Region::Hair; }
inline bool touches_hair(Region r) { return r != Region::Face; }

struct LatentBundle {
  std::vector<float> z_xf, z_cf, z_xh, z_ch;

  bool operator==(const LatentBundle&) const = default;

  nlohmann::json to_json() const {
    return {{"z_xf", z_xf}, {"z_cf", z_cf}, {"z_xh", z_xh}, {"z_ch", z_ch}};
  }
  static LatentBundle from_json(const nlohmann::json& j) {
    LatentBundle b;
    j.at("z_xf").get_to(b.z_xf);
    j.at("z_cf").get_to(b.z_cf);
    j.at("z_xh").get_to(b.z_xh);
    j.at("z_ch").get_to(b.z_ch);
    return b;
  }
};

struct Encoding {
  LatentBundle bundle;
  AttributeVector c_star;
};

/// Trained model plus its attribute vocabulary. Read-only after construction.
class InferenceModel {
 public:
  InferenceModel(Model<float> model, std::vector<std::string> names)
      : model_(std::move(model)), names_(std::move(names)) {
    if (static_cast<int>(names_.size()) != model_.config().n_attr)
      throw ConfigError("attribute vocabulary size does not match the model");
  }
  explicit InferenceModel(TrainingState&& st)
      : InferenceModel(std::move(st.model), std::move(st.attribute_names)) {}

  static InferenceModel load(const std::filesystem::path& ckpt) { return InferenceModel(load_checkpoint(ckpt)); }

  const Model<float>& model() const { return model_; }
  const ModelConfig& config() const { return model_.config(); }
  int resolution() const { return model_.config().resolution; }
  const std::vector<std::string>& attribute_names() const { return names_; }

  std::size_t attribute_index(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw RequestError("unknown attribute '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  void check_image(const Image& x) const {
    const int s = resolution();
    if (x.shape != Shape{3, s, s})
      throw ResolutionError("image shape " + shape_str(x.shape) + " does not match model resolution " +
                            std::to_string(s));
  }

 private:
  Model<float> model_;
  std::vector<std::string> names_;
};

namespace app_detail {

using V = ad::Var<float>;

inline V batch1(const Image& x) {
  Tensor<float> t({1, channels(x), height(x), width(x)});
  t.data = x.data;
  return ad::constant(std::move(t));
}

inline V row(const std::vector<float>& v) { return ad::constant(Tensor<float>({1, static_cast<int>(v.size())}, v)); }

inline std::vector<float> flat(const V& v) { return {v.value().data.begin(), v.value().data.end()}; }

inline void check_dims(const InferenceModel& m, const LatentBundle& b) {
  const auto& c = m.config();
  if (static_cast<int>(b.z_xf.size()) != c.d_face || static_cast<int>(b.z_cf.size()) != c.d_attr_face ||
      static_cast<int>(b.z_xh.size()) != c.d_hair || static_cast<int>(b.z_ch.size()) != c.d_attr_hair)
    throw ShapeError("latent bundle dimensions do not match the model");
}

inline std::vector<float> lerp(const std::vector<float>& a, const std::vector<float>& b, float t) {
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1 - t) * a[i] + t * b[i];  // exact at both ends
  return out;
}

}  // namespace app_detail

/// Latents of x under attributes c (posterior means).
inline LatentBundle encode_with(const InferenceModel& m, const Image& x, const AttributeVector& c) {
  using namespace app_detail;
  m.check_image(x);
  validate_attributes(c, static_cast<std::size_t>(m.config().n_attr));
  ad::NoGradGuard ng;
  const V xv = batch1(x), cv = row(c);
  const auto& net = m.model();
  return {flat(net.encode_face(xv, cv).mu), flat(net.encode_attr_face(cv).mu), flat(net.encode_hair(xv, cv).mu),
          flat(net.encode_attr_hair(cv).mu)};
}

/// c* = C(x), then the bundle of (x, c*).
inline Encoding encode_full(const InferenceModel& m, const Image& x) {
  using namespace app_detail;
  m.check_image(x);
  AttributeVector c;
  {
    ad::NoGradGuard ng;
    c = flat(m.model().classify(batch1(x)));
  }
  return {encode_with(m, x, c), c};
}

inline Image compose(const InferenceModel& m, const LatentBundle& b) {
  using namespace app_detail;
  check_dims(m, b);
  ad::NoGradGuard ng;
  const V out = m.model().compose(row(b.z_xf), row(b.z_cf), row(b.z_xh), row(b.z_ch));
  const int s = m.resolution();
  Image im = make_image(3, s, s);
  im.data = out.value().data;
  return im;
}

inline Image reconstruct(const InferenceModel& m, const Image& x) { return compose(m, encode_full(m, x).bundle); }

/// Face latents of `face`, hair latents of `hair`.
inline LatentBundle swap_bundles(const LatentBundle& face, const LatentBundle& hair) {
  return {face.z_xf, face.z_cf, hair.z_xh, hair.z_ch};
}

inline Image swap(const InferenceModel& m, const Image& source, const Image& target) {
  return compose(m, swap_bundles(encode_full(m, source).bundle, encode_full(m, target).bundle));
}

struct SwapGdResult {
  Image image;
  Image plain;  // the swap before compositing
  std::optional<std::string> warning;
  int iterations = 0;
  bool converged = true;
};

/// Swap, then paste the swapped face into the target in the gradient domain.
/// `face_mask` marks the face region in output coordinates.
inline SwapGdResult swap_gd(const InferenceModel& m, const Image& source, const Image& target,
                            const BinaryMask& face_mask, const PoissonOptions& opt = {}) {
  m.check_image(target);
  SwapGdResult r;
  r.plain = swap(m, source, target);
  if (face_mask.width != m.resolution() || face_mask.height != m.resolution())
    throw ResolutionError("face mask size does not match model resolution");
  if (face_mask.area() == 0) {
    r.image = r.plain;
    r.warning = "empty face mask; returning the plain swap";
    return r;
  }
  // Outside the mask the result is the plain swap; inside it is the solve.
  const auto blended = poisson_blend(r.plain, target, face_mask, opt);
  r.image = r.plain;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < face_mask.height; ++y)
      for (int x = 0; x < face_mask.width; ++x)
        if (face_mask.at(x, y)) px(r.image, c, y, x) = px(blended.image, c, y, x);
  r.iterations = blended.iterations;
  r.converged = blended.converged;
  return r;
}

/// Face pixels of a stored sample: not background and blanked in the hair view.
inline BinaryMask stored_face_mask(const RegionSample& s) {
  BinaryMask m(s.m_bg.width, s.m_bg.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool blank = true;
      for (int c = 0; c < 3; ++c) blank = blank && px(s.x_h, c, y, x) == -1.f && px(s.x, c, y, x) != -1.f;
      m.set(x, y, !s.m_bg.at(x, y) && blank);
    }
  return m;
}

using AttributeDeltas = std::map<std::string, float>;

struct EditResult {
  Image image;
  LatentBundle bundle;
  AttributeVector c_edit;
};

/// Sets the named attributes of c* to the given values and re-encodes the
/// attribute latents of the chosen region only.
inline EditResult edit_attributes(const InferenceModel& m, const Image& x, const AttributeDeltas& deltas,
                                  Region region) {
  using namespace app_detail;
  std::vector<std::pair<std::size_t, float>> sets;
  for (const auto& [name, v] : deltas) {
    if (!(v >= 0.f && v <= 1.f)) throw RequestError("attribute '" + name + "' value must lie in [0,1]");
    sets.emplace_back(m.attribute_index(name), v);
  }
  const Encoding e = encode_full(m, x);
  EditResult r{{}, e.bundle, e.c_star};
  for (const auto& [i, v] : sets) r.c_edit[i] = v;
  if (!deltas.empty()) {
    ad::NoGradGuard ng;
    const V cv = row(r.c_edit);
    if (touches_face(region)) r.bundle.z_cf = flat(m.model().encode_attr_face(cv).mu);
    if (touches_hair(region)) r.bundle.z_ch = flat(m.model().encode_attr_hair(cv).mu);
  }
  r.image = compose(m, r.bundle);
  return r;
}

/// Replaces the chosen region's latents with N(0, 1) draws from `seed`.
inline LatentBundle sample_bundle(const LatentBundle& base, Region region, std::uint64_t seed) {
  LatentBundle b = base;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n01;
  auto draw = [&](std::vector<float>& z) {
    for (auto& v : z) v = n01(rng);
  };
  if (touches_face(region)) {
    draw(b.z_xf);
    draw(b.z_cf);
  }
  if (touches_hair(region)) {
    draw(b.z_xh);
    draw(b.z_ch);
  }
  return b;
}

inline Image sample_parts(const InferenceModel& m, const Image& x, Region region, std::uint64_t seed) {
  if (region == Region::Both) throw RequestError("sample region must be face or hair");
  return compose(m, sample_bundle(encode_full(m, x).bundle, region, seed));
}

inline LatentBundle interpolate_bundles(const LatentBundle& a, const LatentBundle& b, double t, Region region) {
  using app_detail::lerp;
  if (!(t >= 0.0 && t <= 1.0)) throw RequestError("t must lie in [0,1]");
  const auto tf = static_cast<float>(t);
  LatentBundle out = a;
  if (touches_face(region)) {
    out.z_xf = lerp(a.z_xf, b.z_xf, tf);
    out.z_cf = lerp(a.z_cf, b.z_cf, tf);
  }
  if (touches_hair(region)) {
    out.z_xh = lerp(a.z_xh, b.z_xh, tf);
    out.z_ch = lerp(a.z_ch, b.z_ch, tf);
  }
  return out;
}

inline Image interpolate(const InferenceModel& m, const Image& x1, const Image& x2, double t, Region region) {
  if (!(t >= 0.0 && t <= 1.0)) throw RequestError("t must lie in [0,1]");
  return compose(m, interpolate_bundles(encode_full(m, x1).bundle, encode_full(m, x2).bundle, t, region));
}

}  // namespace rsgan
