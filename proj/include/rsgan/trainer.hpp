#pragma once

// One fused training step and the training loop around it.
//
// All losses come from a single forward pass. Gradients are then taken in four
// backward passes so each parameter group sees exactly the objective it is
// updated with:
//   encoders, decoders, composer:  rec * (rec_f + rec_h) + kl * sum KL + L_G
//   composer (added):              rec * L_rec
//   both discriminators:           adv_g * L_adv_g + adv_p * L_adv_p
//   classifier:                    cls * L_C
// with L_G = adv_g * G_adv_g + adv_p * G_adv_p + gen_cls * L_GC. Decoders only
// reach the part reconstruction terms, so the first pass gives them exactly
// rec * L_rec-{f,h}.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <toml.hpp>
#include <vector>

#include "rsgan/checkpoint.hpp"
#include "rsgan/losses.hpp"
#include "rsgan/networks.hpp"
#include "rsgan/optimizer.hpp"
#include "rsgan/sample.hpp"

namespace rsgan {

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::int64_t step, const std::string& component)
      : std::runtime_error("non-finite loss at step " + std::to_string(step) + ": first bad component is " +
                           component),
        component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

struct TrainConfig {
  LossWeights weights;
  AdamConfig adam;
  int batch_size = 8;
  std::int64_t max_steps = 2000;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 500;
  std::int64_t log_every = 1;
  bool kl_standard = false;
  ModelConfig model;
  std::string manifest;  // dataset manifest; empty means "given on the command line"
  std::string split = "train";
  std::string out_dir = "runs/default";

  void validate() const {
    try {
      weights.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    model.validate();
    if (!(adam.learning_rate > 0) || !std::isfinite(adam.learning_rate))
      throw ConfigError("learning_rate must be positive");
    if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
      throw ConfigError("adam betas must lie in [0,1)");
    if (!(adam.eps > 0)) throw ConfigError("adam_eps must be positive");
    if (!(adam.clip_norm >= 0)) throw ConfigError("clip_norm must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
    if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be positive");
    if (log_every <= 0) throw ConfigError("log_every must be positive");
    if (seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      throw ConfigError("seed must fit in a signed 64-bit integer");
  }

  bool operator==(const TrainConfig&) const = default;
};

// ---------------------------------------------------------------------------
// TOML

namespace train_detail {

template <typename V>
void read(const toml::table& t, const char* section, const char* key, V& out) {
  const auto* sec = t[section].as_table();
  if (!sec) return;
  const auto node = (*sec)[key];
  if (!node) return;
  if constexpr (std::is_same_v<V, bool>) {
    auto v = node.template value<bool>();
    if (!v) throw ConfigError(std::string(section) + "." + key + " must be a boolean");
    out = *v;
  } else if constexpr (std::is_same_v<V, std::string>) {
    auto v = node.template value<std::string>();
    if (!v) throw ConfigError(std::string(section) + "." + key + " must be a string");
    out = *v;
  } else if constexpr (std::is_floating_point_v<V>) {
    auto v = node.template value<double>();  // accepts integers too
    if (!v) throw ConfigError(std::string(section) + "." + key + " must be a number");
    out = *v;
  } else {
    if (!node.is_integer()) throw ConfigError(std::string(section) + "." + key + " must be an integer");
    out = static_cast<V>(*node.template value<std::int64_t>());
  }
}

inline void reject_unknown(const toml::table& t, const std::map<std::string, std::vector<std::string>>& known) {
  for (const auto& [k, v] : t) {
    const std::string sec(k.str());
    auto it = known.find(sec);
    if (it == known.end()) throw ConfigError("unknown config section [" + sec + "]");
    const auto* tbl = v.as_table();
    if (!tbl) throw ConfigError("[" + sec + "] must be a table");
    for (const auto& [kk, vv] : *tbl) {
      const std::string key(kk.str());
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
        throw ConfigError("unknown config key " + sec + "." + key);
    }
  }
}

}  // namespace train_detail

/// Parses a TOML training config. Missing keys keep their defaults; unknown
/// keys are rejected. `[model] preset = "paper"` starts from the 128x128 model.
inline TrainConfig parse_train_config(std::string_view text) {
  using train_detail::read;
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(os.str());
  }
  train_detail::reject_unknown(
      t, {{"train",
           {"learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "clip_norm", "batch_size", "max_steps", "seed",
            "checkpoint_every", "log_every", "kl_standard"}},
          {"weights", {"rec", "kl", "adv_g", "adv_p", "cls", "gen_cls", "beta"}},
          {"model",
           {"preset", "resolution", "d_face", "d_hair", "d_attr_face", "d_attr_hair", "n_attr", "widths",
            "attr_hidden", "inject_channels", "patch_stages", "init_seed"}},
          {"data", {"manifest", "split"}},
          {"output", {"dir"}}});

  TrainConfig c;
  read(t, "train", "learning_rate", c.adam.learning_rate);
  read(t, "train", "adam_beta1", c.adam.beta1);
  read(t, "train", "adam_beta2", c.adam.beta2);
  read(t, "train", "adam_eps", c.adam.eps);
  read(t, "train", "clip_norm", c.adam.clip_norm);
  read(t, "train", "batch_size", c.batch_size);
  read(t, "train", "max_steps", c.max_steps);
  std::int64_t seed = static_cast<std::int64_t>(c.seed);
  read(t, "train", "seed", seed);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  read(t, "train", "checkpoint_every", c.checkpoint_every);
  read(t, "train", "log_every", c.log_every);
  read(t, "train", "kl_standard", c.kl_standard);

  read(t, "weights", "rec", c.weights.rec);
  read(t, "weights", "kl", c.weights.kl);
  read(t, "weights", "adv_g", c.weights.adv_g);
  read(t, "weights", "adv_p", c.weights.adv_p);
  read(t, "weights", "cls", c.weights.cls);
  read(t, "weights", "gen_cls", c.weights.gen_cls);
  read(t, "weights", "beta", c.weights.beta);

  std::string preset = "miniature";
  read(t, "model", "preset", preset);
  if (preset == "paper")
    c.model = ModelConfig::paper_scale();
  else if (preset != "miniature")
    throw ConfigError("unknown model preset '" + preset + "' (expected miniature or paper)");
  read(t, "model", "resolution", c.model.resolution);
  read(t, "model", "d_face", c.model.d_face);
  read(t, "model", "d_hair", c.model.d_hair);
  read(t, "model", "d_attr_face", c.model.d_attr_face);
  read(t, "model", "d_attr_hair", c.model.d_attr_hair);
  read(t, "model", "n_attr", c.model.n_attr);
  read(t, "model", "attr_hidden", c.model.attr_hidden);
  read(t, "model", "inject_channels", c.model.inject_channels);
  read(t, "model", "patch_stages", c.model.patch_stages);
  std::int64_t init_seed = static_cast<std::int64_t>(c.model.init_seed);
  read(t, "model", "init_seed", init_seed);
  c.model.init_seed = static_cast<std::uint64_t>(init_seed);
  if (const auto* model = t["model"].as_table()) {
    if (const auto node = (*model)["widths"]) {
      const auto* arr = node.as_array();
      if (!arr) throw ConfigError("model.widths must be an array of integers");
      c.model.widths.clear();
      for (const auto& el : *arr) {
        auto v = el.value<std::int64_t>();
        if (!v || !el.is_integer()) throw ConfigError("model.widths must be an array of integers");
        c.model.widths.push_back(static_cast<int>(*v));
      }
    }
  }

  read(t, "data", "manifest", c.manifest);
  read(t, "data", "split", c.split);
  read(t, "output", "dir", c.out_dir);
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

/// Fully resolved config as TOML; parse_train_config(to_toml(c)) == c.
inline std::string to_toml(const TrainConfig& c) {
  toml::array widths;
  for (int w : c.model.widths) widths.push_back(w);
  toml::table t{
      {"train",
       toml::table{{"learning_rate", c.adam.learning_rate},
                   {"adam_beta1", c.adam.beta1},
                   {"adam_beta2", c.adam.beta2},
                   {"adam_eps", c.adam.eps},
                   {"clip_norm", c.adam.clip_norm},
                   {"batch_size", c.batch_size},
                   {"max_steps", c.max_steps},
                   {"seed", static_cast<std::int64_t>(c.seed)},
                   {"checkpoint_every", c.checkpoint_every},
                   {"log_every", c.log_every},
                   {"kl_standard", c.kl_standard}}},
      {"weights", toml::table{{"rec", c.weights.rec},
                              {"kl", c.weights.kl},
                              {"adv_g", c.weights.adv_g},
                              {"adv_p", c.weights.adv_p},
                              {"cls", c.weights.cls},
                              {"gen_cls", c.weights.gen_cls},
                              {"beta", c.weights.beta}}},
      {"model", toml::table{{"resolution", c.model.resolution},
                            {"d_face", c.model.d_face},
                            {"d_hair", c.model.d_hair},
                            {"d_attr_face", c.model.d_attr_face},
                            {"d_attr_hair", c.model.d_attr_hair},
                            {"n_attr", c.model.n_attr},
                            {"widths", widths},
                            {"attr_hidden", c.model.attr_hidden},
                            {"inject_channels", c.model.inject_channels},
                            {"patch_stages", c.model.patch_stages},
                            {"init_seed", static_cast<std::int64_t>(c.model.init_seed)}}},
      {"data", toml::table{{"manifest", c.manifest}, {"split", c.split}}},
      {"output", toml::table{{"dir", c.out_dir}}}};
  std::ostringstream os;
  os << toml::toml_formatter(t, toml::toml_formatter::default_flags & ~toml::format_flags::allow_literal_strings);
  os << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Batches

/// Stacked training tensors: images N x 3 x S x S, m_bg N x 1 x S x S, c N x A.
struct Batch {
  Tensor<float> x, x_f, x_h, m_bg, c;
  int size() const { return x.shape.at(0); }
};

inline Batch make_batch(std::span<const RegionSample> data, std::span<const std::size_t> indices, int s,
                        int n_attr) {
  if (indices.empty()) throw ConfigError("batch must not be empty");
  const int n = static_cast<int>(indices.size());
  const std::size_t img = static_cast<std::size_t>(3) * s * s, plane = static_cast<std::size_t>(s) * s;
  Batch b{Tensor<float>({n, 3, s, s}), Tensor<float>({n, 3, s, s}), Tensor<float>({n, 3, s, s}),
          Tensor<float>({n, 1, s, s}), Tensor<float>({n, n_attr})};
  for (int i = 0; i < n; ++i) {
    const auto& r = data[indices[static_cast<std::size_t>(i)]];
    if (r.resolution() != s) throw ConfigError("sample " + r.id + " does not match model resolution");
    r.validate(s);
    validate_attributes(r.c, static_cast<std::size_t>(n_attr));
    std::copy(r.x.data.begin(), r.x.data.end(), b.x.data.begin() + static_cast<std::ptrdiff_t>(i * img));
    std::copy(r.x_f.data.begin(), r.x_f.data.end(), b.x_f.data.begin() + static_cast<std::ptrdiff_t>(i * img));
    std::copy(r.x_h.data.begin(), r.x_h.data.end(), b.x_h.data.begin() + static_cast<std::ptrdiff_t>(i * img));
    for (std::size_t p = 0; p < plane; ++p)
      b.m_bg.data[i * plane + p] = r.m_bg.bits[p] ? 1.f : 0.f;
    std::copy(r.c.begin(), r.c.end(), b.c.data.begin() + static_cast<std::ptrdiff_t>(i * n_attr));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Step

struct StepResult {
  LossReport report;
  double gen_adv_g = 0;  // generator-side adversarial terms (not part of the report total)
  double gen_adv_p = 0;
  std::array<bool, kAllGroups.size()> updated{};
};

/// Which groups receive a nonzero objective under the given weights.
inline std::array<bool, kAllGroups.size()> active_groups(const LossWeights& w) {
  const bool gen = w.adv_g > 0 || w.adv_p > 0 || w.gen_cls > 0;
  const bool enc = w.rec > 0 || w.kl > 0 || gen;
  std::array<bool, kAllGroups.size()> a{};
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    switch (kAllGroups[g]) {
      case Group::EncFace:
      case Group::EncHair:
      case Group::EncAttrFace:
      case Group::EncAttrHair: a[g] = enc; break;
      case Group::DecFace:
      case Group::DecHair: a[g] = w.rec > 0; break;
      case Group::Composer: a[g] = w.rec > 0 || gen; break;
      case Group::DiscGlobal: a[g] = w.adv_g > 0; break;
      case Group::DiscPatch: a[g] = w.adv_p > 0; break;
      case Group::Classifier: a[g] = w.cls > 0; break;
    }
  }
  return a;
}

/// Per-step generator; depends only on (seed, step) so a resumed run draws the
/// same batches and noise as an uninterrupted one.
inline std::mt19937_64 step_rng(std::uint64_t seed, std::int64_t step) {
  const auto s = static_cast<std::uint64_t>(step);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return std::mt19937_64(seq);
}

inline Tensor<float> normal_tensor(Shape shape, std::mt19937_64& rng) {
  Tensor<float> t(std::move(shape));
  std::normal_distribution<float> dist(0.f, 1.f);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

namespace train_detail {

using V = ad::Var<float>;

inline V weighted(std::vector<std::pair<V, float>> terms) {
  std::erase_if(terms, [](const auto& t) { return t.second == 0.f; });
  if (terms.empty()) return {};
  return ad::weighted_sum<float>(terms);
}

inline void collect_grads(const nn::ParamList<float>& params, std::vector<std::vector<float>>& out, bool add) {
  if (!add) out.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad();
    if (!add) {
      if (g.empty())
        out[i].assign(params[i].size(), 0.f);
      else
        out[i].assign(g.begin(), g.end());
    } else if (!g.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) out[i][k] += g[k];
    }
  }
}

}  // namespace train_detail

/// One fused step on `batch`. Noise is drawn from `rng`. Updates the state in
/// place (model, Adam moments, step counter) and returns every loss value.
inline StepResult train_step(TrainingState& st, const Batch& batch, const TrainConfig& cfg, std::mt19937_64& rng) {
  using train_detail::V;
  const auto& w = cfg.weights;
  const auto& mc = st.model.config();
  const int n = batch.size();
  const auto& m = st.model;

  const V x = ad::constant(batch.x), x_f = ad::constant(batch.x_f), x_h = ad::constant(batch.x_h);
  const V c = ad::constant(batch.c);

  // Encoders see the full image and the true attributes.
  const auto q_xf = m.encode_face(x, c);
  const auto q_xh = m.encode_hair(x, c);
  const auto q_cf = m.encode_attr_face(c);
  const auto q_ch = m.encode_attr_hair(c);
  const V z_xf = ad::reparameterize(q_xf, normal_tensor({n, mc.d_face}, rng));
  const V z_xh = ad::reparameterize(q_xh, normal_tensor({n, mc.d_hair}, rng));
  const V z_cf = ad::reparameterize(q_cf, normal_tensor({n, mc.d_attr_face}, rng));
  const V z_ch = ad::reparameterize(q_ch, normal_tensor({n, mc.d_attr_hair}, rng));

  const V xf_rec = m.decode_face(z_xf, z_cf);
  const V xh_rec = m.decode_hair(z_xh, z_ch);
  const V x_rec = m.compose(z_xf, z_cf, z_xh, z_ch);
  const V x_rand = m.compose(ad::constant(normal_tensor({n, mc.d_face}, rng)),
                             ad::constant(normal_tensor({n, mc.d_attr_face}, rng)),
                             ad::constant(normal_tensor({n, mc.d_hair}, rng)),
                             ad::constant(normal_tensor({n, mc.d_attr_hair}, rng)));

  const V l_rec_f = ad::recon_loss(x_f, xf_rec, static_cast<const Tensor<float>*>(nullptr), w.beta);
  const V l_rec_h = ad::recon_loss(x_h, xh_rec, &batch.m_bg, w.beta);
  const V l_rec = ad::recon_loss(x, x_rec, &batch.m_bg, w.beta);
  const V kl_xf = ad::kl_loss(q_xf.mu, q_xf.log_var, cfg.kl_standard);
  const V kl_xh = ad::kl_loss(q_xh.mu, q_xh.log_var, cfg.kl_standard);
  const V kl_cf = ad::kl_loss(q_cf.mu, q_cf.log_var, cfg.kl_standard);
  const V kl_ch = ad::kl_loss(q_ch.mu, q_ch.log_var, cfg.kl_standard);

  const auto adv_g = ad::adversarial_losses(m.discriminate_global(x), m.discriminate_global(x_rec),
                                            m.discriminate_global(x_rand));
  const auto adv_p = ad::adversarial_losses(m.discriminate_patch(x), m.discriminate_patch(x_rec),
                                            m.discriminate_patch(x_rand));

  const V c_star = m.classify(x);
  const V l_cls = ad::bce_loss(c, c_star);
  const V l_gen_cls = ad::gen_cls_loss(c, m.classify(x_rec), m.classify(x_rand));

  StepResult res;
  auto& r = res.report;
  r.rec_f = l_rec_f.item();
  r.rec_h = l_rec_h.item();
  r.rec = l_rec.item();
  r.kl_xf = kl_xf.item();
  r.kl_xh = kl_xh.item();
  r.kl_cf = kl_cf.item();
  r.kl_ch = kl_ch.item();
  r.adv_g = adv_g.discriminator.item();
  r.adv_p = adv_p.discriminator.item();
  r.cls = l_cls.item();
  r.gen_cls = l_gen_cls.item();
  r.total = total_loss(r, w);
  res.gen_adv_g = adv_g.generator.item();
  res.gen_adv_p = adv_p.generator.item();
  if (auto bad = r.first_non_finite()) throw NonFiniteLossError(st.step, *bad);
  if (!std::isfinite(res.gen_adv_g)) throw NonFiniteLossError(st.step, "gen_adv_g");
  if (!std::isfinite(res.gen_adv_p)) throw NonFiniteLossError(st.step, "gen_adv_p");

  const auto f = [](double v) { return static_cast<float>(v); };
  const auto active = active_groups(w);
  std::array<nn::ParamList<float>, kAllGroups.size()> params;
  std::array<std::vector<std::vector<float>>, kAllGroups.size()> grads;
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) params[g] = m.group(kAllGroups[g]);

  auto run_pass = [&](const V& objective, std::initializer_list<Group> groups, bool add) {
    std::vector<V> targets;
    std::vector<std::size_t> idx;
    for (Group grp : groups) {
      const auto g = static_cast<std::size_t>(grp);
      if (!active[g]) continue;
      idx.push_back(g);
      targets.insert(targets.end(), params[g].begin(), params[g].end());
    }
    if (targets.empty()) return;
    if (objective.defined()) ad::backward(objective, targets);
    for (std::size_t g : idx) {
      if (objective.defined())
        train_detail::collect_grads(params[g], grads[g], add && !grads[g].empty());
      else if (grads[g].empty())
        for (const auto& p : params[g]) grads[g].emplace_back(p.size(), 0.f);
    }
  };

  // encoders, decoders and composer
  const V objective_gen = train_detail::weighted({{l_rec_f, f(w.rec)},
                                                  {l_rec_h, f(w.rec)},
                                                  {kl_xf, f(w.kl)},
                                                  {kl_xh, f(w.kl)},
                                                  {kl_cf, f(w.kl)},
                                                  {kl_ch, f(w.kl)},
                                                  {adv_g.generator, f(w.adv_g)},
                                                  {adv_p.generator, f(w.adv_p)},
                                                  {l_gen_cls, f(w.gen_cls)}});
  run_pass(objective_gen,
           {Group::EncFace, Group::EncHair, Group::EncAttrFace, Group::EncAttrHair, Group::DecFace, Group::DecHair,
            Group::Composer},
           false);
  // full-image reconstruction reaches the composer only
  run_pass(train_detail::weighted({{l_rec, f(w.rec)}}), {Group::Composer}, true);
  run_pass(train_detail::weighted({{adv_g.discriminator, f(w.adv_g)}, {adv_p.discriminator, f(w.adv_p)}}),
           {Group::DiscGlobal, Group::DiscPatch}, false);
  run_pass(train_detail::weighted({{l_cls, f(w.cls)}}), {Group::Classifier}, false);

  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    if (!active[g]) continue;
    adam_update(params[g], grads[g], st.optimizer[g], cfg.adam);
    res.updated[g] = true;
  }
  ++st.step;
  return res;
}

// ---------------------------------------------------------------------------
// Loop

inline nlohmann::json step_record(std::int64_t step, const StepResult& r) {
  nlohmann::json j{{"step", step}};
  for (const auto& [k, v] : r.report.fields()) j[k] = v;
  j["gen_adv_g"] = r.gen_adv_g;
  j["gen_adv_p"] = r.gen_adv_p;
  return j;
}

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t step) {
  std::ostringstream os;
  os << "step_" << std::setw(8) << std::setfill('0') << step << ".ckpt";
  return dir / os.str();
}

struct TrainHooks {
  std::ostream* progress = nullptr;  // human-readable progress lines
  std::function<void(std::int64_t, const StepResult&)> on_step;
};

/// Runs steps st.step .. cfg.max_steps-1 over `data`, writing
/// out_dir/train_log.jsonl (appended) and checkpoints at every multiple of
/// checkpoint_every plus the final step. A fresh state (step 0) also gets an
/// initial checkpoint, so max_steps = 0 emits exactly that one file.
/// Returns the paths of the checkpoints written.
inline std::vector<std::filesystem::path> train(TrainingState& st, std::span<const RegionSample> data,
                                                const TrainConfig& cfg, const std::filesystem::path& out_dir,
                                                const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training set is empty");
  if (!(st.model.config() == cfg.model)) throw ConfigError("checkpoint model config differs from the training config");
  const int s = cfg.model.resolution;
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::app);
  if (!log) throw ConfigError("cannot write training log in " + out_dir.string());

  std::vector<std::filesystem::path> written;
  auto save = [&] {
    const auto p = checkpoint_path(out_dir, st.step);
    save_checkpoint(st, p);
    save_checkpoint(st, out_dir / "latest.ckpt");
    written.push_back(p);
  };
  if (st.step == 0) save();

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.batch_size));
  while (st.step < cfg.max_steps) {
    const std::int64_t step = st.step;
    auto rng = step_rng(cfg.seed, step);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    for (auto& i : idx) i = pick(rng);
    const Batch batch = make_batch(data, idx, s, cfg.model.n_attr);
    const StepResult res = train_step(st, batch, cfg, rng);
    if (step % cfg.log_every == 0 || st.step == cfg.max_steps) log << step_record(step, res).dump() << '\n';
    if (hooks.on_step) hooks.on_step(step, res);
    if (hooks.progress && (step % 50 == 0 || st.step == cfg.max_steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *hooks.progress << "step " << step << " rec " << res.report.rec << " rec_f " << res.report.rec_f << " rec_h "
                      << res.report.rec_h << " adv_g " << res.report.adv_g << " cls " << res.report.cls << " ("
                      << std::fixed << std::setprecision(1) << secs << std::defaultfloat << std::setprecision(6)
                      << " s)\n";
    }
    if (st.step % cfg.checkpoint_every == 0 && st.step != cfg.max_steps) save();
  }
  log.flush();
  if (written.empty() || written.back() != checkpoint_path(out_dir, st.step)) save();
  return written;
}

}  // namespace rsgan
