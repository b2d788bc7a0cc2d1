#include <gtest/gtest.h>

#include <fstream>

#include "rsgan/dataset.hpp"
#include "rsgan/trainer.hpp"
#include "support.hpp"

using namespace rsgan;
using test_support::TempDir;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.model = test_support::tiny_model();
  c.batch_size = 3;
  c.seed = 11;
  c.max_steps = 10;
  c.checkpoint_every = 1000;
  return c;
}

const std::vector<RegionSample>& tiny_data() {
  static const auto data = synth_samples(synth_specs(12, 5), 16);
  return data;
}

std::vector<Tensor<float>> snapshot(const Model<float>& m, Group g) {
  std::vector<Tensor<float>> out;
  for (const auto& p : m.group(g)) out.push_back(p.value());
  return out;
}

std::array<std::vector<Tensor<float>>, kAllGroups.size()> snapshot_all(const Model<float>& m) {
  std::array<std::vector<Tensor<float>>, kAllGroups.size()> out;
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) out[g] = snapshot(m, kAllGroups[g]);
  return out;
}

// Runs one step from a fresh state and reports which groups changed.
std::array<bool, kAllGroups.size()> changed_groups(const LossWeights& w) {
  auto cfg = tiny_train_config();
  cfg.weights = w;
  TrainingState st(cfg.model, synth_attribute_names());
  const auto before = snapshot_all(st.model);
  const std::vector<std::size_t> idx{0, 1, 2};
  const auto batch = make_batch(tiny_data(), idx, 16, kSynthAttrCount);
  auto rng = step_rng(cfg.seed, 0);
  train_step(st, batch, cfg, rng);
  std::array<bool, kAllGroups.size()> changed{};
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) changed[g] = snapshot(st.model, kAllGroups[g]) != before[g];
  return changed;
}

std::string describe(const std::array<bool, kAllGroups.size()>& a) {
  std::string s;
  for (std::size_t g = 0; g < a.size(); ++g) s += std::string(group_name(kAllGroups[g])) + (a[g] ? "=1 " : "=0 ");
  return s;
}

std::array<bool, kAllGroups.size()> all_except(std::initializer_list<Group> frozen) {
  std::array<bool, kAllGroups.size()> a;
  a.fill(true);
  for (Group g : frozen) a[static_cast<std::size_t>(g)] = false;
  return a;
}

std::array<bool, kAllGroups.size()> only(std::initializer_list<Group> live) {
  std::array<bool, kAllGroups.size()> a{};
  for (Group g : live) a[static_cast<std::size_t>(g)] = true;
  return a;
}

LossWeights zero_weights() {
  LossWeights w;
  w.rec = w.kl = w.adv_g = w.adv_p = w.cls = w.gen_cls = 0;
  return w;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(TrainConfigToml, DefaultsRoundTrip) {
  const TrainConfig c;
  EXPECT_EQ(parse_train_config(to_toml(c)), c);
  EXPECT_EQ(parse_train_config(""), c);
}

TEST(TrainConfigToml, NonDefaultValuesRoundTrip) {
  TrainConfig c;
  c.adam.learning_rate = 1.0 / 3.0;
  c.adam.clip_norm = 0.1;
  c.weights.beta = 0.3;
  c.weights.gen_cls = 7.25;
  c.kl_standard = true;
  c.seed = 1234567890123ull;
  c.model = ModelConfig::paper_scale();
  c.manifest = "data/with \"quotes\"/manifest.json";
  c.out_dir = "runs/x";
  const auto text = to_toml(c);
  EXPECT_EQ(parse_train_config(text), c) << text;
  EXPECT_EQ(to_toml(parse_train_config(text)), text);
}

TEST(TrainConfigToml, PaperPresetFile) {
  const auto c = load_train_config(std::filesystem::path(RSGAN_SOURCE_DIR) / "configs" / "paper.toml");
  EXPECT_EQ(c.batch_size, 50);
  EXPECT_DOUBLE_EQ(c.adam.learning_rate, 0.0002);
  EXPECT_DOUBLE_EQ(c.adam.beta1, 0.5);
  EXPECT_DOUBLE_EQ(c.adam.beta2, 0.999);
  EXPECT_EQ(c.weights, LossWeights{});
  EXPECT_EQ(c.model, ModelConfig::paper_scale());
  EXPECT_EQ(c.max_steps, 120000);
}

TEST(TrainConfigToml, RejectsBadInput) {
  EXPECT_THROW(parse_train_config("[train]\nlearning_rat = 0.1\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[trian]\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[train]\nbatch_size = \"8\"\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[train]\nbatch_size = 0\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[weights]\nrec = -1.0\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[model]\nresolution = 24\n"), ConfigError);
  EXPECT_THROW(parse_train_config("[model]\npreset = \"huge\"\n"), ConfigError);
  EXPECT_THROW(parse_train_config("this is not toml"), ConfigError);
}

// ---------------------------------------------------------------------------
// Routing

TEST(TrainStepRouting, ZeroingEachWeightFreezesTheGroupsThatDependOnlyOnIt) {
  struct Case {
    double LossWeights::*field;
    const char* name;
    std::array<bool, kAllGroups.size()> expect;
  };
  const std::vector<Case> cases{
      {&LossWeights::rec, "rec", all_except({Group::DecFace, Group::DecHair})},
      {&LossWeights::kl, "kl", all_except({})},
      {&LossWeights::adv_g, "adv_g", all_except({Group::DiscGlobal})},
      {&LossWeights::adv_p, "adv_p", all_except({Group::DiscPatch})},
      {&LossWeights::cls, "cls", all_except({Group::Classifier})},
      {&LossWeights::gen_cls, "gen_cls", all_except({})},
  };
  for (const auto& c : cases) {
    LossWeights w;
    w.*c.field = 0;
    const auto got = changed_groups(w);
    EXPECT_EQ(got, c.expect) << "lambda_" << c.name << " = 0: " << describe(got);
  }
}

TEST(TrainStepRouting, SingleObjectiveReachesOnlyItsGroups) {
  struct Case {
    double LossWeights::*field;
    const char* name;
    std::array<bool, kAllGroups.size()> expect;
  };
  const std::vector<Case> cases{
      {&LossWeights::cls, "cls", only({Group::Classifier})},
      {&LossWeights::kl, "kl", only({Group::EncFace, Group::EncHair, Group::EncAttrFace, Group::EncAttrHair})},
      {&LossWeights::rec, "rec", all_except({Group::DiscGlobal, Group::DiscPatch, Group::Classifier})},
      {&LossWeights::gen_cls, "gen_cls",
       only({Group::EncFace, Group::EncHair, Group::EncAttrFace, Group::EncAttrHair, Group::Composer})},
      {&LossWeights::adv_g, "adv_g",
       only({Group::EncFace, Group::EncHair, Group::EncAttrFace, Group::EncAttrHair, Group::Composer,
             Group::DiscGlobal})},
      {&LossWeights::adv_p, "adv_p",
       only({Group::EncFace, Group::EncHair, Group::EncAttrFace, Group::EncAttrHair, Group::Composer,
             Group::DiscPatch})},
  };
  for (const auto& c : cases) {
    LossWeights w = zero_weights();
    w.*c.field = 1;
    const auto got = changed_groups(w);
    EXPECT_EQ(got, c.expect) << "only lambda_" << c.name << ": " << describe(got);
  }
}

TEST(TrainStepRouting, AllWeightsZeroChangesNothing) {
  EXPECT_EQ(changed_groups(zero_weights()), only({}));
}

// The full-image reconstruction term reaches the composer only. z_cf feeds
// dec_f (unmasked) and the composer (masked), so under rec alone beta must not
// affect the face attribute encoder, while the hair encoder sees the masked
// hair term. A huge Adam eps makes the first update linear in the gradient
// instead of roughly its sign.
TEST(TrainStepRouting, FullImageTermDoesNotReachEncoders) {
  auto run = [](double beta) {
    auto cfg = tiny_train_config();
    cfg.weights = zero_weights();
    cfg.weights.rec = 1;
    cfg.weights.beta = beta;
    cfg.adam.eps = 1e3;
    cfg.adam.learning_rate = 1.0;
    TrainingState st(cfg.model, synth_attribute_names());
    const std::vector<std::size_t> idx{0, 1, 2};
    const auto batch = make_batch(tiny_data(), idx, 16, kSynthAttrCount);
    auto rng = step_rng(cfg.seed, 0);
    train_step(st, batch, cfg, rng);
    return std::pair{snapshot(st.model, Group::EncAttrFace), snapshot(st.model, Group::EncHair)};
  };
  const auto a = run(0.0), b = run(0.9);
  EXPECT_EQ(a.first, b.first);
  EXPECT_NE(a.second, b.second);
}

// ---------------------------------------------------------------------------
// Step behaviour

TEST(TrainStep, ReportTotalIsWeightedSum) {
  auto cfg = tiny_train_config();
  TrainingState st(cfg.model, synth_attribute_names());
  const std::vector<std::size_t> idx{3, 4};
  const auto batch = make_batch(tiny_data(), idx, 16, kSynthAttrCount);
  auto rng = step_rng(1, 0);
  const auto r = train_step(st, batch, cfg, rng);
  EXPECT_EQ(r.report.total, total_loss(r.report, cfg.weights));
  EXPECT_FALSE(r.report.first_non_finite());
  EXPECT_GT(r.report.rec, 0);
  EXPECT_GT(r.report.adv_g, 0);
  EXPECT_EQ(st.step, 1);
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) EXPECT_EQ(st.optimizer[g].step, 1);
}

TEST(TrainStep, NonFiniteLossNamesTheComponent) {
  auto cfg = tiny_train_config();
  TrainingState st(cfg.model, synth_attribute_names());
  for (auto& p : st.model.group(Group::DecFace)) {
    auto q = p;
    std::fill(q.mutable_value().data.begin(), q.mutable_value().data.end(), std::nanf(""));
  }
  const auto before = snapshot_all(st.model);
  const std::vector<std::size_t> idx{0};
  const auto batch = make_batch(tiny_data(), idx, 16, kSynthAttrCount);
  auto rng = step_rng(1, 0);
  try {
    train_step(st, batch, cfg, rng);
    FAIL() << "expected NonFiniteLossError";
  } catch (const NonFiniteLossError& e) {
    EXPECT_EQ(e.component(), "rec_f");
  }
  EXPECT_EQ(st.step, 0);
  // nothing was applied; compare the untouched groups
  EXPECT_EQ(snapshot(st.model, Group::Composer), before[static_cast<std::size_t>(Group::Composer)]);
}

TEST(TrainStep, BatchRejectsMismatchedSamples) {
  const std::vector<std::size_t> idx{0};
  EXPECT_THROW(make_batch(tiny_data(), idx, 32, kSynthAttrCount), ConfigError);
  EXPECT_THROW(make_batch(tiny_data(), {}, 16, kSynthAttrCount), ConfigError);
  EXPECT_THROW(make_batch(tiny_data(), idx, 16, 3), ShapeError);
}

// A discriminator trained against frozen fakes with a small step size should
// lower its loss at every step.
TEST(TrainStep, DiscriminatorLossDecreasesOnFrozenFakes) {
  Model<float> m(test_support::tiny_model(4));
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const auto batch = make_batch(tiny_data(), idx, 16, kSynthAttrCount);
  std::mt19937_64 rng(2);
  Tensor<float> fake_rec, fake_rand;
  {
    ad::NoGradGuard ng;
    const auto& c = m.config();
    auto z = [&](int d) { return ad::constant(normal_tensor({4, d}, rng)); };
    fake_rec = m.compose(z(c.d_face), z(c.d_attr_face), z(c.d_hair), z(c.d_attr_hair)).value();
    fake_rand = m.compose(z(c.d_face), z(c.d_attr_face), z(c.d_hair), z(c.d_attr_hair)).value();
  }
  const auto params = m.group(Group::DiscGlobal);
  auto state = make_adam_state(params);
  AdamConfig adam;
  adam.learning_rate = 2e-5;
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    const auto loss = ad::adversarial_losses(m.discriminate_global(ad::constant(batch.x)),
                                             m.discriminate_global(ad::constant(fake_rec)),
                                             m.discriminate_global(ad::constant(fake_rand)))
                          .discriminator;
    EXPECT_LT(loss.item(), prev) << "step " << step;
    prev = loss.item();
    ad::backward(loss, params);
    std::vector<std::vector<float>> grads;
    for (const auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
    adam_update(params, grads, state, adam);
  }
}

// ---------------------------------------------------------------------------
// Loop

TEST(Train, FixedSeedRunsAreBitwiseIdentical) {
  auto run = [] {
    TempDir dir("train");
    auto cfg = tiny_train_config();
    TrainingState st(cfg.model, synth_attribute_names());
    std::vector<LossReport> reports;
    TrainHooks hooks;
    hooks.on_step = [&](std::int64_t, const StepResult& r) { reports.push_back(r.report); };
    train(st, tiny_data(), cfg, dir.path(), hooks);
    return std::pair{reports, encode_checkpoint(st)};
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.first.size(), 10u);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first.front(), a.first.back());
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  TempDir full_dir("train"), part_dir("train");
  auto cfg = tiny_train_config();
  cfg.max_steps = 6;
  cfg.checkpoint_every = 3;

  std::vector<LossReport> full;
  TrainHooks hooks;
  hooks.on_step = [&](std::int64_t, const StepResult& r) { full.push_back(r.report); };
  TrainingState a(cfg.model, synth_attribute_names());
  const auto written = train(a, tiny_data(), cfg, full_dir.path(), hooks);
  ASSERT_EQ(written.size(), 3u);  // steps 0, 3, 6
  EXPECT_EQ(written[1].filename(), "step_00000003.ckpt");

  auto b = load_checkpoint(written[1]);
  EXPECT_EQ(b.step, 3);
  std::vector<std::pair<std::int64_t, LossReport>> resumed;
  hooks.on_step = [&](std::int64_t step, const StepResult& r) { resumed.emplace_back(step, r.report); };
  train(b, tiny_data(), cfg, part_dir.path(), hooks);
  ASSERT_EQ(resumed.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(resumed[i].first, static_cast<std::int64_t>(3 + i));
    EXPECT_EQ(resumed[i].second, full[3 + i]);
  }
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(Train, ZeroStepsEmitsOnlyTheInitialCheckpoint) {
  TempDir dir("train");
  auto cfg = tiny_train_config();
  cfg.max_steps = 0;
  TrainingState st(cfg.model, synth_attribute_names());
  const auto written = train(st, tiny_data(), cfg, dir.path());
  ASSERT_EQ(written.size(), 1u);
  EXPECT_EQ(written[0].filename(), "step_00000000.ckpt");
  std::size_t ckpts = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path()))
    if (e.path().filename().string().rfind("step_", 0) == 0) ++ckpts;
  EXPECT_EQ(ckpts, 1u);
  EXPECT_EQ(load_checkpoint(written[0]).step, 0);
}

TEST(Train, WritesOneLogLinePerStep) {
  TempDir dir("train");
  auto cfg = tiny_train_config();
  cfg.max_steps = 4;
  TrainingState st(cfg.model, synth_attribute_names());
  train(st, tiny_data(), cfg, dir.path());
  std::ifstream in(dir / "train_log.jsonl");
  std::string line;
  std::int64_t expect = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step").get<std::int64_t>(), expect++);
    for (const char* k : {"rec_f", "rec_h", "rec", "kl_xf", "adv_g", "adv_p", "cls", "gen_cls", "total"})
      EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(expect, 4);
}

TEST(Train, EmptyDatasetIsAConfigError) {
  TempDir dir("train");
  auto cfg = tiny_train_config();
  TrainingState st(cfg.model, synth_attribute_names());
  EXPECT_THROW(train(st, std::span<const RegionSample>{}, cfg, dir.path()), ConfigError);
}
