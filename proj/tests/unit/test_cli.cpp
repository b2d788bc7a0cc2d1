#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rsgan/cli.hpp"
#include "support.hpp"

using namespace rsgan;
using test_support::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "rsgan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>("cli");
    save_checkpoint(TrainingState(test_support::tiny_model(3), synth_attribute_names()), ckpt());
    for (int i = 0; i < 2; ++i) {
      const auto s = synth_sample(static_cast<std::uint64_t>(i), 100.0 * i, 250 - 90.0 * i, 16);
      write_png(img(i), s.x);
    }
    write_png(*dir_ / "big.png", synth_sample(9, 10, 10, 32).x);
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static std::string ckpt() { return (*dir_ / "m.ckpt").string(); }
  static std::string img(int i) { return (*dir_ / ("in" + std::to_string(i) + ".png")).string(); }
  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static InferenceModel model() { return InferenceModel::load(ckpt()); }

  static inline std::unique_ptr<TempDir> dir_;
};

}  // namespace

TEST_F(CliTest, SwapWritesPng) {
  const auto r = run({"swap", "--source", img(0), "--target", img(1), "--out", path("o.png"), "--ckpt", ckpt()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = model();
  EXPECT_EQ(read_file_bytes(path("o.png")), encode_png(swap(m, read_png(img(0)), read_png(img(1)))));
}

TEST_F(CliTest, CheckpointFromEnvironment) {
  ::setenv("RSGAN_CKPT", ckpt().c_str(), 1);
  const auto r = run({"swap", "--source", img(0), "--target", img(1), "--out", path("env.png")});
  ::unsetenv("RSGAN_CKPT");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run({"swap", "--source", img(0), "--target", img(1), "--out", path("env.png")}).code, 2);
}

TEST_F(CliTest, SwapGdWithoutMaskWarnsAndFallsBack) {
  const auto r =
      run({"swap", "--source", img(0), "--target", img(1), "--out", path("gd.png"), "--ckpt", ckpt(), "--gd"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("empty face mask"), std::string::npos);
  EXPECT_EQ(read_file_bytes(path("gd.png")), read_file_bytes(path("o.png")));
}

TEST_F(CliTest, StrictRejectsWrongResolution) {
  const std::vector<std::string> base{"swap", "--source", path("big.png"), "--target", img(1), "--out",
                                      path("s.png"), "--ckpt", ckpt()};
  auto loose = run(base);
  EXPECT_EQ(loose.code, 0);
  EXPECT_NE(loose.err.find("resized"), std::string::npos);
  auto strict = base;
  strict.push_back("--strict");
  EXPECT_EQ(run(strict).code, 2);
}

TEST_F(CliTest, EditSampleInterpolate) {
  const auto m = model();
  const Image a = read_png(img(0)), b = read_png(img(1));
  ASSERT_EQ(run({"edit", "--image", img(0), "--set", "hair_hue_3=1", "--region", "hair", "--out", path("e.png"),
                 "--ckpt", ckpt()})
                .code,
            0);
  EXPECT_EQ(read_png(path("e.png")),
            quantize8(edit_attributes(m, a, {{"hair_hue_3", 1.f}}, Region::Hair).image));

  ASSERT_EQ(run({"sample", "--image", img(0), "--region", "face", "--seed", "4", "--out", path("p.png"), "--ckpt",
                 ckpt()})
                .code,
            0);
  EXPECT_EQ(read_png(path("p.png")), quantize8(sample_parts(m, a, Region::Face, 4)));

  ASSERT_EQ(run({"interpolate", "--image1", img(0), "--image2", img(1), "--t", "0.75", "--out", path("i.png"),
                 "--ckpt", ckpt()})
                .code,
            0);
  EXPECT_EQ(read_png(path("i.png")), quantize8(interpolate(m, a, b, 0.75, Region::Both)));

  EXPECT_EQ(run({"edit", "--image", img(0), "--set", "no_such=1", "--out", path("x.png"), "--ckpt", ckpt()}).code, 2);
  EXPECT_EQ(run({"edit", "--image", img(0), "--set", "bogus", "--out", path("x.png"), "--ckpt", ckpt()}).code, 1);
  EXPECT_EQ(run({"sample", "--image", img(0), "--region", "both", "--out", path("x.png"), "--ckpt", ckpt()}).code, 1);
  EXPECT_EQ(run({"interpolate", "--image1", img(0), "--image2", img(1), "--t", "1.5", "--out", path("x.png"),
                 "--ckpt", ckpt()})
                .code,
            2);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  const auto unknown = run({"swap", "--bogus"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_FALSE(unknown.err.empty());
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"dance"}).code, 1);
  EXPECT_EQ(run({"swap", "--source", img(0)}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"swap", "--help"}).code, 0);
}

TEST_F(CliTest, DryRunPrintsResolvedToml) {
  const auto cfg = std::filesystem::path(RSGAN_SOURCE_DIR) / "configs" / "paper.toml";
  const auto r = run({"train", "--config", cfg.string(), "--dry-run", "--steps", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  TrainConfig want = load_train_config(cfg);
  want.max_steps = 7;
  EXPECT_EQ(parse_train_config(r.out), want);
  EXPECT_EQ(r.out, to_toml(want));
  EXPECT_FALSE(std::filesystem::exists("runs/paper"));
}

TEST_F(CliTest, SynthTrainEvaluate) {
  ASSERT_EQ(run({"synth-dataset", "--out", path("ds"), "--train", "6", "--test", "4", "--resolution", "16"}).code,
            0);
  TrainConfig c;
  c.model = test_support::tiny_model(3);
  c.batch_size = 2;
  c.max_steps = 2;
  c.checkpoint_every = 2;
  c.manifest = path("ds/manifest.json");
  c.out_dir = path("run");
  std::ofstream(path("t.toml")) << to_toml(c);

  const auto tr = run({"train", "--config", path("t.toml")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  ASSERT_TRUE(std::filesystem::exists(path("run/step_00000002.ckpt"))) << tr.out;
  const auto ck = path("run/step_00000002.ckpt");

  const auto ev = run({"evaluate", "--manifest", path("ds/manifest.json"), "--pairs", "3", "--ckpt", ck, "--json",
                       path("rep.json"), "--csv", path("rep.csv")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("RSGAN (mean)"), std::string::npos);
  std::ifstream jf(path("rep.json"));
  const auto j = nlohmann::json::parse(jf);
  EXPECT_EQ(j["n_pairs"], 3);
  EXPECT_EQ(j["metadata"]["msssim_input"], "luma");

  const auto zero = run({"evaluate", "--manifest", path("ds/manifest.json"), "--pairs", "0", "--ckpt", ck});
  EXPECT_EQ(zero.code, 2);
  EXPECT_NE(zero.err.find("pairs"), std::string::npos);
}

TEST_F(CliTest, PrepareDatasetNeedsProviders) {
  std::filesystem::create_directories(path("raw"));
  std::ofstream(path("a.csv")) << "id,x\n";
  EXPECT_EQ(run({"prepare-dataset", "--raw", path("raw"), "--out", path("pd"), "--attributes", path("a.csv")}).code,
            1);
  const auto r = run({"prepare-dataset", "--raw", path("raw"), "--out", path("pd"), "--attributes", path("a.csv"),
                      "--landmark-cmd", "false", "--masks-dir", path("raw")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(path("pd/manifest.json")));
}
