#include <gtest/gtest.h>

#include <random>

#include "rsgan/evaluation.hpp"
#include "rsgan/synth.hpp"

using namespace rsgan;

namespace {

std::vector<Image> synth_images(int n, int s = 32) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) out.push_back(synth_sample(static_cast<std::uint64_t>(i), 37.0 * i, 300 - 23.0 * i, s).x);
  return out;
}

class Throwing : public IdentityEmbedder {
 public:
  std::vector<double> embed(const Image&) const override { throw MetricError("no face"); }
  std::string name() const override { return "throwing"; }
};

}  // namespace

TEST(SwapTwice, TrivialSwappersRoundTrip) {
  const auto ims = synth_images(2);
  for (const Swapper& s : {Swapper(target_swapper), Swapper(source_swapper)}) {
    const auto [a, b] = swap_twice(ims[0], ims[1], s);
    EXPECT_EQ(a, ims[0]);
    EXPECT_EQ(b, ims[1]);
  }
}

TEST(SwapTwice, AppliesTheSwapperFourTimesInOrder) {
  std::vector<std::pair<float, float>> calls;
  const Swapper tag = [&](const Image& s, const Image& t) {
    calls.emplace_back(s.data[0], t.data[0]);
    Image out = t;
    out.data[0] = s.data[0] * 10 + t.data[0];
    return out;
  };
  Image a = make_image(1, 1, 1, 1.f), b = make_image(1, 1, 1, 2.f);
  swap_twice(a, b, tag);
  ASSERT_EQ(calls.size(), 4u);
  EXPECT_EQ(calls[0], std::make_pair(1.f, 2.f));
  EXPECT_EQ(calls[1], std::make_pair(2.f, 1.f));
  EXPECT_EQ(calls[2], std::make_pair(12.f, 21.f));
  EXPECT_EQ(calls[3], std::make_pair(21.f, 12.f));
}

TEST(RunningStat, MergeMatchesSequential) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(3, 2);
  RunningStat all, a, b;
  for (int i = 0; i < 100; ++i) {
    const double v = n(rng);
    all.add(v);
    (i < 37 ? a : b).add(v);
  }
  a.merge(b);
  EXPECT_EQ(a.n, all.n);
  EXPECT_NEAR(a.mean, all.mean, 1e-12);
  EXPECT_NEAR(a.stddev(), all.stddev(), 1e-12);
  RunningStat empty;
  empty.merge(all);
  EXPECT_EQ(empty.n, 100);
}

TEST(Benchmark, PairSamplingIsDeterministicAndBounded) {
  EXPECT_EQ(sample_pairs(10, 20, 3), sample_pairs(10, 20, 3));
  EXPECT_NE(sample_pairs(10, 20, 3), sample_pairs(10, 20, 4));
  const auto all = sample_pairs(5, 10, 0);
  EXPECT_EQ(std::set(all.begin(), all.end()).size(), 10u);
  EXPECT_THROW(sample_pairs(5, 11, 0), MetricError);
  EXPECT_THROW(sample_pairs(5, 0, 0), MetricError);
}

TEST(Benchmark, ZeroPairsIsAnError) {
  ToyColorEmbedder e;
  EXPECT_THROW(run_benchmark(synth_images(4), {{"id", target_swapper, {}}}, e, {0, 1, {}}), MetricError);
  EXPECT_THROW(run_benchmark({}, {{"id", target_swapper, {}}}, e, {1, 1, {}}), MetricError);
}

TEST(Benchmark, IdentitySwapperIsPerfectlyConsistent) {
  ToyColorEmbedder e;
  const auto rep = run_benchmark(synth_images(8), {{"identity", target_swapper, [](const Image& x) { return x; }}},
                                 e, {12, 5, {}});
  ASSERT_EQ(rep.rows.size(), 1u);
  const auto& r = rep.rows[0];
  EXPECT_EQ(r.abs_err_swap2.n, 24);
  EXPECT_EQ(r.abs_err_swap2.mean, 0.0);
  EXPECT_EQ(r.abs_err_swap2.stddev(), 0.0);
  EXPECT_EQ(r.msssim_swap2.mean, 1.0);
  EXPECT_EQ(r.msssim_recon.mean, 1.0);
  EXPECT_EQ(r.abs_err_recon.mean, 0.0);
  EXPECT_GT(r.identity_swap.mean, 0.0);  // the target is a different identity
  EXPECT_EQ(rep.msssim_levels, 2);
}

TEST(Benchmark, SameSeedSameReport) {
  ToyColorEmbedder e;
  const std::vector<BenchmarkMethod> ms{{"copy", source_swapper, {}}, {"identity", target_swapper, {}}};
  const auto a = run_benchmark(synth_images(8), ms, e, {6, 9, {}});
  const auto b = run_benchmark(synth_images(8), ms, e, {6, 9, {}});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(report_text(a), report_text(b));
}

TEST(Benchmark, FailuresAreCountedNotFatal) {
  int calls = 0;
  const Swapper flaky = [&](const Image& s, const Image& t) {
    if (++calls % 8 == 1) throw std::runtime_error("swap failed");
    return target_swapper(s, t);
  };
  Throwing bad;
  const auto rep = run_benchmark(synth_images(6), {{"flaky", flaky, {}}}, bad, {4, 2, {}});
  const auto& r = rep.rows[0];
  EXPECT_GT(r.skipped_pairs, 0);
  EXPECT_EQ(r.identity_failures + r.skipped_pairs, 4);
  EXPECT_EQ(r.identity_swap.n, 0);
  EXPECT_EQ(r.abs_err_swap2.n, 2 * (4 - r.skipped_pairs));
}

TEST(Benchmark, ReportLayout) {
  ToyColorEmbedder e;
  const auto rep = run_benchmark(synth_images(6), {{"RSGAN", target_swapper, {}}}, e, {3, 1, {}});
  const auto& cols = report_columns();
  ASSERT_EQ(cols.size(), 6u);
  EXPECT_EQ(cols[1], "OpenFace Swap");
  EXPECT_EQ(cols[2], "Abs. Errors Recon.");
  EXPECT_EQ(cols[3], "Abs. Errors Swap ×2");
  EXPECT_EQ(cols[4], "MS-SSIM Recon.");
  EXPECT_EQ(cols[5], "MS-SSIM Swap ×2");

  const std::string csv = report_csv(rep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "Method,OpenFace Swap,Abs. Errors Recon.,Abs. Errors Swap ×2,MS-SSIM Recon.,MS-SSIM Swap ×2");
  EXPECT_NE(csv.find("RSGAN (mean),"), std::string::npos);
  EXPECT_NE(csv.find("RSGAN (std),"), std::string::npos);

  const std::string txt = report_text(rep);
  for (const char* s : {"OpenFace", "Abs. Errors", "MS-SSIM", "Recon.", "Swap ×2", "RSGAN (mean)", "RSGAN (std)"})
    EXPECT_NE(txt.find(s), std::string::npos) << s;

  const auto j = rep.to_json();
  EXPECT_EQ(j["n_pairs"], 3);
  EXPECT_EQ(j["metadata"]["msssim_levels"], 2);
  EXPECT_EQ(j["metadata"]["msssim_input"], "luma");
  EXPECT_TRUE(j["rows"][0]["abs_err_recon"].is_null());
  EXPECT_EQ(j["rows"][0]["msssim_swap2"]["mean"], 1.0);
}
