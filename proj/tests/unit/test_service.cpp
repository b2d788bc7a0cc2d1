#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "rsgan/service.hpp"
#include "rsgan/synth.hpp"
#include "support.hpp"

using namespace rsgan;

namespace {

std::string png_bytes(const Image& im) {
  const auto b = encode_png(im);
  return {b.begin(), b.end()};
}

Image synth_image(std::uint64_t seed, double face, double hair, int s = 16) {
  return quantize8(synth_sample(seed, face, hair, s).x);
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = std::make_shared<InferenceModel>(Model<float>(test_support::tiny_model(4)), synth_attribute_names());
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.max_image_bytes = 64 * 1024;
    service_ = std::make_unique<Service>(model_, cfg);
    service_->post("/boom", [](const httplib::Request&, httplib::Response&) {
      throw std::logic_error("secret detail");
    });
    port_ = service_->bind();
    thread_ = std::thread([] { service_->listen(); });
    service_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    service_->stop();
    thread_.join();
    service_.reset();
  }

  static httplib::Client client() {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

  static httplib::MultipartFormData file(const std::string& name, const Image& im) {
    return {name, png_bytes(im), name + ".png", "image/png"};
  }
  static httplib::MultipartFormData text(const std::string& name, const std::string& v) { return {name, v, "", ""}; }

  static inline std::shared_ptr<InferenceModel> model_;
  static inline std::unique_ptr<Service> service_;
  static inline std::thread thread_;
  static inline int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, Health) {
  auto c = client();
  const auto r = c.Get("/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto j = nlohmann::json::parse(r->body);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["model_resolution"], 16);
  EXPECT_EQ(j["n_attr"], kSynthAttrCount);
}

TEST_F(ServiceTest, Attributes) {
  auto c = client();
  const auto r = c.Get("/attributes");
  ASSERT_TRUE(r);
  EXPECT_EQ(nlohmann::json::parse(r->body).get<std::vector<std::string>>(), synth_attribute_names());
}

TEST_F(ServiceTest, EncodeMatchesLibrary) {
  auto c = client();
  const Image x = synth_image(1, 20, 200);
  const auto r = c.Post("/encode", httplib::MultipartFormDataItems{file("image", x)});
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  const auto j = nlohmann::json::parse(r->body);
  const auto e = encode_full(*model_, x);
  EXPECT_EQ(LatentBundle::from_json(j["bundle"]), e.bundle);
  EXPECT_EQ(j["c_star"].get<std::vector<float>>(), e.c_star);
}

TEST_F(ServiceTest, SwapWithSameImageIsReconstruction) {
  auto c = client();
  const Image x = synth_image(2, 100, 300);
  const auto r = c.Post("/swap", httplib::MultipartFormDataItems{file("source", x), file("target", x)});
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200) << r->body;
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
  const auto enc = c.Post("/encode", httplib::MultipartFormDataItems{file("image", x)});
  const auto bundle = LatentBundle::from_json(nlohmann::json::parse(enc->body)["bundle"]);
  EXPECT_EQ(r->body, png_bytes(compose(*model_, bundle)));
  EXPECT_FALSE(r->has_header(kWarningHeader));
}

TEST_F(ServiceTest, SwapGdUsesMaskOrWarns) {
  auto c = client();
  const auto src = synth_sample(3, 10, 190, 16), tgt = synth_sample(4, 250, 70, 16);
  const Image xs = quantize8(src.x), xt = quantize8(tgt.x);
  const BinaryMask mask = stored_face_mask(tgt);
  const auto with_mask = c.Post("/swap", httplib::MultipartFormDataItems{
                                             file("source", xs), file("target", xt), text("gd", "true"),
                                             {"mask", png_bytes(mask.to_image()), "mask.png", "image/png"}});
  ASSERT_TRUE(with_mask);
  ASSERT_EQ(with_mask->status, 200) << with_mask->body;
  // mask PNG is gray 0/1 -> decoded to [-1, 1 - 2/255]; recover via the same threshold the service uses
  Image mimg = decode_png(png_bytes(mask.to_image()));
  const auto want = swap_gd(*model_, xs, xt, BinaryMask::threshold(luma01(mimg)));
  EXPECT_EQ(with_mask->body, png_bytes(want.image));

  const auto no_mask =
      c.Post("/swap", httplib::MultipartFormDataItems{file("source", xs), file("target", xt), text("gd", "true")});
  ASSERT_TRUE(no_mask);
  EXPECT_EQ(no_mask->status, 200);
  EXPECT_NE(no_mask->get_header_value(kWarningHeader).find("empty face mask"), std::string::npos);
  EXPECT_EQ(no_mask->body, png_bytes(swap(*model_, xs, xt)));
}

TEST_F(ServiceTest, EditSampleInterpolateMatchLibrary) {
  auto c = client();
  const Image a = synth_image(5, 40, 160), b = synth_image(6, 220, 320);

  const auto edit = c.Post("/edit", httplib::MultipartFormDataItems{file("image", a),
                                                                    text("deltas", R"({"face_hue_2": 1.0})"),
                                                                    text("region", "face")});
  ASSERT_TRUE(edit);
  ASSERT_EQ(edit->status, 200) << edit->body;
  EXPECT_EQ(edit->body, png_bytes(edit_attributes(*model_, a, {{"face_hue_2", 1.f}}, Region::Face).image));

  const auto sample = c.Post("/sample", httplib::MultipartFormDataItems{file("image", a), text("region", "hair"),
                                                                        text("seed", "7")});
  ASSERT_TRUE(sample);
  ASSERT_EQ(sample->status, 200) << sample->body;
  EXPECT_EQ(sample->body, png_bytes(sample_parts(*model_, a, Region::Hair, 7)));

  const auto interp = c.Post("/interpolate", httplib::MultipartFormDataItems{file("image1", a), file("image2", b),
                                                                             text("t", "0.25"), text("region", "both")});
  ASSERT_TRUE(interp);
  ASSERT_EQ(interp->status, 200) << interp->body;
  EXPECT_EQ(interp->body, png_bytes(interpolate(*model_, a, b, 0.25, Region::Both)));
}

TEST_F(ServiceTest, ResizesUnlessStrict) {
  auto c = client();
  const Image big = synth_image(7, 0, 180, 32);
  const auto loose = c.Post("/swap", httplib::MultipartFormDataItems{file("source", big), file("target", big)});
  ASSERT_TRUE(loose);
  EXPECT_EQ(loose->status, 200);
  EXPECT_NE(loose->get_header_value(kWarningHeader).find("resized source from 32x32 to 16x16"), std::string::npos);
  const Image small = resize_bilinear(decode_png(png_bytes(big)), 16, 16);
  EXPECT_EQ(loose->body, png_bytes(swap(*model_, small, small)));

  const auto strict = c.Post(
      "/swap", httplib::MultipartFormDataItems{file("source", big), file("target", big), text("strict", "true")});
  ASSERT_TRUE(strict);
  EXPECT_EQ(strict->status, 422);
}

TEST_F(ServiceTest, MalformedInputIs400) {
  auto c = client();
  const Image x = synth_image(8, 0, 0);
  auto status = [&](const char* path, httplib::MultipartFormDataItems items) {
    const auto r = c.Post(path, items);
    return r ? r->status : -1;
  };
  EXPECT_EQ(status("/swap", {file("source", x)}), 400);
  EXPECT_EQ(status("/encode", {{"image", "not a png", "x.png", "image/png"}}), 400);
  EXPECT_EQ(status("/edit", {file("image", x), text("deltas", "{oops")}), 400);
  EXPECT_EQ(status("/edit", {file("image", x), text("deltas", R"({"no_such": 1})")}), 400);
  EXPECT_EQ(status("/edit", {file("image", x), text("deltas", R"({"face_hue_0": 1})"), text("region", "ear")}), 400);
  EXPECT_EQ(status("/sample", {file("image", x), text("region", "both")}), 400);
  EXPECT_EQ(status("/sample", {file("image", x), text("region", "face"), text("seed", "-3")}), 400);
  EXPECT_EQ(status("/interpolate", {file("image1", x), file("image2", x), text("t", "2")}), 400);
  EXPECT_EQ(status("/interpolate", {file("image1", x), file("image2", x), text("t", "abc")}), 400);
  EXPECT_EQ(status("/swap", {file("source", x), file("target", x), text("gd", "maybe")}), 400);
}

TEST_F(ServiceTest, OversizeIs413) {
  auto c = client();
  std::string junk(70 * 1024, 'x');
  const auto r = c.Post("/encode", httplib::MultipartFormDataItems{{"image", junk, "x.png", "image/png"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 413);
  std::string huge(4u << 20, 'x');
  const auto r2 = c.Post("/encode", httplib::MultipartFormDataItems{{"image", huge, "x.png", "image/png"}});
  ASSERT_TRUE(r2);
  EXPECT_EQ(r2->status, 413);
}

TEST_F(ServiceTest, InternalErrorsAreOpaque) {
  auto c = client();
  const auto r = c.Post("/boom", "", "text/plain");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 500);
  const auto j = nlohmann::json::parse(r->body);
  EXPECT_EQ(j["error"], "internal error");
  EXPECT_EQ(j["id"].get<std::string>().size(), 16u);
  EXPECT_EQ(r->body.find("secret"), std::string::npos);
}

TEST_F(ServiceTest, IdenticalRequestsGiveIdenticalBytes) {
  auto c = client();
  const Image a = synth_image(9, 30, 130), b = synth_image(10, 230, 330);
  const httplib::MultipartFormDataItems items{file("source", a), file("target", b)};
  const auto r1 = c.Post("/swap", items), r2 = c.Post("/swap", items);
  ASSERT_TRUE(r1 && r2);
  EXPECT_EQ(r1->body, r2->body);
}

TEST_F(ServiceTest, HundredConcurrentSwapsMatchSerial) {
  constexpr int kN = 100;
  std::vector<Image> srcs, tgts;
  std::vector<std::string> serial;
  for (int i = 0; i < kN; ++i) {
    srcs.push_back(synth_image(100 + i, 3.6 * i, 200 + 1.5 * i));
    tgts.push_back(synth_image(300 + i, 360 - 3.6 * i, 10 + 2.0 * i));
    serial.push_back(png_bytes(swap(*model_, srcs.back(), tgts.back())));
  }
  std::vector<std::future<std::pair<int, std::string>>> futs;
  for (int i = 0; i < kN; ++i)
    futs.push_back(std::async(std::launch::async, [&, i] {
      auto c = client();
      const auto r = c.Post("/swap", httplib::MultipartFormDataItems{file("source", srcs[static_cast<std::size_t>(i)]),
                                                                     file("target", tgts[static_cast<std::size_t>(i)])});
      return r ? std::make_pair(r->status, r->body) : std::make_pair(-1, std::string());
    }));
  for (int i = 0; i < kN; ++i) {
    const auto [status, body] = futs[static_cast<std::size_t>(i)].get();
    EXPECT_EQ(status, 200) << i;
    EXPECT_EQ(body, serial[static_cast<std::size_t>(i)]) << i;
  }
}
