#pragma once

// Image distances for the consistency benchmark: mean absolute error,
// multi-scale SSIM, and identity-embedding distance.

#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rsgan/image.hpp"
#include "rsgan/png_io.hpp"

namespace rsgan {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean absolute pixel difference on the [0,1] scale.
inline double abs_error(const Image& a, const Image& b) {
  require_shape(b.shape, a.shape, "abs_error");
  if (a.size() == 0) throw MetricError("abs_error: empty images");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(double(a.data[i]) - b.data[i]);
  return acc / (2.0 * static_cast<double>(a.size()));
}

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct MsSsimOptions {
  int levels = 5;
  bool luma = true;  // false: per RGB channel, averaged
};

/// Levels actually used for an image of this size: the largest L <= `levels`
/// with min(h, w) >= 2^(L-1) * 11.
inline int ms_ssim_levels(int h, int w, int levels = 5) {
  if (levels < 1 || levels > 5) throw MetricError("ms_ssim: levels must lie in [1,5]");
  const int m = std::min(h, w);
  int l = levels;
  while (l > 0 && m < (1 << (l - 1)) * 11) --l;
  if (l == 0) throw MetricError("ms_ssim: images smaller than the 11x11 window");
  return l;
}

/// Canonical weights over the first L scales, renormalized to sum to 1.
inline std::vector<double> ms_ssim_weights(int levels) {
  std::vector<double> w(kMsSsimWeights.begin(), kMsSsimWeights.begin() + levels);
  double s = 0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
  return w;
}

namespace ssim_detail {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline std::array<double, 11> gauss_window() {
  std::array<double, 11> g{};
  double s = 0;
  for (int i = 0; i < 11; ++i) {
    const double c = i - 5.0;
    g[static_cast<std::size_t>(i)] = std::exp(-0.5 * c * c / (1.5 * 1.5));
    s += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable Gaussian filter, valid region only.
inline Plane filter(const Plane& p) {
  static const auto g = gauss_window();
  Plane tmp{p.h, p.w - 10, {}}, out{p.h - 10, p.w - 10, {}};
  tmp.v.resize(static_cast<std::size_t>(tmp.h) * tmp.w);
  for (int y = 0; y < tmp.h; ++y)
    for (int x = 0; x < tmp.w; ++x) {
      double a = 0;
      for (int k = 0; k < 11; ++k) a += g[static_cast<std::size_t>(k)] * p.at(y, x + k);
      tmp.v[static_cast<std::size_t>(y) * tmp.w + x] = a;
    }
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double a = 0;
      for (int k = 0; k < 11; ++k) a += g[static_cast<std::size_t>(k)] * tmp.at(y + k, x);
      out.v[static_cast<std::size_t>(y) * out.w + x] = a;
    }
  return out;
}

inline Plane product(const Plane& a, const Plane& b) {
  Plane o{a.h, a.w, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) o.v[i] = a.v[i] * b.v[i];
  return o;
}

// 2x2 average pooling; odd sizes are first padded by repeating the last row/column.
inline Plane downsample(const Plane& p) {
  const int h = (p.h + 1) / 2, w = (p.w + 1) / 2;
  Plane o{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
  auto get = [&](int y, int x) { return p.at(std::min(y, p.h - 1), std::min(x, p.w - 1)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      o.v[static_cast<std::size_t>(y) * w + x] =
          (get(2 * y, 2 * x) + get(2 * y, 2 * x + 1) + get(2 * y + 1, 2 * x) + get(2 * y + 1, 2 * x + 1)) / 4;
  return o;
}

struct Scale {
  double ssim, cs;
};

inline Scale ssim_scale(const Plane& a, const Plane& b) {
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const Plane ma = filter(a), mb = filter(b);
  const Plane sab = filter(product(a, b)), saa = filter(product(a, a)), sbb = filter(product(b, b));
  double s = 0, cs = 0;
  for (std::size_t i = 0; i < ma.v.size(); ++i) {
    const double num0 = 2 * ma.v[i] * mb.v[i], den0 = ma.v[i] * ma.v[i] + mb.v[i] * mb.v[i];
    const double lum = (num0 + c1) / (den0 + c1);
    const double c = (2 * sab.v[i] - num0 + c2) / (saa.v[i] + sbb.v[i] - den0 + c2);
    s += lum * c;
    cs += c;
  }
  const auto n = static_cast<double>(ma.v.size());
  return {s / n, cs / n};
}

inline double ms_ssim_plane(Plane a, Plane b, const std::vector<double>& w) {
  double out = 1;
  const int levels = static_cast<int>(w.size());
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      a = downsample(a);
      b = downsample(b);
    }
    const Scale sc = ssim_scale(a, b);
    const double v = l + 1 == levels ? sc.ssim : sc.cs;
    out *= std::pow(std::max(0.0, v), w[static_cast<std::size_t>(l)]);
  }
  return out;
}

inline Plane plane(const Image& im, int c) {
  Plane p{height(im), width(im), std::vector<double>(static_cast<std::size_t>(height(im)) * width(im))};
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) p.v[static_cast<std::size_t>(y) * p.w + x] = px(im, c, y, x);
  return p;
}

}  // namespace ssim_detail

/// Multi-scale SSIM of two [-1,1] images, evaluated on [0,1] intensities
/// (luma by default). Per-scale contrast terms are clamped at zero.
inline double ms_ssim(const Image& a, const Image& b, const MsSsimOptions& opt = {}) {
  using namespace ssim_detail;
  require_shape(b.shape, a.shape, "ms_ssim");
  if (a.rank() != 3 || (channels(a) != 1 && channels(a) != 3)) throw MetricError("ms_ssim: expected 1 or 3 channels");
  const auto w = ms_ssim_weights(ms_ssim_levels(height(a), width(a), opt.levels));
  if (opt.luma || channels(a) == 1) return ms_ssim_plane(plane(luma01(a), 0), plane(luma01(b), 0), w);
  double acc = 0;
  for (int c = 0; c < channels(a); ++c) {
    Plane pa = plane(a, c), pb = plane(b, c);
    for (auto& v : pa.v) v = (v + 1) / 2;
    for (auto& v : pb.v) v = (v + 1) / 2;
    acc += ms_ssim_plane(std::move(pa), std::move(pb), w);
  }
  return acc / channels(a);
}

// ---- identity embedding ----

class IdentityEmbedder {
 public:
  virtual ~IdentityEmbedder() = default;
  virtual std::vector<double> embed(const Image& im) const = 0;
  virtual std::string name() const = 0;
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw MetricError("embedding lengths differ");
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

inline double identity_distance(const Image& a, const Image& b, const IdentityEmbedder& e) {
  return squared_distance(e.embed(a), e.embed(b));
}

/// Mean colour plus a chroma-weighted 12-bin hue histogram. Enough to tell
/// synthetic identities apart; not a face recogniser.
class ToyColorEmbedder : public IdentityEmbedder {
 public:
  static constexpr int kBins = 12;

  std::vector<double> embed(const Image& im) const override {
    if (channels(im) != 3) throw MetricError("toy embedder expects RGB");
    std::vector<double> f(3 + kBins, 0.0);
    const int h = height(im), w = width(im);
    double mass = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double r = (px(im, 0, y, x) + 1) / 2, g = (px(im, 1, y, x) + 1) / 2, b = (px(im, 2, y, x) + 1) / 2;
        f[0] += r;
        f[1] += g;
        f[2] += b;
        const auto [hue, chroma] = hue_chroma(r, g, b);
        const int bin = std::min(kBins - 1, static_cast<int>(hue / (360.0 / kBins)));
        f[static_cast<std::size_t>(3 + bin)] += chroma;
        mass += chroma;
      }
    for (int c = 0; c < 3; ++c) f[static_cast<std::size_t>(c)] /= static_cast<double>(h) * w;
    if (mass > 0)
      for (int k = 0; k < kBins; ++k) f[static_cast<std::size_t>(3 + k)] /= mass;
    return f;
  }
  std::string name() const override { return "toy-color"; }
};

/// Runs `command <in.png> <out.json>` per image; the program must write a JSON
/// array of numbers. For plugging in a real face embedder.
class ExternalEmbedder : public IdentityEmbedder {
 public:
  explicit ExternalEmbedder(std::string command) : command_(std::move(command)) {
    if (command_.empty()) throw MetricError("external embedder: empty command");
  }

  std::vector<double> embed(const Image& im) const override {
    namespace fs = std::filesystem;
    static std::atomic<unsigned long> counter{0};
    const auto tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
    const fs::path in = fs::temp_directory_path() / ("rsgan_embed_" + tag + ".png");
    const fs::path out = fs::temp_directory_path() / ("rsgan_embed_" + tag + ".json");
    write_png(in, im);
    const std::string cmd = command_ + " '" + in.string() + "' '" + out.string() + "'";
    const int rc = std::system(cmd.c_str());
    std::error_code ec;
    fs::remove(in, ec);
    if (rc != 0) {
      fs::remove(out, ec);
      throw MetricError("external embedder exited with status " + std::to_string(rc));
    }
    std::ifstream f(out);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      fs::remove(out, ec);
      throw MetricError(std::string("external embedder output: ") + e.what());
    }
    fs::remove(out, ec);
    if (!j.is_array() || j.empty()) throw MetricError("external embedder must write a non-empty JSON array");
    return j.get<std::vector<double>>();
  }
  std::string name() const override { return "external:" + command_; }

 private:
  std::string command_;
};

}  // namespace rsgan
