#pragma once

// Procedural two-factor portraits: a coloured elliptical face in front of a
// coloured hair blob on a gray background. Face hue and hair hue are the only
// semantic factors, which makes face/hair disentanglement directly measurable.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rsgan/geometry.hpp"
#include "rsgan/sample.hpp"

namespace rsgan {

inline constexpr int kHueBins = 6;
inline constexpr int kSynthAttrCount = 2 * kHueBins;

/// Attribute names for the synthetic set: face_hue_0..5 then hair_hue_0..5,
/// bin k covering hues [60k, 60k+60).
inline std::vector<std::string> synth_attribute_names() {
  std::vector<std::string> names;
  for (const char* region : {"face", "hair"})
    for (int k = 0; k < kHueBins; ++k) names.push_back(std::string(region) + "_hue_" + std::to_string(k));
  return names;
}

inline int hue_bin(double hue) {
  const double h = std::fmod(std::fmod(hue, 360.0) + 360.0, 360.0);
  return std::min(kHueBins - 1, static_cast<int>(h / (360.0 / kHueBins)));
}

/// Centre of hue bin k in degrees.
inline double hue_bin_center(int k) { return (k + 0.5) * 360.0 / kHueBins; }

inline constexpr double kFaceSaturation = 0.75, kFaceValue = 0.85;
inline constexpr double kHairSaturation = 0.8, kHairValue = 0.6;
inline constexpr double kBackgroundGray = 0.45;

/// Jittered layout in the 178 x 218 portrait frame.
struct SynthGeometry {
  double face_cx, face_cy, face_ax, face_ay;
  double hair_cx, hair_cy, hair_ax, hair_ay;
};

inline constexpr double kCenterJitter = 3.0;
inline constexpr double kScaleJitter = 0.08;

inline SynthGeometry synth_geometry(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 0x5EEDull);
  std::uniform_real_distribution<double> shift(-kCenterJitter, kCenterJitter);
  std::uniform_real_distribution<double> scale(1 - kScaleJitter, 1 + kScaleJitter);
  SynthGeometry g{};
  g.hair_cx = 89 + shift(rng);
  g.hair_cy = 112 + shift(rng);
  g.hair_ax = 62 * scale(rng);
  g.hair_ay = 72 * scale(rng);
  g.face_cx = 89 + shift(rng);
  g.face_cy = 128 + shift(rng);
  g.face_ax = 34 * scale(rng);
  g.face_ay = 44 * scale(rng);
  return g;
}

namespace synth_detail {

inline bool in_ellipse(double x, double y, double cx, double cy, double ax, double ay) {
  const double dx = (x - cx) / ax, dy = (y - cy) / ay;
  return dx * dx + dy * dy < 1.0;
}

enum class Part { Background, Hair, Face, Feature };

inline Part classify(const SynthGeometry& g, double x, double y) {
  if (in_ellipse(x, y, g.face_cx, g.face_cy, g.face_ax, g.face_ay)) {
    // eyes and mouth, dark features inside the face
    const double ex = 0.4 * g.face_ax, ey = -0.2 * g.face_ay, er = 0.12 * g.face_ax;
    if (in_ellipse(x, y, g.face_cx - ex, g.face_cy + ey, er, er) ||
        in_ellipse(x, y, g.face_cx + ex, g.face_cy + ey, er, er) ||
        in_ellipse(x, y, g.face_cx, g.face_cy + 0.45 * g.face_ay, 0.35 * g.face_ax, 0.07 * g.face_ay))
      return Part::Feature;
    return Part::Face;
  }
  if (in_ellipse(x, y, g.hair_cx, g.hair_cy, g.hair_ax, g.hair_ay)) return Part::Hair;
  return Part::Background;
}

inline Rgb part_color(Part p, double face_hue, double hair_hue) {
  switch (p) {
    case Part::Face: return hsv_to_rgb(face_hue, kFaceSaturation, kFaceValue);
    case Part::Feature: return {0.12, 0.1, 0.1};
    case Part::Hair: return hsv_to_rgb(hair_hue, kHairSaturation, kHairValue);
    default: return {kBackgroundGray, kBackgroundGray, kBackgroundGray};
  }
}

// Maps output pixel coordinates of a crop window to portrait coordinates.
struct WindowMap {
  double left, top, scale;
  double x(double u) const { return left + u * scale; }
  double y(double v) const { return top + v * scale; }
};

}  // namespace synth_detail

/// Renders one sample analytically. Each training view samples its crop
/// window directly (2 x 2 supersampling for colours, pixel centres for masks),
/// so no raster resize is involved and the result is a pure function of the
/// arguments.
inline RegionSample synth_sample(std::uint64_t seed, double face_hue, double hair_hue, int s) {
  using namespace synth_detail;
  if (s < 16) throw ShapeError("synth_sample: resolution must be at least 16");
  const SynthGeometry g = synth_geometry(seed);
  const WindowMap hair_win{double(kHairWindow.left), double(kHairWindow.top), double(kHairWindow.width) / s};
  const WindowMap face_win{double(kFaceWindow.left), double(kFaceWindow.top), double(kFaceWindow.width) / s};

  RegionSample r;
  r.id = "synth_" + std::to_string(seed);
  r.x = make_image(3, s, s);
  r.x_f = make_image(3, s, s);
  r.x_h = make_image(3, s, s);
  r.m_bg = BinaryMask(s, s);

  constexpr double kSub[2] = {0.25, 0.75};
  auto render = [&](Image& out, const WindowMap& win, int keep) {
    // keep: 0 = everything, 1 = face only, 2 = face removed
    for (int v = 0; v < s; ++v)
      for (int u = 0; u < s; ++u) {
        double acc[3] = {0, 0, 0};
        for (double sy : kSub)
          for (double sx : kSub) {
            const Part p = classify(g, win.x(u + sx), win.y(v + sy));
            const bool face = p == Part::Face || p == Part::Feature;
            Rgb c{0, 0, 0};
            if (keep == 0 || (keep == 1 && face) || (keep == 2 && !face)) c = part_color(p, face_hue, hair_hue);
            acc[0] += c.r;
            acc[1] += c.g;
            acc[2] += c.b;
          }
        for (int k = 0; k < 3; ++k) px(out, k, v, u) = static_cast<float>(acc[k] / 4 * 2 - 1);
      }
  };
  render(r.x, hair_win, 0);
  render(r.x_f, face_win, 1);
  render(r.x_h, hair_win, 2);
  for (int v = 0; v < s; ++v)
    for (int u = 0; u < s; ++u)
      r.m_bg.set(u, v, classify(g, hair_win.x(u + 0.5), hair_win.y(v + 0.5)) == Part::Background);

  r.c.assign(kSynthAttrCount, 0.f);
  r.c[static_cast<std::size_t>(hue_bin(face_hue))] = 1.f;
  r.c[static_cast<std::size_t>(kHueBins + hue_bin(hair_hue))] = 1.f;
  return r;
}

/// Full 178 x 218 portrait plus its true face and background masks; used to
/// exercise the real crop pipeline and the Poisson compositor.
struct SynthPortrait {
  Image image;
  BinaryMask face_mask;
  BinaryMask bg_mask;
};

inline SynthPortrait synth_portrait(std::uint64_t seed, double face_hue, double hair_hue) {
  using namespace synth_detail;
  const SynthGeometry g = synth_geometry(seed);
  SynthPortrait p{make_image(3, kRawHeight, kRawWidth), BinaryMask(kRawWidth, kRawHeight),
                  BinaryMask(kRawWidth, kRawHeight)};
  for (int y = 0; y < kRawHeight; ++y)
    for (int x = 0; x < kRawWidth; ++x) {
      const Part part = classify(g, x + 0.5, y + 0.5);
      const Rgb c = part_color(part, face_hue, hair_hue);
      px(p.image, 0, y, x) = static_cast<float>(c.r * 2 - 1);
      px(p.image, 1, y, x) = static_cast<float>(c.g * 2 - 1);
      px(p.image, 2, y, x) = static_cast<float>(c.b * 2 - 1);
      p.face_mask.set(x, y, part == Part::Face || part == Part::Feature);
      p.bg_mask.set(x, y, part == Part::Background);
    }
  return p;
}

/// Region probes at training resolution for measuring hue in generated
/// images. They are conservative: a probe pixel's whole footprint belongs to
/// the face (resp. hair) for every admissible jitter of the layout, and face
/// probes avoid the eye and mouth bands.
struct HueProbes {
  BinaryMask face;
  BinaryMask hair;
};

namespace synth_detail {

inline bool surely_face(double x, double y) {
  const double j = kCenterJitter, lo = 1 - kScaleJitter, hi = 1 + kScaleJitter;
  if (!in_ellipse(std::abs(x - 89) + j, std::abs(y - 128) + j, 0, 0, 34 * lo, 44 * lo)) return false;
  const double eye_top = 128 - j - 0.2 * 44 * hi - 0.12 * 34 * hi - 1;
  const double eye_bottom = 128 + j - 0.2 * 44 * lo + 0.12 * 34 * hi + 1;
  const double mouth_top = 128 - j + 0.45 * 44 * lo - 0.07 * 44 * hi - 1;
  const double mouth_bottom = 128 + j + 0.45 * 44 * hi + 0.07 * 44 * hi + 1;
  return !(y > eye_top && y < eye_bottom) && !(y > mouth_top && y < mouth_bottom);
}

inline bool surely_hair(double x, double y) {
  const double j = kCenterJitter, lo = 1 - kScaleJitter, hi = 1 + kScaleJitter;
  if (!in_ellipse(std::abs(x - 89) + j, std::abs(y - 112) + j, 0, 0, 62 * lo, 72 * lo)) return false;
  const double fx = std::max(0.0, std::abs(x - 89) - j), fy = std::max(0.0, std::abs(y - 128) - j);
  const double dx = fx / (34 * hi), dy = fy / (44 * hi);
  return dx * dx + dy * dy > 1.0;
}

}  // namespace synth_detail

inline HueProbes synth_probes(int s) {
  using namespace synth_detail;
  const WindowMap win{double(kHairWindow.left), double(kHairWindow.top), double(kHairWindow.width) / s};
  HueProbes p{BinaryMask(s, s), BinaryMask(s, s)};
  for (int v = 0; v < s; ++v)
    for (int u = 0; u < s; ++u) {
      bool face = true, hair = true;
      for (int cy = 0; cy <= 1; ++cy)
        for (int cx = 0; cx <= 1; ++cx) {
          const double x = win.x(u + cx), y = win.y(v + cy);
          face = face && surely_face(x, y);
          hair = hair && surely_hair(x, y);
        }
      p.face.set(u, v, face);
      p.hair.set(u, v, hair);
    }
  return p;
}

/// Hues drawn uniformly on [0, 360).
inline double sample_hue(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 360.0)(rng);
}

}  // namespace rsgan
