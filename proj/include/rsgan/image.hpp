#pragma once

// Images are Tensor<float> laid out C x H x W with values in [-1, 1].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rsgan/tensor.hpp"

namespace rsgan {

using Image = Tensor<float>;

inline Image make_image(int channels, int height, int width, float fill = 0.f) {
  return Image({channels, height, width}, fill);
}

inline int channels(const Image& im) { return im.shape.at(0); }
inline int height(const Image& im) { return im.shape.at(1); }
inline int width(const Image& im) { return im.shape.at(2); }

inline float& px(Image& im, int c, int y, int x) {
  return im.data[(static_cast<std::size_t>(c) * height(im) + y) * width(im) + x];
}
inline float px(const Image& im, int c, int y, int x) {
  return im.data[(static_cast<std::size_t>(c) * height(im) + y) * width(im) + x];
}

/// Exactly-binary mask of the same spatial size as its image.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }

  std::size_t area() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }

  BinaryMask inverted() const {
    BinaryMask m = *this;
    for (auto& b : m.bits) b = b ? 0 : 1;
    return m;
  }

  /// Single-channel float image with 0/1 values.
  Image to_image() const {
    Image im = make_image(1, height, width);
    for (std::size_t i = 0; i < bits.size(); ++i) im.data[i] = bits[i];
    return im;
  }

  static BinaryMask threshold(const Image& im, float level = 0.5f) {
    BinaryMask m(width_of(im), height_of(im));
    for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = im.data[i] >= level ? 1 : 0;
    return m;
  }

  bool operator==(const BinaryMask&) const = default;

 private:
  static int width_of(const Image& im) { return im.shape.at(2); }
  static int height_of(const Image& im) { return im.shape.at(1); }
};

/// Copies the window [left, left+w) x [top, top+h). The window must lie inside.
inline Image crop(const Image& im, int left, int top, int w, int h) {
  if (left < 0 || top < 0 || left + w > width(im) || top + h > height(im))
    throw ShapeError("crop window outside image");
  Image out = make_image(channels(im), h, w);
  for (int c = 0; c < channels(im); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) px(out, c, y, x) = px(im, c, top + y, left + x);
  return out;
}

inline BinaryMask crop(const BinaryMask& m, int left, int top, int w, int h) {
  if (left < 0 || top < 0 || left + w > m.width || top + h > m.height)
    throw ShapeError("crop window outside mask");
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(x, y, m.at(left + x, top + y));
  return out;
}

/// Bilinear resize with half-pixel centers and edge clamping.
inline Image resize_bilinear(const Image& im, int out_h, int out_w) {
  const int h = height(im), w = width(im);
  Image out = make_image(channels(im), out_h, out_w);
  const double sy = double(h) / out_h, sx = double(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float ty = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float tx = static_cast<float>(fx - x0);
      for (int c = 0; c < channels(im); ++c) {
        const float top = px(im, c, y0, x0) * (1 - tx) + px(im, c, y0, x1) * tx;
        const float bot = px(im, c, y1, x0) * (1 - tx) + px(im, c, y1, x1) * tx;
        px(out, c, y, x) = top * (1 - ty) + bot * ty;
      }
    }
  }
  return out;
}

/// Nearest-neighbour resize followed by re-thresholding at 0.5.
inline BinaryMask resize_nearest(const BinaryMask& m, int out_w, int out_h) {
  BinaryMask out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const int sy = std::min(m.height - 1, static_cast<int>((y + 0.5) * m.height / out_h));
    for (int x = 0; x < out_w; ++x) {
      const int sx = std::min(m.width - 1, static_cast<int>((x + 0.5) * m.width / out_w));
      out.set(x, y, m.at(sx, sy) >= 0.5 ? 1 : 0);
    }
  }
  return out;
}

/// Multiplies every channel by the mask; masked-out pixels become black (-1).
inline Image apply_mask(const Image& im, const BinaryMask& m) {
  if (m.width != width(im) || m.height != height(im)) throw ShapeError("apply_mask: size mismatch");
  Image out = im;
  for (int c = 0; c < channels(im); ++c)
    for (int y = 0; y < height(im); ++y)
      for (int x = 0; x < width(im); ++x)
        if (!m.at(x, y)) px(out, c, y, x) = -1.f;
  return out;
}

// ---------------------------------------------------------------------------
// Colour

struct Rgb {
  double r, g, b;  // [0, 1]
};

inline Rgb hsv_to_rgb(double hue_deg, double s, double v) {
  const double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
  const double c = v * s;
  const double x = c * (1 - std::abs(std::fmod(h, 2.0) - 1));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {r + m, g + m, b + m};
}

/// Hue in degrees [0, 360) and chroma of an RGB triple in [0, 1].
inline std::pair<double, double> hue_chroma(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  if (c <= 0) return {0.0, 0.0};
  double h;
  if (mx == r)
    h = std::fmod((g - b) / c, 6.0);
  else if (mx == g)
    h = (b - r) / c + 2.0;
  else
    h = (r - g) / c + 4.0;
  h *= 60.0;
  if (h < 0) h += 360.0;
  return {h, c};
}

/// Signed smallest difference a - b on the hue circle, in (-180, 180].
inline double hue_difference(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

/// Chroma-weighted circular mean hue of the RGB pixels where `mask` is set.
/// Returns NaN when the region carries no chroma.
inline double mean_hue(const Image& im, const BinaryMask& mask) {
  double sx = 0, sy = 0;
  for (int y = 0; y < height(im); ++y)
    for (int x = 0; x < width(im); ++x) {
      if (!mask.at(x, y)) continue;
      auto [h, c] = hue_chroma((px(im, 0, y, x) + 1) / 2, (px(im, 1, y, x) + 1) / 2,
                               (px(im, 2, y, x) + 1) / 2);
      const double rad = h * std::numbers::pi / 180.0;
      sx += c * std::cos(rad);
      sy += c * std::sin(rad);
    }
  if (sx == 0 && sy == 0) return std::nan("");
  double h = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
  return h < 0 ? h + 360.0 : h;
}

/// BT.601 luma of a 3-channel [-1,1] image, mapped to [0, 1].
inline Image luma01(const Image& im) {
  Image out = make_image(1, height(im), width(im));
  if (channels(im) == 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (im.data[i] + 1.f) / 2.f;
    return out;
  }
  const std::size_t plane = out.size();
  for (std::size_t i = 0; i < plane; ++i) {
    const double r = (im.data[i] + 1.0) / 2.0;
    const double g = (im.data[plane + i] + 1.0) / 2.0;
    const double b = (im.data[2 * plane + i] + 1.0) / 2.0;
    out.data[i] = static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
  }
  return out;
}

/// Rounds pixel values onto the 8-bit grid (what a PNG round trip produces).
inline Image quantize8(const Image& im) {
  Image out = im;
  for (auto& v : out.data) {
    const long q = std::lround(std::clamp((v + 1.0f) * 127.5f, 0.f, 255.f));
    v = static_cast<float>(q) / 127.5f - 1.f;
  }
  return out;
}

}  // namespace rsgan
