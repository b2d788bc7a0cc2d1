#pragma once

// Face/hair region extraction for 178 x 218 portraits.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgan/image.hpp"

namespace rsgan {

/// A record that cannot be turned into a training sample (bad geometry,
/// degenerate landmarks, provider failure). build_dataset skips these.
class RejectedRecord : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input image or mask does not have the raw portrait geometry.
class GeometryError : public RejectedRecord {
 public:
  using RejectedRecord::RejectedRecord;
};

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

inline constexpr int kRawWidth = 178;
inline constexpr int kRawHeight = 218;
inline constexpr double kHullStretchX = 1.3;
inline constexpr double kHullStretchY = 1.4;

struct CropWindow {
  int left, top, width, height;
  bool operator==(const CropWindow&) const = default;
};

inline constexpr CropWindow kFaceWindow{30, 70, 118, 118};
inline constexpr CropWindow kHairWindow{0, 20, 178, 178};

/// 68-point landmark set in the usual iBUG ordering. Indices 27..67 (nose,
/// eyes, mouth) form the 41-point face subset.
struct Landmarks68 {
  std::array<Point, 68> points{};

  static constexpr int kFaceBegin = 27;
  static constexpr int kFaceCount = 41;

  static constexpr std::array<int, 41> face_subset_indices() {
    std::array<int, 41> idx{};
    for (int i = 0; i < kFaceCount; ++i) idx[static_cast<std::size_t>(i)] = kFaceBegin + i;
    return idx;
  }

  std::vector<Point> face_subset() const {
    std::vector<Point> out;
    for (int i : face_subset_indices()) out.push_back(points[static_cast<std::size_t>(i)]);
    return out;
  }

  /// Throws RejectedRecord if any point lies outside [0,w) x [0,h).
  void validate(int w, int h) const {
    for (const auto& p : points)
      if (!(p.x >= 0 && p.x < w && p.y >= 0 && p.y < h) || !std::isfinite(p.x) || !std::isfinite(p.y))
        throw RejectedRecord("landmark outside image bounds");
  }
};

/// Convex hull (counter-clockwise in image coordinates), monotone chain.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(const std::vector<Point>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

inline double polygon_perimeter(const std::vector<Point>& poly) {
  double l = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    l += std::hypot(q.x - p.x, q.y - p.y);
  }
  return l;
}

/// Area centroid of a simple polygon.
inline Point polygon_centroid(const std::vector<Point>& poly) {
  double a = 0, cx = 0, cy = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    const double w = p.x * q.y - q.x * p.y;
    a += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  return {cx / (3 * a), cy / (3 * a)};
}

/// Scales a polygon about its area centroid.
inline std::vector<Point> stretch_about_centroid(const std::vector<Point>& poly, double sx, double sy) {
  const Point c = polygon_centroid(poly);
  std::vector<Point> out;
  out.reserve(poly.size());
  for (const auto& p : poly) out.push_back({c.x + sx * (p.x - c.x), c.y + sy * (p.y - c.y)});
  return out;
}

/// Even-odd fill sampled at integer pixel coordinates. Boundaries are
/// half-open: left/top edges are inside, right/bottom edges outside.
inline BinaryMask rasterize_polygon(const std::vector<Point>& poly, int w, int h) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    std::vector<double> xs;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& a = poly[i];
      const auto& b = poly[(i + 1) % poly.size()];
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(xs[k + 1])) - 1);
      for (int x = x0; x <= x1; ++x) m.set(x, y, true);
    }
  }
  return m;
}

/// The face-subset hull, before stretching. Throws RejectedRecord on a
/// degenerate (collinear or coincident) point set.
inline std::vector<Point> face_hull(const Landmarks68& lm) {
  auto hull = convex_hull(lm.face_subset());
  if (hull.size() < 3 || polygon_area(hull) < 1e-9)
    throw RejectedRecord("degenerate face hull (landmarks collinear or coincident)");
  return hull;
}

/// Face mask: the hull of the 41 face landmarks, stretched 1.3x horizontally
/// and 1.4x vertically about its centroid, rasterized at image size.
inline BinaryMask compute_face_mask(const Landmarks68& lm, int image_w, int image_h) {
  lm.validate(image_w, image_h);
  auto hull = face_hull(lm);
  return rasterize_polygon(stretch_about_centroid(hull, kHullStretchX, kHullStretchY), image_w, image_h);
}

/// Training-resolution views of one portrait.
struct RegionCrops {
  Image x;         // full portrait, hair window
  Image x_f;       // face-only image, face window
  Image x_h;       // face-removed image, hair window
  BinaryMask m_bg; // background mask, hair window
  CropWindow face_window;
  CropWindow hair_window;
};

/// Cuts a 178 x 218 portrait into the face and hair training views and resizes
/// them to out_size x out_size. Outside-region pixels are set to black.
inline RegionCrops crop_regions(const Image& image, const BinaryMask& face_mask,
                                const BinaryMask& bg_mask, int out_size) {
  if (width(image) != kRawWidth || height(image) != kRawHeight || channels(image) != 3)
    throw GeometryError("expected a 3 x 218 x 178 portrait, got " + shape_str(image.shape));
  for (const BinaryMask* m : {&face_mask, &bg_mask})
    if (m->width != kRawWidth || m->height != kRawHeight)
      throw GeometryError("mask size does not match the 178 x 218 portrait");
  if (out_size <= 0) throw GeometryError("output size must be positive");

  const auto& fw = kFaceWindow;
  const auto& hw = kHairWindow;
  RegionCrops r;
  r.face_window = fw;
  r.hair_window = hw;
  r.x = resize_bilinear(crop(image, hw.left, hw.top, hw.width, hw.height), out_size, out_size);
  r.x_f = resize_bilinear(crop(apply_mask(image, face_mask), fw.left, fw.top, fw.width, fw.height),
                          out_size, out_size);
  r.x_h = resize_bilinear(
      crop(apply_mask(image, face_mask.inverted()), hw.left, hw.top, hw.width, hw.height), out_size,
      out_size);
  r.m_bg = resize_nearest(crop(bg_mask, hw.left, hw.top, hw.width, hw.height), out_size, out_size);
  return r;
}

}  // namespace rsgan
