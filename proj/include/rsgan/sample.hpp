#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rsgan/image.hpp"

namespace rsgan {

/// Visual attributes relaxed to [0, 1].
using AttributeVector = std::vector<float>;

inline void validate_attributes(const AttributeVector& c, std::size_t n_attr) {
  if (c.size() != n_attr)
    throw ShapeError("attribute vector has " + std::to_string(c.size()) + " entries, expected " +
                     std::to_string(n_attr));
  for (float v : c)
    if (!(v >= 0.f && v <= 1.f)) throw ShapeError("attribute values must lie in [0,1]");
}

/// One training record at training resolution S.
struct RegionSample {
  std::string id;
  Image x;          // 3 x S x S, [-1,1]
  Image x_f;        // face region
  Image x_h;        // hair region, face masked out
  BinaryMask m_bg;  // S x S, 1 = background
  AttributeVector c;

  int resolution() const { return width(x); }

  void validate(int s) const {
    for (const Image* im : {&x, &x_f, &x_h})
      if (im->shape != Shape{3, s, s})
        throw ShapeError("sample " + id + ": image shape " + shape_str(im->shape) +
                         " does not match resolution " + std::to_string(s));
    if (m_bg.width != s || m_bg.height != s)
      throw ShapeError("sample " + id + ": background mask size mismatch");
  }
};

}  // namespace rsgan
