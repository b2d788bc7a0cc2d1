#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "rsgan/image.hpp"

namespace oracle {

// Independent oracle: the variational form. Minimise the sum over every
// image edge touching the mask of ((f_p - f_q) - (g_p - g_q))^2 with f fixed
// to the target outside the mask, solved as dense least squares.
inline rsgan::Image dense_poisson(const rsgan::Image& g, const rsgan::Image& t, const rsgan::BinaryMask& m) {
  const int w = m.width, h = m.height;
  std::vector<int> id(static_cast<std::size_t>(w) * h, -1);
  int n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m.at(x, y)) id[y * w + x] = n++;
  std::vector<std::array<int, 4>> edges;  // x0 y0 x1 y1
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w && (m.at(x, y) || m.at(x + 1, y))) edges.push_back({x, y, x + 1, y});
      if (y + 1 < h && (m.at(x, y) || m.at(x, y + 1))) edges.push_back({x, y, x, y + 1});
    }
  rsgan::Image out = t;
  for (int c = 0; c < rsgan::channels(t); ++c) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges.size()), n);
    Eigen::VectorXd d(static_cast<Eigen::Index>(edges.size()));
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [x0, y0, x1, y1] = edges[k];
      double rhs = double(rsgan::px(g, c, y0, x0)) - rsgan::px(g, c, y1, x1);
      const int i0 = id[y0 * w + x0], i1 = id[y1 * w + x1];
      if (i0 >= 0) e(k, i0) += 1; else rhs -= rsgan::px(t, c, y0, x0);
      if (i1 >= 0) e(k, i1) -= 1; else rhs += rsgan::px(t, c, y1, x1);
      d(k) = rhs;
    }
    const Eigen::VectorXd f = e.colPivHouseholderQr().solve(d);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (id[y * w + x] >= 0) rsgan::px(out, c, y, x) = static_cast<float>(f(id[y * w + x]));
  }
  return out;
}

}  // namespace oracle
