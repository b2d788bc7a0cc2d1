#pragma once

// Gradient-domain compositing: inside the mask, solve the discrete Poisson
// equation whose guidance field is the gradient of `source`, with Dirichlet
// values taken from `target` on the mask boundary. Matrix-free conjugate
// gradient on the 5-point Laplacian, one solve per channel.

#include <cmath>
#include <vector>

#include "rsgan/image.hpp"

namespace rsgan {

struct PoissonOptions {
  double tolerance = 1e-6;  // relative residual ||b - Ax|| / ||b||
  int max_iterations = 10000;
};

struct PoissonResult {
  Image image;
  int iterations = 0;     // largest count over channels
  double residual = 0;    // largest final relative residual over channels
  bool converged = true;
};

namespace poisson_detail {

struct System {
  int w = 0, h = 0;
  std::vector<int> index;                // pixel -> unknown, or -1
  std::vector<std::pair<int, int>> pix;  // unknown -> (x, y)
  std::vector<int> degree;               // in-image neighbour count
};

inline System build(const BinaryMask& mask) {
  System s;
  s.w = mask.width;
  s.h = mask.height;
  s.index.assign(static_cast<std::size_t>(s.w) * s.h, -1);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x)
      if (mask.at(x, y)) {
        s.index[static_cast<std::size_t>(y) * s.w + x] = static_cast<int>(s.pix.size());
        s.pix.emplace_back(x, y);
        s.degree.push_back((x > 0) + (x + 1 < s.w) + (y > 0) + (y + 1 < s.h));
      }
  return s;
}

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

inline void apply(const System& s, const std::vector<double>& v, std::vector<double>& out) {
  for (std::size_t k = 0; k < s.pix.size(); ++k) {
    const auto [x, y] = s.pix[k];
    double acc = s.degree[k] * v[k];
    for (int d = 0; d < 4; ++d) {
      const int nx = x + kDx[d], ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= s.w || ny >= s.h) continue;
      const int j = s.index[static_cast<std::size_t>(ny) * s.w + nx];
      if (j >= 0) acc -= v[static_cast<std::size_t>(j)];
    }
    out[k] = acc;
  }
}

}  // namespace poisson_detail

inline PoissonResult poisson_blend(const Image& source, const Image& target, const BinaryMask& mask,
                                   const PoissonOptions& opt = {}) {
  using namespace poisson_detail;
  require_shape(source.shape, target.shape, "poisson_blend");
  if (mask.width != width(target) || mask.height != height(target))
    throw ShapeError("poisson_blend: mask size does not match the images");
  const System s = build(mask);
  const std::size_t n = s.pix.size();
  PoissonResult res{target};
  if (n == 0) return res;

  std::vector<double> b(n), x(n), r(n), p(n), ap(n);
  for (int c = 0; c < channels(target); ++c) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto [px0, py0] = s.pix[k];
      double rhs = 0;
      for (int d = 0; d < 4; ++d) {
        const int nx = px0 + kDx[d], ny = py0 + kDy[d];
        if (nx < 0 || ny < 0 || nx >= s.w || ny >= s.h) continue;
        rhs += double(px(source, c, py0, px0)) - px(source, c, ny, nx);
        if (s.index[static_cast<std::size_t>(ny) * s.w + nx] < 0) rhs += px(target, c, ny, nx);
      }
      b[k] = rhs;
      x[k] = px(target, c, py0, px0);  // start from the target
    }
    apply(s, x, ap);
    double bnorm = 0, rr = 0;
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = b[k] - ap[k];
      p[k] = r[k];
      bnorm += b[k] * b[k];
      rr += r[k] * r[k];
    }
    bnorm = std::sqrt(bnorm);
    const double stop = opt.tolerance * (bnorm > 0 ? bnorm : 1.0);
    int it = 0;
    while (std::sqrt(rr) > stop && it < opt.max_iterations) {
      apply(s, p, ap);
      double pap = 0;
      for (std::size_t k = 0; k < n; ++k) pap += p[k] * ap[k];
      const double alpha = rr / pap;
      double rr_new = 0;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
        rr_new += r[k] * r[k];
      }
      const double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
      ++it;
    }
    const double rel = std::sqrt(rr) / (bnorm > 0 ? bnorm : 1.0);
    res.iterations = std::max(res.iterations, it);
    res.residual = std::max(res.residual, rel);
    res.converged = res.converged && std::sqrt(rr) <= stop;
    for (std::size_t k = 0; k < n; ++k) {
      const auto [px0, py0] = s.pix[k];
      px(res.image, c, py0, px0) = static_cast<float>(x[k]);
    }
  }
  return res;
}

}  // namespace rsgan
