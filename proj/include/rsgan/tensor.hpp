#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsgan {

/// Tensor and gradient storage. Aligned to Eigen's packet size so vectorized
/// kernels take the same code path (and summation order) for every
/// allocation; plain malloc alignment would make results depend on heap
/// addresses.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Raised when a tensor, image, or network block receives inputs whose
/// dimensions disagree with the configuration.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense row-major tensor. Batched images are laid out N x C x H x W.
template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_numel(shape), fill) {}
  Tensor(Shape s, Buffer<T> d) : shape(std::move(s)), data(std::move(d)) { check(); }
  Tensor(Shape s, const std::vector<T>& d) : shape(std::move(s)), data(d.begin(), d.end()) { check(); }
  Tensor(Shape s, std::initializer_list<T> d) : shape(std::move(s)), data(d) { check(); }

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }

  /// Contiguous view of sample `n` along the leading axis.
  std::span<const T> row(int n) const {
    const std::size_t stride = size() / static_cast<std::size_t>(shape.at(0));
    return std::span<const T>(data).subspan(static_cast<std::size_t>(n) * stride, stride);
  }
  std::span<T> row(int n) {
    const std::size_t stride = size() / static_cast<std::size_t>(shape.at(0));
    return std::span<T>(data).subspan(static_cast<std::size_t>(n) * stride, stride);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check() const {
    if (data.size() != shape_numel(shape))
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }
};

inline void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want)
    throw ShapeError(std::string(what) + ": expected shape " + shape_str(want) + ", got " +
                     shape_str(got));
}

/// Stacks equally-shaped tensors along a new leading axis.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack: no items");
  Shape s = items[0].shape;
  for (const auto& t : items) require_shape(t.shape, s, "stack");
  Shape out_shape{static_cast<int>(items.size())};
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  Tensor<T> out(out_shape);
  std::size_t off = 0;
  for (const auto& t : items) {
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += t.size();
  }
  return out;
}

/// Extracts sample `n` of a batched tensor, dropping the leading axis.
template <typename T>
Tensor<T> unstack(const Tensor<T>& batch, int n) {
  Shape s(batch.shape.begin() + 1, batch.shape.end());
  auto r = batch.row(n);
  return Tensor<T>(s, Buffer<T>(r.begin(), r.end()));
}

}  // namespace rsgan
