#include "ada/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ada/errors.hpp"

namespace ada {

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), data_(values.begin(), values.end()) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor of shape " + shape_.str() + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!(other.shape_ == shape_)) {
    throw ShapeError("add: " + shape_.str() + " vs " + other.shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor slice_samples(const Tensor& t, int begin, int end) {
  const Shape s = t.shape();
  if (begin < 0 || end > s.n || begin > end) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + s.str());
  }
  Tensor out(Shape{end - begin, s.c, s.h, s.w});
  if (out.size() > 0) {
    std::memcpy(out.data(), t.data() + static_cast<std::size_t>(begin) * s.sample_size(),
                out.size() * sizeof(double));
  }
  return out;
}

Tensor gather_samples(const Tensor& t, std::span<const int> indices) {
  const Shape s = t.shape();
  Tensor out(Shape{static_cast<int>(indices.size()), s.c, s.h, s.w});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int src = indices[i];
    if (src < 0 || src >= s.n) throw ShapeError("gather index out of range");
    auto from = t.sample(src);
    std::copy(from.begin(), from.end(), out.sample(static_cast<int>(i)).begin());
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  for (int n = 0; n < sa.n; ++n) {
    auto dst = out.sample(n);
    auto pa = a.sample(n);
    auto pb = b.sample(n);
    std::copy(pa.begin(), pa.end(), dst.begin());
    std::copy(pb.begin(), pb.end(), dst.begin() + static_cast<std::ptrdiff_t>(pa.size()));
  }
  return out;
}

void split_channels(const Tensor& joined, int first_channels, Tensor& first, Tensor& rest) {
  const Shape s = joined.shape();
  if (first_channels < 0 || first_channels > s.c) throw ShapeError("split_channels: bad split");
  first = Tensor(Shape{s.n, first_channels, s.h, s.w});
  rest = Tensor(Shape{s.n, s.c - first_channels, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    auto src = joined.sample(n);
    auto f = first.sample(n);
    auto r = rest.sample(n);
    std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(f.size()), f.begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(f.size()), src.end(), r.begin());
  }
}

}  // namespace ada
