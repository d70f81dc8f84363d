#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace ada {

/// Dense rank-4 shape in NCHW order. Vectors (logits, latent rows) use h = w = 1.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t sample_size() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool operator==(const Shape&) const = default;

  std::string str() const;
};

/// Storage aligned to a cache line. Vectorized reductions peel a different
/// number of leading elements at different alignments, so unaligned storage
/// would make sums depend on the allocation address.
template <typename T>
struct CacheAlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  CacheAlignedAllocator() = default;
  template <typename U>
  CacheAlignedAllocator(const CacheAlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const CacheAlignedAllocator<U>&) const noexcept { return true; }
};

/// Owning NCHW tensor of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  std::span<double> sample(int n) {
    return {data_.data() + static_cast<std::size_t>(n) * shape_.sample_size(),
            shape_.sample_size()};
  }
  std::span<const double> sample(int n) const {
    return {data_.data() + static_cast<std::size_t>(n) * shape_.sample_size(),
            shape_.sample_size()};
  }

  void fill(double v);
  /// Reinterprets the same storage under another shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

 private:
  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_{};
  std::vector<double, CacheAlignedAllocator<double>> data_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Copies samples [begin, end) into a new tensor.
Tensor slice_samples(const Tensor& t, int begin, int end);

/// Selects samples by index.
Tensor gather_samples(const Tensor& t, std::span<const int> indices);

/// Concatenates along the channel axis (inputs share n, h, w).
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Splits a channel-concatenated tensor back into its leading `first_channels` part and the rest.
void split_channels(const Tensor& joined, int first_channels, Tensor& first, Tensor& rest);

}  // namespace ada
