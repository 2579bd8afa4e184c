#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bst {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Row-major float32 array of rank 1..4. Last index varies fastest.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, 0.0f); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& storage() const noexcept { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t i, std::size_t j);
  float at(std::size_t i, std::size_t j) const;
  float& at(std::size_t i, std::size_t j, std::size_t k);
  float at(std::size_t i, std::size_t j, std::size_t k) const;

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  /// Row-major view of the tensor as [prod(leading), last].
  std::size_t rows() const;
  std::size_t cols() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence
/// is fixed by the C++ standard; uniform and normal variates are derived here
/// (53-bit mantissa uniforms, Box-Muller normals) rather than through the
/// implementation-defined <random> distributions, so a seed reproduces the
/// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);
  double normal();

  /// Child stream keyed by `stream`; independent of how much of this stream
  /// has been consumed.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

Tensor rng_normal(Rng& rng, Shape shape, float mean = 0.0f, float stddev = 1.0f);
Tensor rng_uniform(Rng& rng, Shape shape, float low, float high);

/// c[i,j] = sum_k a[i,k] * b[k,j], accumulated in float in ascending k.
Tensor matmul_dense(const Tensor& a, const Tensor& b);

/// Rank 2: swaps the two axes. Rank 3: swaps the last two axes per batch entry.
Tensor transpose2d(const Tensor& a);

Tensor identity(std::size_t n);

}  // namespace bst
