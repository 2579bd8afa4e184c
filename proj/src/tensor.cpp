#include "bst/tensor.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "bst/error.hpp"
#include "bst/parallel.hpp"

namespace bst {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 4) {
    throw DimensionError("tensor rank must be in [1, 4], got " + std::to_string(shape.size()));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be >= 1, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_to_string(shape_));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank()));
  }
  return shape_[axis];
}

float& Tensor::at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
float Tensor::at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
float& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
float Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  check_shape(shape);
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = std::move(data_);
  shape_.clear();
  return out;
}

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }
std::size_t Tensor::rows() const { return shape_.empty() ? 0 : data_.size() / shape_.back(); }

// ---------------------------------------------------------------------------

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw InvalidArgument("uniform_index bound must be positive");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return draw % bound;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return Rng(z);
}

Tensor rng_normal(Rng& rng, Shape shape, float mean, float stddev) {
  if (!(stddev >= 0.0f)) throw InvalidArgument("rng_normal: stddev must be >= 0");
  Tensor out(std::move(shape));
  for (float& v : out.data()) {
    v = static_cast<float>(mean + stddev * rng.normal());
  }
  return out;
}

Tensor rng_uniform(Rng& rng, Shape shape, float low, float high) {
  Tensor out(std::move(shape));
  for (float& v : out.data()) {
    v = static_cast<float>(low + (high - low) * rng.uniform());
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor matmul_dense(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul_dense expects rank-2 operands, got " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul_dense inner extents differ: " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor c({m, n});
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* pc = c.data().data();
  parallel_for(m, k * n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      float* crow = pc + i * n;
      const float* arow = pa + i * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const float av = arow[kk];
        const float* brow = pb + kk * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
  return c;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() == 2) {
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
  }
  if (a.rank() == 3) {
    const std::size_t bsz = a.dim(0), m = a.dim(1), n = a.dim(2);
    Tensor out({bsz, n, m});
    for (std::size_t b = 0; b < bsz; ++b)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(b, j, i) = a.at(b, i, j);
    return out;
  }
  throw DimensionError("transpose2d expects rank 2 or 3, got " + std::to_string(a.rank()));
}

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0f;
  return out;
}

}  // namespace bst
