#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bst/tensor.hpp"

namespace bst {

struct ImageGeometry {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t pixels() const { return channels * height * width; }
};

/// Images [N x C x H x W] plus one label per image.
struct Dataset {
  Tensor images;
  std::vector<std::int32_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  ImageGeometry geometry() const;
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
  std::vector<float> channel_mean;  // train-split statistics applied to both
  std::vector<float> channel_std;
};

struct LabeledBatch {
  Tensor images;
  std::vector<std::int32_t> labels;
  std::vector<std::size_t> indices;  // positions in the source dataset
};

// --- CIFAR binary format ----------------------------------------------------

/// Raw records: pixels are channel-planar bytes, labels already chosen
/// (fine label for CIFAR-100).
struct RawImages {
  ImageGeometry geometry{3, 32, 32};
  std::vector<std::uint8_t> pixels;
  std::vector<std::int32_t> labels;
  std::size_t size() const { return labels.size(); }
};

/// label_bytes = 1 for CIFAR-10, 2 for CIFAR-100 (coarse, fine).
RawImages read_cifar_file(const std::string& path, std::size_t label_bytes = 1, std::size_t num_classes = 10);
/// Writes records in the same layout. For label_bytes = 2 the coarse byte is 0.
void write_cifar_file(const std::string& path, const RawImages& raw, std::size_t label_bytes = 1);

/// dir holds data_batch_{1..5}.bin and test_batch.bin.
DatasetSplit load_cifar10(const std::string& dir);
/// dir holds train.bin and test.bin.
DatasetSplit load_cifar100(const std::string& dir);

/// Converts bytes to floats in [0, 1] and normalizes both splits with the
/// per-channel statistics of train.
DatasetSplit normalize_split(const RawImages& train, const RawImages& test, std::size_t num_classes);

// --- synthetic ----------------------------------------------------------------

struct SynthOptions {
  std::size_t blobs_per_class = 3;
  float noise = 0.5f;  // stddev of per-pixel Gaussian noise; prototypes have unit scale
};

/// Class-conditional images built from Gaussian blob prototypes plus pixel
/// noise. Labels cycle i % classes. Values are not normalized.
Dataset synth_patches(std::uint64_t seed, std::size_t n, std::size_t classes, ImageGeometry geometry,
                      SynthOptions options = {});

/// Generates n_train + n_test samples from one prototype set, splits them
/// in order and normalizes with train statistics.
DatasetSplit synth_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t classes,
                         ImageGeometry geometry, SynthOptions options = {});

/// Per-channel mean and std over a dataset's images.
void channel_stats(const Tensor& images, std::vector<float>& mean, std::vector<float>& stddev);
void apply_normalization(Tensor& images, std::span<const float> mean, std::span<const float> stddev);

// --- batching -----------------------------------------------------------------

/// Drop-last, shuffled per (seed, epoch).
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);

  std::size_t batch_count() const { return order_.size() / batch_size_; }
  bool has_next() const { return next_ < batch_count(); }
  LabeledBatch next();
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
};

BatchIterator batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch);

/// Gathers the given items in order (no shuffling); used for evaluation.
LabeledBatch gather(const Dataset& data, std::size_t begin, std::size_t end);

}  // namespace bst
