#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "bst/datasets.hpp"
#include "bst/error.hpp"

using namespace bst;

namespace {

std::string tmp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

RawImages two_records() {
  RawImages raw;
  raw.labels = {7, 2};
  raw.pixels.resize(2 * 3072);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) raw.pixels[i] = static_cast<std::uint8_t>((i * 37 + 11) % 256);
  return raw;
}

// Softmax regression on flattened pixels, full-batch gradient descent.
double linear_probe_train_accuracy(const Dataset& d, int steps) {
  const std::size_t n = d.size(), f = d.images.numel() / n, k = d.num_classes;
  std::vector<double> w(k * f, 0.0), b(k, 0.0);
  const float* x = d.images.data().data();
  std::vector<double> logits(n * k);
  auto forward = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        double z = b[c];
        for (std::size_t j = 0; j < f; ++j) z += w[c * f + j] * x[i * f + j];
        logits[i * k + c] = z;
      }
  };
  const double lr = 0.5;
  for (int s = 0; s < steps; ++s) {
    forward();
    std::vector<double> gw(k * f, 0.0), gb(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = logits[i * k];
      for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits[i * k + c]);
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(logits[i * k + c] - mx);
      for (std::size_t c = 0; c < k; ++c) {
        double p = std::exp(logits[i * k + c] - mx) / z - (static_cast<std::int32_t>(c) == d.labels[i] ? 1.0 : 0.0);
        gb[c] += p / n;
        for (std::size_t j = 0; j < f; ++j) gw[c * f + j] += p * x[i * f + j] / static_cast<double>(n * f);
      }
    }
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * gw[j] * static_cast<double>(f) / 10.0;
    for (std::size_t c = 0; c < k; ++c) b[c] -= lr * gb[c];
  }
  forward();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) best = logits[i * k + c] > logits[i * k + best] ? c : best;
    correct += static_cast<std::int32_t>(best) == d.labels[i];
  }
  return double(correct) / double(n);
}

}  // namespace

TEST(Cifar, TwoRecordRoundTripBitExact) {
  const auto path = tmp("bst_cifar_two.bin");
  RawImages raw = two_records();
  write_cifar_file(path, raw, 1);
  EXPECT_EQ(std::filesystem::file_size(path), 2u * 3073u);
  RawImages back = read_cifar_file(path, 1, 10);
  EXPECT_EQ(back.labels, raw.labels);
  EXPECT_EQ(back.pixels, raw.pixels);
  EXPECT_LE(back.labels[0], 9);
  std::remove(path.c_str());
}

TEST(Cifar, HundredUsesFineLabel) {
  const auto path = tmp("bst_cifar100.bin");
  RawImages raw = two_records();
  raw.labels = {42, 99};
  write_cifar_file(path, raw, 2);
  EXPECT_EQ(std::filesystem::file_size(path), 2u * 3074u);
  {
    // set coarse labels to something else; reader must ignore them
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put(static_cast<char>(5));
    f.seekp(3074);
    f.put(static_cast<char>(6));
  }
  EXPECT_EQ(read_cifar_file(path, 2, 100).labels, (std::vector<std::int32_t>{42, 99}));
  std::remove(path.c_str());
}

TEST(Cifar, TruncatedFileReportsOffset) {
  const auto path = tmp("bst_cifar_trunc.bin");
  RawImages raw = two_records();
  write_cifar_file(path, raw, 1);
  std::filesystem::resize_file(path, 3073 + 100);
  try {
    read_cifar_file(path, 1, 10);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 3073"), std::string::npos) << e.what();
  }
  std::remove(path.c_str());
  EXPECT_THROW(read_cifar_file(path, 1, 10), IngestionError);
}

TEST(Cifar, LabelOutOfRange) {
  const auto path = tmp("bst_cifar_badlabel.bin");
  RawImages raw = two_records();
  raw.labels = {3, 12};
  write_cifar_file(path, raw, 1);
  EXPECT_THROW(read_cifar_file(path, 1, 10), IngestionError);
  std::remove(path.c_str());
}

TEST(Cifar, DirectoryLoaderNormalizesWithTrainStats) {
  const auto dir = std::filesystem::temp_directory_path() / "bst_cifar_dir";
  std::filesystem::create_directories(dir);
  RawImages raw = two_records();
  for (int i = 1; i <= 5; ++i) write_cifar_file((dir / ("data_batch_" + std::to_string(i) + ".bin")).string(), raw, 1);
  RawImages test = raw;
  for (auto& p : test.pixels) p = 255;
  write_cifar_file((dir / "test_batch.bin").string(), test, 1);
  DatasetSplit s = load_cifar10(dir.string());
  EXPECT_EQ(s.train.size(), 10u);
  EXPECT_EQ(s.test.size(), 2u);
  std::vector<float> mean, sd;
  channel_stats(s.train.images, mean, sd);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(mean[c], 0.0, 1e-5);
    EXPECT_NEAR(sd[c], 1.0, 1e-4);
  }
  // test split uses train statistics: constant 255 maps to (1 - mean) / std
  EXPECT_NEAR(s.test.images[0], (1.0f - s.channel_mean[0]) / s.channel_std[0], 1e-5);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_cifar10(dir.string()), IngestionError);
}

TEST(Synth, Deterministic) {
  ImageGeometry g{3, 8, 8};
  Dataset a = synth_patches(5, 40, 4, g), b = synth_patches(5, 40, 4, g), c = synth_patches(6, 40, 4, g);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.images, c.images);
}

TEST(Synth, SingleClassAllZeroLabels) {
  Dataset d = synth_patches(1, 10, 1, {1, 4, 4});
  for (auto l : d.labels) EXPECT_EQ(l, 0);
  EXPECT_THROW(synth_patches(1, 3, 5, {1, 4, 4}), InvalidArgument);
}

TEST(Synth, LinearProbeSeparates) {
  Dataset d = synth_patches(7, 500, 10, {3, 16, 16});
  EXPECT_GE(linear_probe_train_accuracy(d, 100), 0.95);
}

TEST(Synth, SplitNormalizedByTrain) {
  DatasetSplit s = synth_split(8, 200, 50, 5, {3, 8, 8});
  std::vector<float> mean, sd;
  channel_stats(s.train.images, mean, sd);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(mean[c], 0.0, 1e-4);
    EXPECT_NEAR(sd[c], 1.0, 1e-3);
  }
  EXPECT_EQ(s.test.size(), 50u);
  EXPECT_EQ(s.test.labels[0], 200 % 5);
}

TEST(Batches, WholeDatasetIsOneBatch) {
  Dataset d = synth_patches(9, 20, 4, {1, 4, 4});
  auto it = batches(d, 20, 1, 0);
  ASSERT_EQ(it.batch_count(), 1u);
  auto b = it.next();
  std::set<std::size_t> idx(b.indices.begin(), b.indices.end());
  EXPECT_EQ(idx.size(), 20u);
  EXPECT_FALSE(it.has_next());
  EXPECT_THROW(it.next(), StateError);
}

TEST(Batches, DeterministicPerSeedAndEpoch) {
  Dataset d = synth_patches(10, 50, 5, {1, 4, 4});
  EXPECT_EQ(batches(d, 8, 3, 2).order(), batches(d, 8, 3, 2).order());
  EXPECT_NE(batches(d, 8, 3, 2).order(), batches(d, 8, 3, 1).order());
  EXPECT_NE(batches(d, 8, 3, 2).order(), batches(d, 8, 4, 2).order());
}

TEST(Batches, CoverDatasetMinusTail) {
  Dataset d = synth_patches(11, 53, 5, {1, 4, 4});
  auto it = batches(d, 8, 1, 0);
  std::set<std::size_t> seen;
  std::size_t n = 0;
  while (it.has_next()) {
    auto b = it.next();
    ASSERT_EQ(b.labels.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_EQ(b.labels[i], d.labels[b.indices[i]]);
      seen.insert(b.indices[i]);
    }
    ++n;
  }
  EXPECT_EQ(n, 6u);
  EXPECT_EQ(seen.size(), 48u);
  std::set<std::size_t> tail(it.order().begin() + 48, it.order().end());
  for (auto i : tail) EXPECT_EQ(seen.count(i), 0u);
  EXPECT_EQ(seen.size() + tail.size(), 53u);
}

TEST(Batches, Errors) {
  Dataset d = synth_patches(12, 10, 2, {1, 4, 4});
  EXPECT_THROW(batches(d, 0, 0, 0), InvalidArgument);
  Dataset empty;
  EXPECT_THROW(batches(empty, 4, 0, 0), InvalidArgument);
}
