#include "bst/datasets.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "bst/error.hpp"

namespace bst {

ImageGeometry Dataset::geometry() const {
  if (images.rank() != 4) return {0, 0, 0};
  return {images.dim(1), images.dim(2), images.dim(3)};
}

// --- CIFAR ---------------------------------------------------------------------

RawImages read_cifar_file(const std::string& path, std::size_t label_bytes, std::size_t num_classes) {
  if (label_bytes != 1 && label_bytes != 2) throw InvalidArgument("label_bytes must be 1 or 2");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError(path + ": cannot open file (byte offset 0)");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  RawImages raw;
  const std::size_t px = raw.geometry.pixels();
  const std::size_t record = label_bytes + px;
  if (bytes.empty()) throw IngestionError(path + ": empty file (byte offset 0)");
  if (bytes.size() % record != 0) {
    const std::size_t offset = bytes.size() / record * record;
    throw IngestionError(path + ": truncated record at byte offset " + std::to_string(offset) + " (" +
                         std::to_string(bytes.size() - offset) + " of " + std::to_string(record) + " bytes)");
  }
  const std::size_t n = bytes.size() / record;
  raw.pixels.resize(n * px);
  raw.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * record;
    const std::uint8_t label = rec[label_bytes - 1];
    if (label >= num_classes) {
      throw IngestionError(path + ": label " + std::to_string(label) + " out of range at byte offset " +
                           std::to_string(i * record + label_bytes - 1));
    }
    raw.labels[i] = label;
    std::copy(rec + label_bytes, rec + record, raw.pixels.begin() + static_cast<std::ptrdiff_t>(i * px));
  }
  return raw;
}

void write_cifar_file(const std::string& path, const RawImages& raw, std::size_t label_bytes) {
  if (label_bytes != 1 && label_bytes != 2) throw InvalidArgument("label_bytes must be 1 or 2");
  const std::size_t px = raw.geometry.pixels();
  if (raw.pixels.size() != raw.labels.size() * px) throw DimensionError("pixel count does not match label count");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw.labels[i] < 0 || raw.labels[i] > 255) throw InvalidArgument("label does not fit in a byte");
    if (label_bytes == 2) os.put('\0');
    os.put(static_cast<char>(raw.labels[i]));
    os.write(reinterpret_cast<const char*>(raw.pixels.data() + i * px), static_cast<std::streamsize>(px));
  }
  if (!os) throw IoError("write failed for " + path);
}

namespace {

RawImages concat(std::vector<RawImages> parts) {
  RawImages out = std::move(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    out.pixels.insert(out.pixels.end(), parts[i].pixels.begin(), parts[i].pixels.end());
    out.labels.insert(out.labels.end(), parts[i].labels.begin(), parts[i].labels.end());
  }
  return out;
}

Dataset to_float(const RawImages& raw, std::size_t num_classes) {
  const auto& g = raw.geometry;
  Dataset d;
  d.images = Tensor({raw.size(), g.channels, g.height, g.width});
  auto out = d.images.data();
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) out[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
  d.labels = raw.labels;
  d.num_classes = num_classes;
  return d;
}

std::string join(const std::string& dir, const char* file) { return (std::filesystem::path(dir) / file).string(); }

}  // namespace

DatasetSplit normalize_split(const RawImages& train, const RawImages& test, std::size_t num_classes) {
  DatasetSplit s;
  s.train = to_float(train, num_classes);
  s.test = to_float(test, num_classes);
  channel_stats(s.train.images, s.channel_mean, s.channel_std);
  apply_normalization(s.train.images, s.channel_mean, s.channel_std);
  apply_normalization(s.test.images, s.channel_mean, s.channel_std);
  return s;
}

DatasetSplit load_cifar10(const std::string& dir) {
  std::vector<RawImages> parts;
  for (int i = 1; i <= 5; ++i) {
    parts.push_back(read_cifar_file(join(dir, ("data_batch_" + std::to_string(i) + ".bin").c_str()), 1, 10));
  }
  return normalize_split(concat(std::move(parts)), read_cifar_file(join(dir, "test_batch.bin"), 1, 10), 10);
}

DatasetSplit load_cifar100(const std::string& dir) {
  return normalize_split(read_cifar_file(join(dir, "train.bin"), 2, 100), read_cifar_file(join(dir, "test.bin"), 2, 100),
                         100);
}

// --- normalization -------------------------------------------------------------

void channel_stats(const Tensor& images, std::vector<float>& mean, std::vector<float>& stddev) {
  if (images.rank() != 4) throw DimensionError("channel_stats expects [N x C x H x W]");
  const std::size_t n = images.dim(0), c = images.dim(1), hw = images.dim(2) * images.dim(3);
  auto src = images.data();
  mean.assign(c, 0.0f);
  stddev.assign(c, 1.0f);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* p = src.data() + (i * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) {
        s += p[k];
        ss += static_cast<double>(p[k]) * p[k];
      }
    }
    const double cnt = static_cast<double>(n * hw);
    const double m = s / cnt;
    const double var = std::max(ss / cnt - m * m, 0.0);
    mean[ch] = static_cast<float>(m);
    stddev[ch] = var > 1e-12 ? static_cast<float>(std::sqrt(var)) : 1.0f;
  }
}

void apply_normalization(Tensor& images, std::span<const float> mean, std::span<const float> stddev) {
  if (images.rank() != 4 || mean.size() != images.dim(1) || stddev.size() != images.dim(1)) {
    throw DimensionError("normalization statistics do not match image channels");
  }
  const std::size_t n = images.dim(0), c = images.dim(1), hw = images.dim(2) * images.dim(3);
  auto dst = images.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* p = dst.data() + (i * c + ch) * hw;
      for (std::size_t k = 0; k < hw; ++k) p[k] = (p[k] - mean[ch]) / stddev[ch];
    }
}

// --- synthetic -------------------------------------------------------------------

namespace {

std::vector<Tensor> make_prototypes(Rng& rng, std::size_t classes, ImageGeometry g, const SynthOptions& opt) {
  std::vector<Tensor> protos;
  for (std::size_t cl = 0; cl < classes; ++cl) {
    Tensor p({g.channels, g.height, g.width});
    for (std::size_t blob = 0; blob < opt.blobs_per_class; ++blob) {
      const double cy = rng.uniform() * static_cast<double>(g.height);
      const double cx = rng.uniform() * static_cast<double>(g.width);
      const double sigma = (0.125 + 0.125 * rng.uniform()) * static_cast<double>(std::max(g.height, g.width));
      std::vector<double> amp(g.channels);
      for (auto& a : amp) a = rng.normal();
      for (std::size_t y = 0; y < g.height; ++y)
        for (std::size_t x = 0; x < g.width; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
          for (std::size_t ch = 0; ch < g.channels; ++ch) {
            p.at(ch, y, x) += static_cast<float>(amp[ch] * w);
          }
        }
    }
    // unit RMS
    double ss = 0.0;
    for (float v : p.data()) ss += static_cast<double>(v) * v;
    const double rms = std::sqrt(ss / static_cast<double>(p.numel()));
    if (rms > 0.0) {
      for (float& v : p.data()) v = static_cast<float>(v / rms);
    }
    protos.push_back(std::move(p));
  }
  return protos;
}

Dataset sample_from(Rng& rng, const std::vector<Tensor>& protos, std::size_t n, std::size_t first_index,
                    ImageGeometry g, const SynthOptions& opt) {
  const std::size_t classes = protos.size();
  Dataset d;
  d.num_classes = classes;
  d.images = Tensor({n, g.channels, g.height, g.width});
  d.labels.resize(n);
  const std::size_t px = g.pixels();
  auto out = d.images.data();
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<std::int32_t>((first_index + i) % classes);
    d.labels[i] = label;
    auto proto = protos[static_cast<std::size_t>(label)].data();
    const double scale = 0.8 + 0.4 * rng.uniform();
    float* dst = out.data() + i * px;
    for (std::size_t k = 0; k < px; ++k) {
      dst[k] = static_cast<float>(scale * proto[k] + opt.noise * rng.normal());
    }
  }
  return d;
}

void check_synth(std::size_t n, std::size_t classes, ImageGeometry g) {
  if (classes == 0) throw InvalidArgument("synth_patches: classes must be positive");
  if (n < classes) throw InvalidArgument("synth_patches: n must be >= classes");
  if (g.pixels() == 0) throw InvalidArgument("synth_patches: empty geometry");
}

}  // namespace

Dataset synth_patches(std::uint64_t seed, std::size_t n, std::size_t classes, ImageGeometry geometry,
                      SynthOptions options) {
  check_synth(n, classes, geometry);
  Rng proto_rng = Rng::derive(seed, 0);
  Rng sample_rng = Rng::derive(seed, 1);
  auto protos = make_prototypes(proto_rng, classes, geometry, options);
  return sample_from(sample_rng, protos, n, 0, geometry, options);
}

DatasetSplit synth_split(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t classes,
                         ImageGeometry geometry, SynthOptions options) {
  check_synth(n_train, classes, geometry);
  if (n_test == 0) throw InvalidArgument("synth_split: n_test must be positive");
  Rng proto_rng = Rng::derive(seed, 0);
  Rng sample_rng = Rng::derive(seed, 1);
  auto protos = make_prototypes(proto_rng, classes, geometry, options);
  DatasetSplit s;
  s.train = sample_from(sample_rng, protos, n_train, 0, geometry, options);
  s.test = sample_from(sample_rng, protos, n_test, n_train, geometry, options);
  channel_stats(s.train.images, s.channel_mean, s.channel_std);
  apply_normalization(s.train.images, s.channel_mean, s.channel_std);
  apply_normalization(s.test.images, s.channel_mean, s.channel_std);
  return s;
}

// --- batching ---------------------------------------------------------------------

BatchIterator::BatchIterator(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch)
    : data_(&data), batch_size_(batch_size) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (data.size() == 0) throw InvalidArgument("cannot batch an empty dataset");
  order_.resize(data.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng = Rng::derive(seed ^ 0x5348554646ull, epoch);
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng.uniform_index(i)]);
  }
}

LabeledBatch BatchIterator::next() {
  if (!has_next()) throw StateError("batch iterator exhausted");
  const auto g = data_->geometry();
  const std::size_t px = g.pixels();
  LabeledBatch b;
  b.images = Tensor({batch_size_, g.channels, g.height, g.width});
  b.labels.resize(batch_size_);
  b.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(next_ * batch_size_),
                   order_.begin() + static_cast<std::ptrdiff_t>((next_ + 1) * batch_size_));
  auto src = data_->images.data();
  auto dst = b.images.data();
  for (std::size_t i = 0; i < batch_size_; ++i) {
    const std::size_t idx = b.indices[i];
    std::copy_n(src.data() + idx * px, px, dst.data() + i * px);
    b.labels[i] = data_->labels[idx];
  }
  ++next_;
  return b;
}

BatchIterator batches(const Dataset& data, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch) {
  return BatchIterator(data, batch_size, seed, epoch);
}

LabeledBatch gather(const Dataset& data, std::size_t begin, std::size_t end) {
  if (begin >= end || end > data.size()) throw InvalidArgument("gather: bad range");
  const auto g = data.geometry();
  const std::size_t px = g.pixels(), n = end - begin;
  LabeledBatch b;
  b.images = Tensor({n, g.channels, g.height, g.width});
  std::copy_n(data.images.data().data() + begin * px, n * px, b.images.data().data());
  b.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  data.labels.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t i = begin; i < end; ++i) b.indices.push_back(i);
  return b;
}

}  // namespace bst
