#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "bst/error.hpp"
#include "bst/resmlp.hpp"

namespace bst {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, std::span<const nn::Param> params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  io::write_pod<std::uint32_t>(os, kVersion);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    io::write_array<float>(os, p.value.data());
  }
  if (!os) throw IoError("write failed for " + path);
}

std::vector<nn::Param> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path + ": not a checkpoint (bad magic)");
  }
  const auto version = io::read_pod<std::uint32_t>(is, "checkpoint version");
  if (version != kVersion) throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = io::read_pod<std::uint32_t>(is, "tensor count");
  std::vector<nn::Param> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = io::read_pod<std::uint32_t>(is, "name length");
    if (name_len > 4096) throw FormatError(path + ": implausible name length");
    std::string name(name_len, '\0');
    if (name_len && !is.read(name.data(), name_len)) throw FormatError(path + ": truncated name");
    const auto rank = io::read_pod<std::uint32_t>(is, "rank");
    if (rank == 0 || rank > 4) throw FormatError(path + ": tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const auto d = io::read_pod<std::uint32_t>(is, "extent");
      if (d == 0) throw FormatError(path + ": tensor '" + name + "' has a zero extent");
      shape.push_back(d);
    }
    auto data = io::read_array<float>(is, shape_numel(shape), "tensor data");
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void restore_checkpoint(const std::string& path, std::span<nn::Param> params) {
  auto loaded = load_checkpoint(path);
  if (loaded.size() != params.size()) {
    throw FormatError(path + ": holds " + std::to_string(loaded.size()) + " tensors, model has " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    bool found = false;
    for (auto& l : loaded) {
      if (l.name != p.name) continue;
      if (l.value.shape() != p.value.shape()) {
        throw FormatError(path + ": shape mismatch for '" + p.name + "': " + shape_to_string(l.value.shape()) +
                          " vs " + shape_to_string(p.value.shape()));
      }
      p.value = std::move(l.value);
      found = true;
      break;
    }
    if (!found) throw FormatError(path + ": missing tensor '" + p.name + "'");
  }
}

}  // namespace bst
