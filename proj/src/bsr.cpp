#include "bst/bsr.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "bst/error.hpp"

namespace bst {
namespace {

constexpr char kBsrMagic[4] = {'B', 'S', 'R', '1'};
constexpr std::uint32_t kBsrVersion = 1;

void check_block_shape(std::size_t rows, std::size_t cols, std::size_t br, std::size_t bc) {
  if (br == 0 || bc == 0) throw DimensionError("block shape must be positive");
  if (rows % br != 0 || cols % bc != 0) {
    std::ostringstream os;
    os << "block shape " << br << "x" << bc << " does not divide matrix " << rows << "x" << cols;
    throw DimensionError(os.str());
  }
}

const Tensor& require_matrix(const Tensor& dense) {
  if (dense.rank() != 2) {
    throw DimensionError("BSR encoding expects a rank-2 tensor, got " + shape_to_string(dense.shape()));
  }
  return dense;
}

bool block_has_nonzero(const Tensor& dense, std::size_t r0, std::size_t c0, std::size_t br, std::size_t bc) {
  const std::size_t cols = dense.dim(1);
  const float* p = dense.data().data();
  for (std::size_t r = 0; r < br; ++r) {
    const float* row = p + (r0 + r) * cols + c0;
    for (std::size_t c = 0; c < bc; ++c) {
      if (row[c] != 0.0f) return true;
    }
  }
  return false;
}

template <typename Keep>
BsrMatrix encode_impl(const Tensor& dense, std::size_t br, std::size_t bc, Keep&& keep) {
  const std::size_t rows = dense.dim(0), cols = dense.dim(1);
  check_block_shape(rows, cols, br, bc);
  BsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.block_rows = br;
  m.block_cols = bc;
  const std::size_t nbr = rows / br, nbc = cols / bc;
  m.crow.reserve(nbr + 1);
  m.crow.push_back(0);
  const float* p = dense.data().data();
  for (std::size_t i = 0; i < nbr; ++i) {
    for (std::size_t j = 0; j < nbc; ++j) {
      if (!keep(i, j)) continue;
      m.col.push_back(static_cast<std::int32_t>(j));
      for (std::size_t r = 0; r < br; ++r) {
        const float* src = p + (i * br + r) * cols + j * bc;
        m.values.insert(m.values.end(), src, src + bc);
      }
    }
    m.crow.push_back(static_cast<std::int32_t>(m.col.size()));
  }
  return m;
}

}  // namespace

BsrMatrix bsr_encode(const Tensor& dense, std::size_t block_rows, std::size_t block_cols) {
  require_matrix(dense);
  return encode_impl(dense, block_rows, block_cols, [&](std::size_t i, std::size_t j) {
    return block_has_nonzero(dense, i * block_rows, j * block_cols, block_rows, block_cols);
  });
}

BsrMatrix bsr_encode_masked(const Tensor& dense, std::size_t block_rows, std::size_t block_cols,
                            std::span<const std::uint8_t> keep) {
  require_matrix(dense);
  check_block_shape(dense.dim(0), dense.dim(1), block_rows, block_cols);
  const std::size_t nbc = dense.dim(1) / block_cols;
  const std::size_t total = (dense.dim(0) / block_rows) * nbc;
  if (keep.size() != total) {
    throw DimensionError("keep mask has " + std::to_string(keep.size()) + " entries, expected " +
                         std::to_string(total));
  }
  return encode_impl(dense, block_rows, block_cols,
                     [&](std::size_t i, std::size_t j) { return keep[i * nbc + j] != 0; });
}

Tensor bsr_decode(const BsrMatrix& m) {
  bsr_require_valid(m);
  Tensor out({m.rows, m.cols});
  float* p = out.data().data();
  const std::size_t br = m.block_rows, bc = m.block_cols;
  for (std::size_t i = 0; i < m.block_row_count(); ++i) {
    for (auto slot = static_cast<std::size_t>(m.crow[i]); slot < static_cast<std::size_t>(m.crow[i + 1]);
         ++slot) {
      const std::size_t j = static_cast<std::size_t>(m.col[slot]);
      const float* src = m.values.data() + slot * br * bc;
      for (std::size_t r = 0; r < br; ++r) {
        float* dst = p + (i * br + r) * m.cols + j * bc;
        for (std::size_t c = 0; c < bc; ++c) dst[c] = src[r * bc + c];
      }
    }
  }
  return out;
}

std::size_t nnzb_in_row(const BsrMatrix& m, std::size_t block_row) {
  if (block_row >= m.block_row_count() || block_row + 1 >= m.crow.size()) {
    throw InvalidArgument("block row " + std::to_string(block_row) + " out of range (" +
                          std::to_string(m.block_row_count()) + " block rows)");
  }
  return static_cast<std::size_t>(m.crow[block_row + 1] - m.crow[block_row]);
}

std::vector<std::string> bsr_validate(const BsrMatrix& m) {
  std::vector<std::string> v;
  if (m.block_rows == 0 || m.block_cols == 0) {
    v.push_back("block shape not positive");
    return v;
  }
  if (m.rows % m.block_rows != 0) v.push_back("block_rows does not divide rows");
  if (m.cols % m.block_cols != 0) v.push_back("block_cols does not divide cols");
  const std::size_t nbr = m.rows / m.block_rows;
  const std::size_t nbc = m.cols / m.block_cols;
  if (m.crow.size() != nbr + 1) {
    v.push_back("crow length " + std::to_string(m.crow.size()) + " != block rows + 1 (" +
                std::to_string(nbr + 1) + ")");
  }
  if (!m.crow.empty() && m.crow.front() != 0) v.push_back("crow[0] != 0");
  bool monotone = true;
  for (std::size_t i = 1; i < m.crow.size(); ++i) {
    if (m.crow[i] < m.crow[i - 1]) monotone = false;
  }
  if (!monotone) v.push_back("crow non-monotone");
  if (!m.crow.empty() && static_cast<std::size_t>(std::max<std::int32_t>(m.crow.back(), 0)) != m.col.size()) {
    v.push_back("crow[last] != length(col)");
  }
  bool in_range = true;
  for (std::int32_t c : m.col) {
    if (c < 0 || static_cast<std::size_t>(c) >= nbc) in_range = false;
  }
  if (!in_range) v.push_back("col index out of range");
  if (monotone && !m.crow.empty() && m.crow.front() == 0 &&
      static_cast<std::size_t>(std::max<std::int32_t>(m.crow.back(), 0)) <= m.col.size()) {
    bool increasing = true;
    for (std::size_t i = 0; i + 1 < m.crow.size(); ++i) {
      for (auto s = static_cast<std::size_t>(m.crow[i]) + 1; s < static_cast<std::size_t>(m.crow[i + 1]); ++s) {
        if (m.col[s] <= m.col[s - 1]) increasing = false;
      }
    }
    if (!increasing) v.push_back("col not strictly increasing");
  }
  if (m.values.size() != m.col.size() * m.block_rows * m.block_cols) {
    v.push_back("values length " + std::to_string(m.values.size()) + " != nnzb*br*bc (" +
                std::to_string(m.col.size() * m.block_rows * m.block_cols) + ")");
  }
  return v;
}

void bsr_require_valid(const BsrMatrix& m) {
  auto violations = bsr_validate(m);
  if (violations.empty()) return;
  std::string msg = "invalid BSR matrix:";
  for (const auto& s : violations) msg += " [" + s + "]";
  throw FormatError(msg);
}

// --- serialization -----------------------------------------------------------

void bsr_write(std::ostream& os, const BsrMatrix& m) {
  bsr_require_valid(m);
  os.write(kBsrMagic, sizeof(kBsrMagic));
  io::write_pod<std::uint32_t>(os, kBsrVersion);
  io::write_pod<std::uint64_t>(os, m.rows);
  io::write_pod<std::uint64_t>(os, m.cols);
  io::write_pod<std::uint64_t>(os, m.block_rows);
  io::write_pod<std::uint64_t>(os, m.block_cols);
  io::write_pod<std::uint64_t>(os, m.nnzb());
  io::write_array<std::int32_t>(os, m.crow);
  io::write_array<std::int32_t>(os, m.col);
  io::write_array<float>(os, m.values);
  if (!os) throw IoError("failed writing BSR container");
}

BsrMatrix bsr_read(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kBsrMagic, 4) != 0) {
    throw FormatError("not a BSR container (bad magic)");
  }
  auto version = io::read_pod<std::uint32_t>(is, "version");
  if (version != kBsrVersion) throw FormatError("unsupported BSR container version " + std::to_string(version));
  BsrMatrix m;
  m.rows = io::read_pod<std::uint64_t>(is, "rows");
  m.cols = io::read_pod<std::uint64_t>(is, "cols");
  m.block_rows = io::read_pod<std::uint64_t>(is, "block_rows");
  m.block_cols = io::read_pod<std::uint64_t>(is, "block_cols");
  auto nnzb = io::read_pod<std::uint64_t>(is, "nnzb");
  if (m.block_rows == 0 || m.block_cols == 0 || m.rows % m.block_rows != 0 || m.cols % m.block_cols != 0) {
    throw FormatError("BSR container has inconsistent block shape");
  }
  if (nnzb > (m.rows / m.block_rows) * (m.cols / m.block_cols)) {
    throw FormatError("BSR container nnzb exceeds block count");
  }
  m.crow = io::read_array<std::int32_t>(is, m.rows / m.block_rows + 1, "crow");
  m.col = io::read_array<std::int32_t>(is, nnzb, "col");
  m.values = io::read_array<float>(is, nnzb * m.block_rows * m.block_cols, "values");
  bsr_require_valid(m);
  return m;
}

void bsr_save(const std::string& path, const BsrMatrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  bsr_write(os, m);
}

BsrMatrix bsr_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return bsr_read(is);
}

// --- compression accounting --------------------------------------------------

std::size_t pruned_block_count(double sparsity, std::size_t n) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    throw InvalidArgument("sparsity must be in [0, 1], got " + std::to_string(sparsity));
  }
  // The epsilon absorbs binary representation error of decimal sparsities
  // (0.35 * 10 evaluates to 3.4999999999999996 but means 3.5).
  auto k = static_cast<std::size_t>(std::floor(sparsity * static_cast<double>(n) + 0.5 + 1e-9));
  return std::min(k, n);
}

CompressionReport compression_report(std::size_t rows, std::size_t cols, std::size_t block_rows,
                                     std::size_t block_cols, double sparsity, std::size_t value_unit_bytes,
                                     std::size_t index_unit_bytes) {
  check_block_shape(rows, cols, block_rows, block_cols);
  const std::size_t total_blocks = (rows / block_rows) * (cols / block_cols);
  const std::size_t pruned = pruned_block_count(sparsity, total_blocks);
  CompressionReport r;
  r.sparsity = sparsity;
  r.stored_blocks = total_blocks - pruned;
  r.realized_sparsity = static_cast<double>(pruned) / static_cast<double>(total_blocks);
  r.dense_bytes = rows * cols * value_unit_bytes;
  r.value_bytes = r.stored_blocks * block_rows * block_cols * value_unit_bytes;
  r.index_bytes = (rows / block_rows + 1 + r.stored_blocks) * index_unit_bytes;
  r.total_bytes = r.value_bytes + r.index_bytes;
  const double dense = static_cast<double>(r.dense_bytes);
  r.overhead_fraction = static_cast<double>(r.index_bytes) / dense;
  r.excess_over_ideal = static_cast<double>(r.total_bytes) / dense - (1.0 - sparsity);
  return r;
}

double closed_form_overhead(std::size_t rows, std::size_t cols, std::size_t block_rows, std::size_t block_cols,
                            double sparsity) {
  check_block_shape(rows, cols, block_rows, block_cols);
  const double r = static_cast<double>(rows), c = static_cast<double>(cols);
  return (1.0 - sparsity) / static_cast<double>(block_rows * block_cols) +
         (r / static_cast<double>(block_rows) + 1.0) / (r * c);
}

}  // namespace bst
