#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bst/tensor.hpp"

namespace bst {

/// Block Sparse Compressed Row matrix.
///
/// The logical dense matrix is rows x cols, tiled into block_rows x block_cols
/// blocks. crow[n+1] - crow[n] is the number of stored blocks in block row n,
/// col[crow[n] .. crow[n+1]) their block-column positions (strictly
/// increasing), and values holds the stored blocks back to back in the same
/// order, each block row-major.
struct BsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t block_rows = 1;
  std::size_t block_cols = 1;
  std::vector<std::int32_t> crow;
  std::vector<std::int32_t> col;
  std::vector<float> values;

  std::size_t block_row_count() const { return block_rows ? rows / block_rows : 0; }
  std::size_t block_col_count() const { return block_cols ? cols / block_cols : 0; }
  std::size_t block_size() const { return block_rows * block_cols; }
  std::size_t nnzb() const { return col.size(); }
  std::size_t total_blocks() const { return block_row_count() * block_col_count(); }

  /// Bytes of packed values (4 per float).
  std::size_t value_bytes() const { return values.size() * sizeof(float); }
  /// Bytes of crow + col (4 per index).
  std::size_t index_bytes() const { return (crow.size() + col.size()) * sizeof(std::int32_t); }
  std::size_t total_bytes() const { return value_bytes() + index_bytes(); }
  std::size_t dense_bytes() const { return rows * cols * sizeof(float); }

  std::span<const float> block_values(std::size_t slot) const {
    return std::span<const float>(values).subspan(slot * block_size(), block_size());
  }

  bool operator==(const BsrMatrix&) const = default;
};

/// Stores every block holding at least one nonzero element.
BsrMatrix bsr_encode(const Tensor& dense, std::size_t block_rows, std::size_t block_cols);

/// Stores exactly the blocks whose keep flag is set (row-major block order),
/// whether or not they contain nonzeros. keep.size() must equal the block count.
BsrMatrix bsr_encode_masked(const Tensor& dense, std::size_t block_rows, std::size_t block_cols,
                            std::span<const std::uint8_t> keep);

Tensor bsr_decode(const BsrMatrix& m);

std::size_t nnzb_in_row(const BsrMatrix& m, std::size_t block_row);

/// All invariant violations found, empty when the matrix is well formed.
std::vector<std::string> bsr_validate(const BsrMatrix& m);

/// Throws FormatError listing the violations.
void bsr_require_valid(const BsrMatrix& m);

/// Little-endian container, layout documented in docs/formats.md.
void bsr_write(std::ostream& os, const BsrMatrix& m);
BsrMatrix bsr_read(std::istream& is);
void bsr_save(const std::string& path, const BsrMatrix& m);
BsrMatrix bsr_load(const std::string& path);

// --- compression accounting --------------------------------------------------

struct CompressionReport {
  std::size_t dense_bytes = 0;
  std::size_t value_bytes = 0;
  std::size_t index_bytes = 0;
  std::size_t total_bytes = 0;
  /// Requested fraction of zero blocks.
  double sparsity = 0.0;
  /// Fraction of zero blocks after rounding the pruned count to whole blocks.
  double realized_sparsity = 0.0;
  std::size_t stored_blocks = 0;
  /// index_bytes / dense_bytes.
  double overhead_fraction = 0.0;
  /// total_bytes / dense_bytes - (1 - sparsity): extra memory relative to the
  /// ideal compressed size.
  double excess_over_ideal = 0.0;
};

/// Size of an R x C matrix whose round(s * N) lowest blocks (N = total block
/// count, round half up) are absent, stored as BSR.
CompressionReport compression_report(std::size_t rows, std::size_t cols, std::size_t block_rows,
                                     std::size_t block_cols, double sparsity,
                                     std::size_t value_unit_bytes = 4, std::size_t index_unit_bytes = 4);

/// Continuous-count index overhead (1-s)/(br*bc) + (R/br + 1)/(R*C), valid for
/// equal value and index units.
double closed_form_overhead(std::size_t rows, std::size_t cols, std::size_t block_rows,
                            std::size_t block_cols, double sparsity);

/// round(s * n) with ties rounded up; the shared pruned-block count rule.
std::size_t pruned_block_count(double sparsity, std::size_t n);

}  // namespace bst
