#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "bst/bsr.hpp"
#include "bst/pruner.hpp"
#include "bst/tensor.hpp"

namespace bst {

struct BspmmStats {
  std::uint64_t blocks_visited = 0;
  std::uint64_t blocks_skipped = 0;
  std::uint64_t blocks_processed = 0;
  std::uint64_t macs_executed = 0;
  std::uint64_t macs_dense_equivalent = 0;
};

struct BspmmOptions {
  /// Output columns per tile.
  std::size_t tile_cols = 64;
};

/// C = A * B for BSR A [M x K] and dense B [K x N].
///
/// Each block row is processed in three phases: the crow span is parsed into a
/// per-row predicate array over block columns, then for every output tile the
/// stored blocks are gathered and accumulated while absent blocks are skipped
/// on the predicate. Per output cell the accumulation runs over ascending k,
/// the same order as matmul_dense, so a fully dense A reproduces it exactly.
Tensor bspmm(const BsrMatrix& a, const Tensor& b, BspmmStats* stats = nullptr, BspmmOptions options = {});

/// Pruned (or dense-fallback) copy of a linear layer's input kept for the
/// weight gradient.
struct SavedActivation {
  Shape original_shape;               // (B, P, Din) or (rows, Din)
  std::optional<PruneConfig> cfg;     // the config in force, if any
  std::optional<BsrMatrix> bsr;       // set when stored compressed
  Tensor dense;                       // set when stored dense

  bool compressed() const { return bsr.has_value(); }
  std::size_t rows() const;           // B * P
  std::size_t cols() const;           // Din
  std::size_t stored_bytes() const;   // bytes actually held
  std::size_t dense_bytes() const;    // bytes of the unpruned activation
  Tensor materialize() const;         // [rows x cols]
};

/// Stores x as BSR when cfg is set and its block size divides the trailing
/// extent; otherwise keeps it dense (with a one-time warning if a config was
/// given but could not be applied).
SavedActivation save_activation(const Tensor& x, const std::optional<PruneConfig>& cfg);

/// dW = dy^T * x for the saved x. Sparse storage is consumed block by block:
/// every stored block scatters a rank-b update into dW, pruned blocks cost
/// nothing. dW rows are partitioned across workers.
Tensor grad_weight(const Tensor& dy, const SavedActivation& saved, BspmmStats* stats = nullptr);

struct LinearForward {
  Tensor y;
  SavedActivation saved;
};

/// y = x W^T + bias from the unpruned x; the saved copy is pruned afterwards.
LinearForward sparse_linear_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                                    const std::optional<PruneConfig>& cfg);

struct LinearGrads {
  Tensor dx;
  Tensor dweight;
  Tensor dbias;
};

/// dx = dy W and dbias = column sums of dy are exact and independent of the
/// pruning; dweight comes from the saved (possibly pruned) activation.
LinearGrads sparse_linear_backward(const Tensor& dy, const SavedActivation& saved, const Tensor& weight);

/// y = x W^T + bias over the trailing axis of x.
Tensor linear_dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

}  // namespace bst
