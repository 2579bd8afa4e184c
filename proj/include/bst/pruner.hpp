#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bst/bsr.hpp"
#include "bst/tensor.hpp"

namespace bst {

struct PruneConfig {
  double sparsity = 0.0;
  std::size_t block_cols = 1;

  bool operator==(const PruneConfig&) const = default;
};

void validate_prune_config(const PruneConfig& cfg);

/// Outcome of top-k selection over one sample's blocks.
struct PruneDecision {
  std::vector<float> scores;
  std::vector<std::uint8_t> pruned;  // 1 = block zeroed
  std::size_t k = 0;                 // number of pruned blocks
  std::size_t num_blocks = 0;
};

/// l2 norm of every contiguous length-b segment of each row; x is read as
/// [rows, D] over its trailing extent.
std::vector<float> block_l2_scores(const Tensor& x, std::size_t block_cols);
std::vector<float> block_l2_scores(std::span<const float> x, std::size_t row_len, std::size_t block_cols);

/// Prunes the round(s * N) lowest-scoring blocks (ties: lower index first).
PruneDecision select_topk_prune(std::span<const float> scores, double sparsity);

struct PrunedBatch {
  BsrMatrix bsr;  // (B*P) x D, br = 1, bc = b
  std::vector<PruneDecision> decisions;  // one per sample
};

/// Top-k applied independently per leading index of x [B x P x D] (rank 2 is
/// treated as B = 1). The retained blocks of every sample are stored, so each
/// sample contributes exactly N - k blocks.
PrunedBatch prune_batch_to_bsr(const Tensor& x, const PruneConfig& cfg);

/// Bytes of the BSR produced by prune_batch_to_bsr for a [samples x rows x cols]
/// activation, computed from shapes alone.
struct PrunedSize {
  std::size_t value_bytes = 0;
  std::size_t index_bytes = 0;
  std::size_t stored_blocks = 0;
  std::size_t total_blocks = 0;
  std::size_t total_bytes() const { return value_bytes + index_bytes; }
};
PrunedSize pruned_bsr_size(std::size_t samples, std::size_t rows, std::size_t cols, const PruneConfig& cfg);

}  // namespace bst
