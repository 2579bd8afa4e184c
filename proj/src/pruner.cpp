#include "bst/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bst/error.hpp"
#include "bst/parallel.hpp"

namespace bst {

void validate_prune_config(const PruneConfig& cfg) {
  if (!(cfg.sparsity >= 0.0 && cfg.sparsity <= 1.0)) {
    throw InvalidArgument("sparsity must be in [0, 1], got " + std::to_string(cfg.sparsity));
  }
  if (cfg.block_cols == 0) throw InvalidArgument("block size must be >= 1");
}

std::vector<float> block_l2_scores(std::span<const float> x, std::size_t row_len, std::size_t block_cols) {
  if (block_cols == 0 || row_len % block_cols != 0) {
    throw DimensionError("block size " + std::to_string(block_cols) + " does not divide trailing extent " +
                         std::to_string(row_len));
  }
  const std::size_t nblocks = x.size() / block_cols;
  std::vector<float> scores(nblocks);
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    const float* p = x.data() + blk * block_cols;
    double acc = 0.0;
    for (std::size_t i = 0; i < block_cols; ++i) acc += static_cast<double>(p[i]) * p[i];
    scores[blk] = static_cast<float>(std::sqrt(acc));
  }
  return scores;
}

std::vector<float> block_l2_scores(const Tensor& x, std::size_t block_cols) {
  return block_l2_scores(x.data(), x.cols(), block_cols);
}

PruneDecision select_topk_prune(std::span<const float> scores, double sparsity) {
  PruneDecision d;
  d.num_blocks = scores.size();
  d.k = pruned_block_count(sparsity, d.num_blocks);
  d.scores.assign(scores.begin(), scores.end());
  d.pruned.assign(d.num_blocks, 0);
  if (d.k == 0) return d;
  std::vector<std::size_t> order(d.num_blocks);
  std::iota(order.begin(), order.end(), 0);
  auto lower = [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  };
  if (d.k < d.num_blocks) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(d.k), order.end(), lower);
  }
  for (std::size_t i = 0; i < d.k; ++i) d.pruned[order[i]] = 1;
  return d;
}

PrunedBatch prune_batch_to_bsr(const Tensor& x, const PruneConfig& cfg) {
  validate_prune_config(cfg);
  if (x.rank() != 2 && x.rank() != 3) {
    throw DimensionError("prune_batch_to_bsr expects [B x P x D] or [P x D], got " + shape_to_string(x.shape()));
  }
  const std::size_t samples = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t d = x.cols();
  const std::size_t rows_total = x.rows();
  if (d % cfg.block_cols != 0) {
    throw DimensionError("block size " + std::to_string(cfg.block_cols) + " does not divide trailing extent " +
                         std::to_string(d));
  }
  const std::size_t per_sample = x.numel() / samples;
  const std::size_t blocks_per_sample = per_sample / cfg.block_cols;

  PrunedBatch out;
  out.decisions.resize(samples);
  std::vector<std::uint8_t> keep(samples * blocks_per_sample);
  parallel_for(samples, per_sample, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      auto slice = x.data().subspan(s * per_sample, per_sample);
      auto scores = block_l2_scores(slice, d, cfg.block_cols);
      out.decisions[s] = select_topk_prune(scores, cfg.sparsity);
      for (std::size_t b = 0; b < blocks_per_sample; ++b) {
        keep[s * blocks_per_sample + b] = out.decisions[s].pruned[b] ? 0 : 1;
      }
    }
  });
  Tensor flat = x.reshaped({rows_total, d});
  out.bsr = bsr_encode_masked(flat, 1, cfg.block_cols, keep);
  return out;
}

PrunedSize pruned_bsr_size(std::size_t samples, std::size_t rows, std::size_t cols, const PruneConfig& cfg) {
  validate_prune_config(cfg);
  if (cols % cfg.block_cols != 0) {
    throw DimensionError("block size " + std::to_string(cfg.block_cols) + " does not divide " +
                         std::to_string(cols));
  }
  const std::size_t per_sample = rows * cols / cfg.block_cols;
  const std::size_t kept = per_sample - pruned_block_count(cfg.sparsity, per_sample);
  PrunedSize sz;
  sz.total_blocks = samples * per_sample;
  sz.stored_blocks = samples * kept;
  sz.value_bytes = sz.stored_blocks * cfg.block_cols * sizeof(float);
  sz.index_bytes = (samples * rows + 1 + sz.stored_blocks) * sizeof(std::int32_t);
  return sz;
}

}  // namespace bst
