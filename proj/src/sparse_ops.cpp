#include "bst/sparse_ops.hpp"

#include <algorithm>
#include <vector>

#include "bst/error.hpp"
#include "bst/log.hpp"
#include "bst/parallel.hpp"

namespace bst {

Tensor bspmm(const BsrMatrix& a, const Tensor& b, BspmmStats* stats, BspmmOptions options) {
  bsr_require_valid(a);
  if (b.rank() != 2 || b.dim(0) != a.cols) {
    throw DimensionError("bspmm: BSR is " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                         " but dense operand is " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.rows, n = b.dim(1);
  const std::size_t br = a.block_rows, bc = a.block_cols;
  const std::size_t nbr = a.block_row_count(), nbc = a.block_col_count();
  const std::size_t tile = std::max<std::size_t>(options.tile_cols, 1);
  Tensor c({m, n});
  float* pc = c.data().data();
  const float* pb = b.data().data();

  std::vector<std::uint64_t> processed_per_row(nbr, 0);
  parallel_for(nbr, br * a.cols * n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> slot_of(nbc);
    for (std::size_t i = begin; i < end; ++i) {
      // Phase 1: parse crow/col into the predicate array.
      std::fill(slot_of.begin(), slot_of.end(), -1);
      const auto first = static_cast<std::size_t>(a.crow[i]);
      const auto last = static_cast<std::size_t>(a.crow[i + 1]);
      for (std::size_t s = first; s < last; ++s) slot_of[static_cast<std::size_t>(a.col[s])] = static_cast<std::int32_t>(s);
      processed_per_row[i] = last - first;
      if (first == last) continue;  // output rows stay zero

      for (std::size_t n0 = 0; n0 < n; n0 += tile) {
        const std::size_t n1 = std::min(n, n0 + tile);
        for (std::size_t r = 0; r < br; ++r) {
          float* crow = pc + (i * br + r) * n;
          for (std::size_t kb = 0; kb < nbc; ++kb) {
            const std::int32_t slot = slot_of[kb];
            if (slot < 0) continue;
            // Phase 2: gather the block row segment.
            const float* blk = a.values.data() + static_cast<std::size_t>(slot) * br * bc + r * bc;
            // Phase 3: accumulate.
            for (std::size_t kk = 0; kk < bc; ++kk) {
              const float av = blk[kk];
              const float* brow = pb + (kb * bc + kk) * n;
              for (std::size_t j = n0; j < n1; ++j) crow[j] += av * brow[j];
            }
          }
        }
      }
    }
  });

  if (stats != nullptr) {
    BspmmStats st;
    for (std::uint64_t p : processed_per_row) st.blocks_processed += p;
    st.blocks_visited = static_cast<std::uint64_t>(nbr) * nbc;
    st.blocks_skipped = st.blocks_visited - st.blocks_processed;
    st.macs_executed = st.blocks_processed * br * bc * n;
    st.macs_dense_equivalent = static_cast<std::uint64_t>(m) * a.cols * n;
    *stats = st;
  }
  return c;
}

// ---------------------------------------------------------------------------

std::size_t SavedActivation::rows() const { return bsr ? bsr->rows : dense.rows(); }
std::size_t SavedActivation::cols() const { return bsr ? bsr->cols : dense.cols(); }

std::size_t SavedActivation::stored_bytes() const {
  return bsr ? bsr->total_bytes() : dense.numel() * sizeof(float);
}

std::size_t SavedActivation::dense_bytes() const { return shape_numel(original_shape) * sizeof(float); }

Tensor SavedActivation::materialize() const {
  if (bsr) return bsr_decode(*bsr);
  return dense.reshaped({dense.rows(), dense.cols()});
}

SavedActivation save_activation(const Tensor& x, const std::optional<PruneConfig>& cfg) {
  SavedActivation saved;
  saved.original_shape = x.shape();
  saved.cfg = cfg;
  if (cfg && x.cols() % cfg->block_cols == 0) {
    saved.bsr = prune_batch_to_bsr(x, *cfg).bsr;
    return saved;
  }
  if (cfg) {
    log::warn_once("dense-fallback:" + std::to_string(x.cols()) + ":" + std::to_string(cfg->block_cols),
                   "block size " + std::to_string(cfg->block_cols) + " does not divide activation width " +
                       std::to_string(x.cols()) + "; saving this activation dense");
  }
  saved.dense = x.reshaped({x.rows(), x.cols()});
  return saved;
}

Tensor grad_weight(const Tensor& dy, const SavedActivation& saved, BspmmStats* stats) {
  if (dy.rank() != 2 || dy.dim(0) != saved.rows()) {
    throw DimensionError("grad_weight: dy " + shape_to_string(dy.shape()) + " does not match " +
                         std::to_string(saved.rows()) + " saved rows");
  }
  const std::size_t dout = dy.dim(1), din = saved.cols();
  if (!saved.bsr) {
    Tensor dw = matmul_dense(transpose2d(dy), saved.dense);
    if (stats != nullptr) {
      *stats = BspmmStats{};
      stats->macs_executed = stats->macs_dense_equivalent =
          static_cast<std::uint64_t>(dout) * din * saved.rows();
    }
    return dw;
  }
  const BsrMatrix& x = *saved.bsr;
  bsr_require_valid(x);
  Tensor dw({dout, din});
  float* pw = dw.data().data();
  const float* pdy = dy.data().data();
  const std::size_t br = x.block_rows, bc = x.block_cols;
  parallel_for(dout, x.values.size() + x.rows, [&](std::size_t o0, std::size_t o1) {
    for (std::size_t i = 0; i < x.block_row_count(); ++i) {
      for (auto s = static_cast<std::size_t>(x.crow[i]); s < static_cast<std::size_t>(x.crow[i + 1]); ++s) {
        const std::size_t c0 = static_cast<std::size_t>(x.col[s]) * bc;
        const float* blk = x.values.data() + s * br * bc;
        for (std::size_t r = 0; r < br; ++r) {
          const float* xrow = blk + r * bc;
          const float* dyrow = pdy + (i * br + r) * dout;
          for (std::size_t o = o0; o < o1; ++o) {
            const float g = dyrow[o];
            float* wrow = pw + o * din + c0;
            for (std::size_t j = 0; j < bc; ++j) wrow[j] += g * xrow[j];
          }
        }
      }
    }
  });
  if (stats != nullptr) {
    BspmmStats st;
    st.blocks_visited = x.total_blocks();
    st.blocks_processed = x.nnzb();
    st.blocks_skipped = st.blocks_visited - st.blocks_processed;
    st.macs_executed = st.blocks_processed * br * bc * dout;
    st.macs_dense_equivalent = static_cast<std::uint64_t>(x.rows) * x.cols * dout;
    *stats = st;
  }
  return dw;
}

// ---------------------------------------------------------------------------

namespace {

void check_linear_shapes(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(0) || x.cols() != weight.dim(1)) {
    throw DimensionError("linear: input " + shape_to_string(x.shape()) + ", weight " +
                         shape_to_string(weight.shape()) + ", bias " + shape_to_string(bias.shape()));
  }
}

}  // namespace

Tensor linear_dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_linear_shapes(x, weight, bias);
  const std::size_t rows = x.rows(), dout = weight.dim(0);
  Tensor y = matmul_dense(x.reshaped({rows, x.cols()}), transpose2d(weight));
  float* py = y.data().data();
  const float* pbias = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < dout; ++o) py[r * dout + o] += pbias[o];
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  return std::move(y).reshaped(std::move(out_shape));
}

LinearForward sparse_linear_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                                    const std::optional<PruneConfig>& cfg) {
  check_linear_shapes(x, weight, bias);
  if (cfg) validate_prune_config(*cfg);
  LinearForward out;
  out.y = linear_dense(x, weight, bias);
  out.saved = save_activation(x, cfg);
  return out;
}

LinearGrads sparse_linear_backward(const Tensor& dy, const SavedActivation& saved, const Tensor& weight) {
  const std::size_t dout = weight.dim(0);
  if (dy.cols() != dout || dy.rows() != saved.rows() || weight.dim(1) != saved.cols()) {
    throw DimensionError("sparse_linear_backward: dy " + shape_to_string(dy.shape()) + ", weight " +
                         shape_to_string(weight.shape()) + ", saved rows " + std::to_string(saved.rows()));
  }
  const std::size_t rows = dy.rows();
  Tensor dy2 = dy.reshaped({rows, dout});
  LinearGrads g;
  Shape dx_shape = saved.original_shape;
  g.dx = matmul_dense(dy2, weight).reshaped(std::move(dx_shape));
  g.dbias = Tensor({dout});
  float* pb = g.dbias.data().data();
  const float* pdy = dy2.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < dout; ++o) pb[o] += pdy[r * dout + o];
  g.dweight = grad_weight(dy2, saved);
  return g;
}

}  // namespace bst
