#include "bst/bst.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "bst/bsr.hpp"
#include "bst/config.hpp"
#include "bst/error.hpp"
#include "bst/experiments.hpp"
#include "bst/parallel.hpp"
#include "bst/pruner.hpp"
#include "bst/sparse_ops.hpp"

struct bst_bsr {
  bst::BsrMatrix m;
};

struct bst_config {
  bst::ConfigFile file;
  bst::RunConfig run;
};

namespace {

thread_local std::string g_last_error;

bst_status set_error(bst_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename Fn>
bst_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BST_OK;
  } catch (const bst::Error& e) {
    return set_error(static_cast<bst_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(BST_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(BST_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(BST_ERR_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw bst::InvalidArgument(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* bst_version(void) { return "0.1.0"; }

const char* bst_status_name(bst_status status) {
  switch (status) {
    case BST_OK: return "ok";
    case BST_ERR_DIMENSION: return "dimension";
    case BST_ERR_FORMAT: return "format";
    case BST_ERR_CONFIG: return "config";
    case BST_ERR_INGESTION: return "ingestion";
    case BST_ERR_IO: return "io";
    case BST_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case BST_ERR_STATE: return "state";
    case BST_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* bst_last_error_message(void) { return g_last_error.c_str(); }

void bst_string_free(char* s) { std::free(s); }

bst_status bst_set_threads(size_t workers) {
  return guarded([&] { bst::set_worker_count(workers); });
}

// --- BSR ---------------------------------------------------------------------------

bst_status bst_bsr_encode(const float* dense, size_t rows, size_t cols, size_t block_rows, size_t block_cols,
                          bst_bsr** out) {
  return guarded([&] {
    require(dense, "dense");
    require(out, "out");
    *out = nullptr;
    if (rows == 0 || cols == 0) throw bst::DimensionError("matrix extents must be positive");
    bst::Tensor t({rows, cols}, std::vector<float>(dense, dense + rows * cols));
    *out = new bst_bsr{bst::bsr_encode(t, block_rows, block_cols)};
  });
}

bst_status bst_bsr_decode(const bst_bsr* m, float* out, size_t out_len) {
  return guarded([&] {
    require(m, "matrix");
    require(out, "out");
    if (out_len != m->m.rows * m->m.cols) {
      throw bst::DimensionError("output buffer holds " + std::to_string(out_len) + " floats, need " +
                                std::to_string(m->m.rows * m->m.cols));
    }
    bst::Tensor t = bst::bsr_decode(m->m);
    std::memcpy(out, t.data().data(), out_len * sizeof(float));
  });
}

bst_status bst_bsr_get_info(const bst_bsr* m, bst_bsr_info* info) {
  return guarded([&] {
    require(m, "matrix");
    require(info, "info");
    info->rows = m->m.rows;
    info->cols = m->m.cols;
    info->block_rows = m->m.block_rows;
    info->block_cols = m->m.block_cols;
    info->nnzb = m->m.nnzb();
    info->value_bytes = m->m.value_bytes();
    info->index_bytes = m->m.index_bytes();
  });
}

bst_status bst_bsr_nnzb_in_row(const bst_bsr* m, size_t block_row, size_t* out) {
  return guarded([&] {
    require(m, "matrix");
    require(out, "out");
    *out = bst::nnzb_in_row(m->m, block_row);
  });
}

bst_status bst_bsr_save(const bst_bsr* m, const char* path) {
  return guarded([&] {
    require(m, "matrix");
    require(path, "path");
    bst::bsr_save(path, m->m);
  });
}

bst_status bst_bsr_load(const char* path, bst_bsr** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new bst_bsr{bst::bsr_load(path)};
  });
}

void bst_bsr_free(bst_bsr* m) { delete m; }

bst_status bst_prune_to_bsr(const float* x, size_t samples, size_t rows, size_t cols, double sparsity, size_t block,
                            bst_bsr** out) {
  return guarded([&] {
    require(x, "x");
    require(out, "out");
    *out = nullptr;
    if (samples == 0 || rows == 0 || cols == 0) throw bst::DimensionError("extents must be positive");
    const size_t n = samples * rows * cols;
    bst::Tensor t({samples, rows, cols}, std::vector<float>(x, x + n));
    *out = new bst_bsr{bst::prune_batch_to_bsr(t, bst::PruneConfig{sparsity, block}).bsr};
  });
}

bst_status bst_bspmm(const bst_bsr* a, const float* b, size_t n, float* out, size_t out_len, bst_bspmm_stats* stats) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    if (n == 0) throw bst::DimensionError("n must be positive");
    if (out_len != a->m.rows * n) throw bst::DimensionError("output buffer has the wrong length");
    bst::Tensor bt({a->m.cols, n}, std::vector<float>(b, b + a->m.cols * n));
    bst::BspmmStats st;
    bst::Tensor c = bst::bspmm(a->m, bt, &st);
    std::memcpy(out, c.data().data(), out_len * sizeof(float));
    if (stats) {
      stats->blocks_visited = st.blocks_visited;
      stats->blocks_skipped = st.blocks_skipped;
      stats->blocks_processed = st.blocks_processed;
      stats->macs_executed = st.macs_executed;
      stats->macs_dense_equivalent = st.macs_dense_equivalent;
    }
  });
}

bst_status bst_compression_report(size_t rows, size_t cols, size_t block_rows, size_t block_cols, double sparsity,
                                  bst_compression* out) {
  return guarded([&] {
    require(out, "out");
    auto r = bst::compression_report(rows, cols, block_rows, block_cols, sparsity);
    out->dense_bytes = r.dense_bytes;
    out->value_bytes = r.value_bytes;
    out->index_bytes = r.index_bytes;
    out->total_bytes = r.total_bytes;
    out->stored_blocks = r.stored_blocks;
    out->realized_sparsity = r.realized_sparsity;
    out->overhead_fraction = r.overhead_fraction;
    out->excess_over_ideal = r.excess_over_ideal;
  });
}

// --- config ---------------------------------------------------------------------------

bst_status bst_config_load(const char* path, bst_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto file = bst::ConfigFile::load(path);
    auto run = bst::run_config_from(file);
    *out = new bst_config{std::move(file), std::move(run)};
  });
}

bst_status bst_config_parse(const char* text, bst_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = nullptr;
    auto file = bst::ConfigFile::parse(text);
    auto run = bst::run_config_from(file);
    *out = new bst_config{std::move(file), std::move(run)};
  });
}

bst_status bst_config_set(bst_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "config");
    require(assignment, "assignment");
    bst::ConfigFile next = cfg->file;
    next.set_override(assignment);
    cfg->run = bst::run_config_from(next);
    cfg->file = std::move(next);
  });
}

bst_status bst_config_set_many(bst_config* cfg, const char* const* assignments, size_t count) {
  return guarded([&] {
    require(cfg, "config");
    if (count) require(assignments, "assignments");
    bst::ConfigFile next = cfg->file;
    for (size_t i = 0; i < count; ++i) {
      require(assignments[i], "assignment");
      next.set_override(assignments[i]);
    }
    cfg->run = bst::run_config_from(next);
    cfg->file = std::move(next);
  });
}

bst_status bst_config_echo(const bst_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = dup_string(cfg->run.echo());
  });
}

void bst_config_free(bst_config* cfg) { delete cfg; }

// --- experiments ------------------------------------------------------------------------

bst_status bst_overhead_table_csv(size_t rows, size_t cols, const size_t* blocks, size_t n_blocks,
                                  const double* sparsities_pct, size_t n_sparsities, char** out_csv) {
  return guarded([&] {
    require(out_csv, "out_csv");
    bst::OverheadTableOptions opt;
    opt.rows = rows;
    opt.cols = cols;
    if (blocks && n_blocks) opt.blocks.assign(blocks, blocks + n_blocks);
    if (sparsities_pct && n_sparsities) opt.sparsities_pct.assign(sparsities_pct, sparsities_pct + n_sparsities);
    *out_csv = dup_string(bst::overhead_table_csv(opt));
  });
}

void bst_bench_options_default(bst_bench_options* opt) {
  if (!opt) return;
  bst::BenchOptions d;
  opt->batch = d.batch;
  opt->patches = d.patches;
  opt->dim = d.dim;
  opt->reps = d.reps;
  opt->seed = d.seed;
}

bst_status bst_bench_csv(const bst_bench_options* opt, const size_t* blocks, size_t n_blocks, const double* sparsities,
                         size_t n_sparsities, char** out_csv) {
  return guarded([&] {
    require(opt, "options");
    require(out_csv, "out_csv");
    bst::BenchOptions o;
    o.batch = opt->batch;
    o.patches = opt->patches;
    o.dim = opt->dim;
    o.reps = opt->reps;
    o.seed = opt->seed;
    if (blocks && n_blocks) o.blocks.assign(blocks, blocks + n_blocks);
    if (sparsities && n_sparsities) o.sparsities.assign(sparsities, sparsities + n_sparsities);
    for (double s : o.sparsities) bst::validate_prune_config(bst::PruneConfig{s, 1});
    *out_csv = dup_string(bst::bench_csv(o, bst::run_bench(o)));
  });
}

bst_status bst_train(const bst_config* cfg, const char* out_dir, bst_train_summary* summary) {
  return guarded([&] {
    require(cfg, "config");
    require(out_dir, "out_dir");
    auto r = bst::train_model(cfg->run);
    bst::write_train_outputs(r, out_dir);
    if (summary) {
      summary->steps = r.steps;
      summary->final_loss = r.losses.empty() ? 0.0 : r.losses.back().loss;
      summary->train_accuracy = r.train_accuracy;
      summary->test_accuracy = r.test_accuracy;
      summary->peak_activation_bytes = r.peak_activation_bytes;
    }
  });
}

bst_status bst_grid(const bst_config* cfg, const double* sparsities, size_t n_sparsities, const size_t* blocks,
                    size_t n_blocks, const char* out_dir, double* baseline_accuracy) {
  return guarded([&] {
    require(cfg, "config");
    require(out_dir, "out_dir");
    bst::GridOptions opt;
    if (sparsities && n_sparsities) opt.sparsities.assign(sparsities, sparsities + n_sparsities);
    if (blocks && n_blocks) opt.blocks.assign(blocks, blocks + n_blocks);
    auto g = bst::run_grid(cfg->run, opt);
    bst::write_grid_outputs(g, out_dir);
    if (baseline_accuracy) *baseline_accuracy = g.baseline_accuracy;
  });
}

bst_status bst_memory_report(const bst_config* cfg, size_t batch, int as_json, char** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    auto r = bst::memory_report(cfg->run, batch ? std::optional<std::size_t>(batch) : std::nullopt);
    *out = dup_string(as_json ? bst::memory_report_json(r) : bst::memory_report_text(r));
  });
}

}  // extern "C"
