#ifndef BST_BST_H
#define BST_BST_H

/* C interface of libbst. Every call returns a bst_status; on failure the
   thread-local bst_last_error_message() describes the cause. Strings
   returned through char** are owned by the caller and released with
   bst_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(BST_BUILDING_LIBRARY)
#define BST_API __attribute__((visibility("default")))
#else
#define BST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bst_status {
  BST_OK = 0,
  BST_ERR_DIMENSION = 1,
  BST_ERR_FORMAT = 2,
  BST_ERR_CONFIG = 3,
  BST_ERR_INGESTION = 4,
  BST_ERR_IO = 5,
  BST_ERR_INVALID_ARGUMENT = 6,
  BST_ERR_STATE = 7,
  BST_ERR_INTERNAL = 99
} bst_status;

BST_API const char* bst_version(void);
BST_API const char* bst_status_name(bst_status status);
BST_API const char* bst_last_error_message(void);
BST_API void bst_string_free(char* s);
/* 0 restores the default (BST_THREADS, else hardware concurrency). */
BST_API bst_status bst_set_threads(size_t workers);

/* ---- BSR matrices ---------------------------------------------------- */

typedef struct bst_bsr bst_bsr;

typedef struct bst_bsr_info {
  size_t rows;
  size_t cols;
  size_t block_rows;
  size_t block_cols;
  size_t nnzb;
  size_t value_bytes;
  size_t index_bytes;
} bst_bsr_info;

/* Stores every block with at least one nonzero. dense is row-major. */
BST_API bst_status bst_bsr_encode(const float* dense, size_t rows, size_t cols, size_t block_rows,
                                  size_t block_cols, bst_bsr** out);
BST_API bst_status bst_bsr_decode(const bst_bsr* m, float* out, size_t out_len);
BST_API bst_status bst_bsr_get_info(const bst_bsr* m, bst_bsr_info* info);
BST_API bst_status bst_bsr_nnzb_in_row(const bst_bsr* m, size_t block_row, size_t* out);
BST_API bst_status bst_bsr_save(const bst_bsr* m, const char* path);
BST_API bst_status bst_bsr_load(const char* path, bst_bsr** out);
BST_API void bst_bsr_free(bst_bsr* m);

/* Top-k l2 block pruning of x [samples x rows x cols], blocks 1 x block. */
BST_API bst_status bst_prune_to_bsr(const float* x, size_t samples, size_t rows, size_t cols, double sparsity,
                                    size_t block, bst_bsr** out);

typedef struct bst_bspmm_stats {
  uint64_t blocks_visited;
  uint64_t blocks_skipped;
  uint64_t blocks_processed;
  uint64_t macs_executed;
  uint64_t macs_dense_equivalent;
} bst_bspmm_stats;

/* out [a.rows x n] = a * b, b row-major [a.cols x n]. stats may be NULL. */
BST_API bst_status bst_bspmm(const bst_bsr* a, const float* b, size_t n, float* out, size_t out_len,
                             bst_bspmm_stats* stats);

typedef struct bst_compression {
  size_t dense_bytes;
  size_t value_bytes;
  size_t index_bytes;
  size_t total_bytes;
  size_t stored_blocks;
  double realized_sparsity;
  double overhead_fraction;
  double excess_over_ideal;
} bst_compression;

BST_API bst_status bst_compression_report(size_t rows, size_t cols, size_t block_rows, size_t block_cols,
                                          double sparsity, bst_compression* out);

/* ---- run configuration -------------------------------------------------- */

typedef struct bst_config bst_config;

BST_API bst_status bst_config_load(const char* path, bst_config** out);
BST_API bst_status bst_config_parse(const char* text, bst_config** out);
/* "section.key=value"; the whole config is re-validated. */
BST_API bst_status bst_config_set(bst_config* cfg, const char* assignment);
/* Applies all assignments, then validates once; cfg is unchanged on error. */
BST_API bst_status bst_config_set_many(bst_config* cfg, const char* const* assignments, size_t count);
BST_API bst_status bst_config_echo(const bst_config* cfg, char** out);
BST_API void bst_config_free(bst_config* cfg);

/* ---- experiments ------------------------------------------------------- */

/* NULL/0 lists select the default grid. */
BST_API bst_status bst_overhead_table_csv(size_t rows, size_t cols, const size_t* blocks, size_t n_blocks,
                                          const double* sparsities_pct, size_t n_sparsities, char** out_csv);

typedef struct bst_bench_options {
  size_t batch;
  size_t patches;
  size_t dim;
  size_t reps;
  uint64_t seed;
} bst_bench_options;

BST_API void bst_bench_options_default(bst_bench_options* opt);
BST_API bst_status bst_bench_csv(const bst_bench_options* opt, const size_t* blocks, size_t n_blocks,
                                 const double* sparsities, size_t n_sparsities, char** out_csv);

typedef struct bst_train_summary {
  size_t steps;
  double final_loss;
  double train_accuracy;
  double test_accuracy;
  size_t peak_activation_bytes;
} bst_train_summary;

/* Writes loss.csv, metrics.json, memory.json, memory.txt and checkpoint.bin
   into out_dir. summary may be NULL. */
BST_API bst_status bst_train(const bst_config* cfg, const char* out_dir, bst_train_summary* summary);

/* Writes heatmap.csv, cells.csv and losses.csv into out_dir. */
BST_API bst_status bst_grid(const bst_config* cfg, const double* sparsities, size_t n_sparsities,
                            const size_t* blocks, size_t n_blocks, const char* out_dir, double* baseline_accuracy);

/* batch 0 uses train.batch_size. as_json != 0 selects JSON output. */
BST_API bst_status bst_memory_report(const bst_config* cfg, size_t batch, int as_json, char** out);

#ifdef __cplusplus
}
#endif

#endif
