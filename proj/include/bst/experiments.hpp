#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bst/config.hpp"
#include "bst/datasets.hpp"
#include "bst/memstat.hpp"

namespace bst {

// --- overhead table ----------------------------------------------------------

struct OverheadTableOptions {
  std::size_t rows = 196;
  std::size_t cols = 384;
  std::vector<std::size_t> blocks{1, 4, 8, 16, 32, 64, 128, 384};
  std::vector<double> sparsities_pct{0, 20, 40, 60, 80, 100};
};

struct OverheadCell {
  double sparsity_pct = 0.0;
  std::size_t block = 0;
  std::optional<double> overhead_pct;  // nullopt when b does not divide cols
  std::string error;
};

std::vector<OverheadCell> overhead_table(const OverheadTableOptions& opt);
/// One row per sparsity, one column per block size, values in percent with
/// two decimals.
std::string overhead_table_csv(const OverheadTableOptions& opt);

// --- bench ------------------------------------------------------------------------

struct BenchOptions {
  std::size_t batch = 64;
  std::size_t patches = 196;
  std::size_t dim = 384;
  std::vector<std::size_t> blocks{1, 4, 8, 16, 32, 64};
  std::vector<double> sparsities{0.1, 0.3, 0.5, 0.7, 0.9};
  std::size_t reps = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string kind;  // dense | bspmm
  std::size_t block = 0;
  double sparsity = 0.0;
  double median_ms = 0.0;
  std::uint64_t macs_executed = 0;
  std::uint64_t macs_dense_equivalent = 0;
  double gflops_dense_equiv = 0.0;
};

std::vector<BenchRow> run_bench(const BenchOptions& opt);
std::string bench_csv(const BenchOptions& opt, const std::vector<BenchRow>& rows);

// --- training ---------------------------------------------------------------------

struct LossPoint {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
};

struct TrainResult {
  RunConfig config;
  std::vector<LossPoint> losses;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t steps = 0;
  std::size_t param_count = 0;
  ComponentBreakdown memory;         // runtime ledger peaks
  SavingsReport savings;             // analytic, at the run's batch size
  std::size_t peak_activation_bytes = 0;
  std::size_t census_activation_bytes = 0;  // analytic compressed total
  std::vector<nn::Param> final_params;
};

DatasetSplit load_dataset(const RunConfig& rc);

/// Optional per-step observer (step, loss).
using StepCallback = std::function<void(std::size_t, double)>;

TrainResult train_model(const RunConfig& rc, const DatasetSplit& data, const StepCallback& on_step = {});
TrainResult train_model(const RunConfig& rc);

double evaluate_accuracy(ResMlp& model, const Dataset& data, std::size_t chunk = 256);

std::string loss_csv(const TrainResult& r);
std::string metrics_json(const TrainResult& r);
std::string memory_json(const TrainResult& r);
std::string memory_text(const TrainResult& r);
/// Writes loss.csv, metrics.json, memory.json, memory.txt, checkpoint.bin.
void write_train_outputs(const TrainResult& r, const std::string& out_dir);

// --- grid -------------------------------------------------------------------------

struct GridOptions {
  std::vector<double> sparsities{0.0, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::size_t> blocks{4, 8, 16};
  double acceptable_drop_pp = 1.5;
};

struct GridCell {
  double sparsity = 0.0;
  std::size_t block = 0;
  double test_accuracy = 0.0;
  double delta_pp = 0.0;  // percentage points vs dense baseline
  std::string classification;  // above-baseline | acceptable | degraded
  std::vector<LossPoint> losses;
};

struct GridResult {
  RunConfig base;
  GridOptions options;
  double baseline_accuracy = 0.0;
  std::vector<LossPoint> baseline_losses;
  std::vector<GridCell> cells;  // row-major over (sparsity, block)
};

std::string classify_delta(double delta_pp, double acceptable_drop_pp);
GridResult run_grid(const RunConfig& base, const GridOptions& opt);
std::string heatmap_csv(const GridResult& g);
std::string grid_cells_csv(const GridResult& g);
std::string grid_losses_csv(const GridResult& g);
/// Writes heatmap.csv, cells.csv, losses.csv.
void write_grid_outputs(const GridResult& g, const std::string& out_dir);

// --- memory report ------------------------------------------------------------------

struct MemoryReport {
  RunConfig config;
  std::size_t batch = 0;
  ComponentBreakdown breakdown;  // dry run, no data
  SavingsReport savings;
  std::vector<LayerEligibility> eligibility;
};

/// Logs input, model, optimizer state and the activation census into a
/// ledger without running any arithmetic.
void dry_run_ledger(const RunConfig& rc, std::size_t batch, MemLedger& ledger);
MemoryReport memory_report(const RunConfig& rc, std::optional<std::size_t> batch = std::nullopt);
std::string memory_report_text(const MemoryReport& r);
std::string memory_report_json(const MemoryReport& r);

std::string format_fixed(double v, int decimals);

}  // namespace bst
