#include "bst/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "bst/bsr.hpp"
#include "bst/error.hpp"
#include "bst/log.hpp"
#include "bst/parallel.hpp"
#include "bst/pruner.hpp"
#include "bst/sparse_ops.hpp"

namespace bst {

using json = nlohmann::ordered_json;

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

namespace {

std::string fmt_g(double v, int digits = 9) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw IoError("write failed for " + path.string());
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  return dir;
}

}  // namespace

// --- overhead table ------------------------------------------------------------------

std::vector<OverheadCell> overhead_table(const OverheadTableOptions& opt) {
  if (opt.rows == 0 || opt.cols == 0) throw InvalidArgument("overhead table geometry must be positive");
  if (opt.blocks.empty() || opt.sparsities_pct.empty()) throw InvalidArgument("overhead table grid is empty");
  std::vector<OverheadCell> cells;
  for (double s : opt.sparsities_pct) {
    if (!(s >= 0.0 && s <= 100.0)) throw InvalidArgument("sparsity " + fmt_g(s) + "% outside [0, 100]");
    for (std::size_t b : opt.blocks) {
      OverheadCell c;
      c.sparsity_pct = s;
      c.block = b;
      if (b == 0 || opt.cols % b != 0) {
        c.error = "block " + std::to_string(b) + " does not divide " + std::to_string(opt.cols) + " columns";
      } else {
        c.overhead_pct = 100.0 * compression_report(opt.rows, opt.cols, 1, b, s / 100.0).excess_over_ideal;
      }
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

std::string overhead_table_csv(const OverheadTableOptions& opt) {
  auto cells = overhead_table(opt);
  std::ostringstream os;
  os << "# bst overhead-table rows=" << opt.rows << " cols=" << opt.cols
     << " block_rows=1 value_bytes=4 index_bytes=4 metric=percent_over_ideal\n";
  os << "sparsity_pct";
  for (std::size_t b : opt.blocks) os << ",b=" << b;
  os << '\n';
  std::vector<std::string> errors;
  std::size_t i = 0;
  for (double s : opt.sparsities_pct) {
    os << fmt_g(s);
    for (std::size_t j = 0; j < opt.blocks.size(); ++j, ++i) {
      const auto& c = cells[i];
      os << ',';
      if (c.overhead_pct) {
        os << format_fixed(*c.overhead_pct, 2);
      } else {
        os << "error";
        errors.push_back("s=" + fmt_g(s) + " b=" + std::to_string(c.block) + ": " + c.error);
      }
    }
    os << '\n';
  }
  for (const auto& e : errors) os << "# error: " << e << '\n';
  return os.str();
}

// --- bench ----------------------------------------------------------------------------

namespace {

template <typename Fn>
double median_ms(std::size_t reps, Fn&& fn) {
  std::vector<double> times;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

double gflops(std::uint64_t macs, double ms) { return ms > 0.0 ? 2.0 * static_cast<double>(macs) / (ms * 1e6) : 0.0; }

}  // namespace

std::vector<BenchRow> run_bench(const BenchOptions& opt) {
  if (opt.batch == 0 || opt.patches == 0 || opt.dim == 0) throw InvalidArgument("bench shape must be positive");
  if (opt.reps == 0) throw InvalidArgument("bench reps must be >= 1");
  Rng rng(opt.seed);
  Tensor x = rng_normal(rng, {opt.batch, opt.patches, opt.dim}, 0.0f, 1.0f);
  Tensor w = rng_normal(rng, {opt.dim, opt.dim}, 0.0f, 1.0f);
  Tensor x2 = x.reshaped({opt.batch * opt.patches, opt.dim});
  const std::uint64_t dense_macs = static_cast<std::uint64_t>(opt.batch) * opt.patches * opt.dim * opt.dim;

  std::vector<BenchRow> rows;
  BenchRow dense{"dense", 0, 0.0, 0.0, dense_macs, dense_macs, 0.0};
  dense.median_ms = median_ms(opt.reps, [&] { (void)matmul_dense(x2, w); });
  dense.gflops_dense_equiv = gflops(dense_macs, dense.median_ms);
  rows.push_back(dense);

  for (std::size_t b : opt.blocks) {
    if (b == 0 || opt.dim % b != 0) {
      log::warn("bench: block " + std::to_string(b) + " does not divide " + std::to_string(opt.dim) + ", skipped");
      continue;
    }
    for (double s : opt.sparsities) {
      PrunedBatch pb = prune_batch_to_bsr(x, PruneConfig{s, b});
      BspmmStats stats;
      BenchRow row{"bspmm", b, s, 0.0, 0, dense_macs, 0.0};
      row.median_ms = median_ms(opt.reps, [&] {
        stats = {};
        (void)bspmm(pb.bsr, w, &stats);
      });
      row.macs_executed = stats.macs_executed;
      row.gflops_dense_equiv = gflops(dense_macs, row.median_ms);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string bench_csv(const BenchOptions& opt, const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "# bst bench shape=" << opt.batch << ',' << opt.patches << ',' << opt.dim << " reps=" << opt.reps
     << " seed=" << opt.seed << " threads=" << worker_count() << '\n';
  os << "kind,block,sparsity,median_ms,macs_executed,macs_dense_equivalent,gflops_dense_equiv\n";
  for (const auto& r : rows) {
    os << r.kind << ',' << r.block << ',' << fmt_g(r.sparsity, 6) << ',' << format_fixed(r.median_ms, 4) << ','
       << r.macs_executed << ',' << r.macs_dense_equivalent << ',' << format_fixed(r.gflops_dense_equiv, 4) << '\n';
  }
  return os.str();
}

// --- training ----------------------------------------------------------------------------

DatasetSplit load_dataset(const RunConfig& rc) {
  const auto& d = rc.data;
  const auto& m = rc.model;
  if (d.source == "synthetic") {
    SynthOptions so;
    so.noise = d.noise;
    so.blobs_per_class = d.blobs_per_class;
    return synth_split(Rng::derive(rc.train.seed, 0xDA7A).uniform_index(~0ull), d.train_samples, d.test_samples,
                       m.num_classes, ImageGeometry{m.channels, m.height, m.width}, so);
  }
  if (m.channels != 3 || m.height != 32 || m.width != 32) {
    throw ConfigError("CIFAR data needs model.image=3,32,32");
  }
  if (d.source == "cifar10") {
    if (m.num_classes != 10) throw ConfigError("cifar10 needs model.num_classes=10");
    return load_cifar10(d.path);
  }
  if (m.num_classes != 100) throw ConfigError("cifar100 needs model.num_classes=100");
  return load_cifar100(d.path);
}

double evaluate_accuracy(ResMlp& model, const Dataset& data, std::size_t chunk) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, data.size());
    LabeledBatch b = gather(data, begin, end);
    nn::Tape tape(nullptr, false);
    const Tensor& logits = tape.value(model.forward(tape, b.images));
    const std::size_t k = logits.dim(1);
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (logits.at(i, j) > logits.at(i, best)) best = j;
      }
      correct += static_cast<std::int32_t>(best) == b.labels[i];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

std::unique_ptr<nn::Optimizer> make_optimizer(const OptimConfig& o, std::span<nn::Param> params) {
  if (o.name == "adam") {
    nn::AdamConfig ac;
    ac.lr = o.lr;
    ac.weight_decay = o.weight_decay;
    return std::make_unique<nn::Adam>(params, ac);
  }
  return std::make_unique<nn::SgdMomentum>(params, nn::SgdConfig{o.lr, o.momentum, o.weight_decay});
}

std::size_t optimizer_state_bytes(const OptimConfig& o, std::size_t params) {
  if (o.name == "adam") return 2 * params * sizeof(float);
  return o.momentum != 0.0f ? params * sizeof(float) : 0;
}

}  // namespace

TrainResult train_model(const RunConfig& rc, const DatasetSplit& data, const StepCallback& on_step) {
  const auto& m = rc.model;
  const auto g = data.train.geometry();
  if (g.channels != m.channels || g.height != m.height || g.width != m.width) {
    throw DimensionError("dataset images do not match model.image");
  }
  if (data.train.num_classes > m.num_classes) throw ConfigError("dataset has more classes than model.num_classes");
  if (data.train.size() < rc.train.batch_size) {
    throw ConfigError("train split (" + std::to_string(data.train.size()) + ") smaller than batch_size");
  }

  TrainResult r;
  r.config = rc;
  ResMlp model(m, Rng::derive(rc.train.seed, 0x1A17).uniform_index(~0ull));
  r.param_count = model.param_count();
  auto optimizer = make_optimizer(rc.optim, model.params());

  MemLedger ledger;
  ledger.allocate(Component::kModel, "parameters", r.param_count * sizeof(float));
  if (auto sb = optimizer->state_bytes()) ledger.allocate(Component::kOptimizer, "optimizer_state", sb);

  const std::size_t per_epoch = data.train.size() / rc.train.batch_size;
  const std::size_t total = per_epoch * rc.train.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < rc.train.epochs; ++epoch) {
    auto it = batches(data.train, rc.train.batch_size, rc.train.seed, epoch);
    while (it.has_next()) {
      LabeledBatch batch = it.next();
      const auto input_id = ledger.allocate(Component::kInput, "batch", batch.images.numel() * sizeof(float));
      nn::zero_grads(model.params());
      nn::Tape tape(&ledger);
      nn::Var loss = nn::cross_entropy(tape, model.forward(tape, batch.images), batch.labels, "loss");
      const double loss_value = tape.value(loss).data()[0];
      tape.backward(loss);
      if (rc.optim.schedule == "cosine") {
        const double frac = static_cast<double>(step) / static_cast<double>(total);
        optimizer->set_learning_rate(static_cast<float>(rc.optim.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac))));
      }
      optimizer->step();
      ledger.release(input_id);
      r.losses.push_back({step, epoch, loss_value});
      if (on_step) on_step(step, loss_value);
      ++step;
    }
  }
  r.steps = step;
  r.train_accuracy = evaluate_accuracy(model, data.train);
  r.test_accuracy = evaluate_accuracy(model, data.test);
  r.memory = component_breakdown(ledger);
  r.peak_activation_bytes = ledger.peak_bytes(Component::kActivations);
  const auto census = activation_census(m, rc.train.batch_size);
  r.savings = savings_report(census, m.prune);
  r.census_activation_bytes = r.savings.total_compressed_bytes;
  r.final_params = model.params();
  return r;
}

TrainResult train_model(const RunConfig& rc) { return train_model(rc, load_dataset(rc)); }

std::string loss_csv(const TrainResult& r) {
  std::ostringstream os;
  os << "# config: " << r.config.echo() << '\n';
  os << "step,epoch,loss\n";
  for (const auto& p : r.losses) os << p.step << ',' << p.epoch << ',' << fmt_g(p.loss) << '\n';
  return os.str();
}

std::string metrics_json(const TrainResult& r) {
  json j;
  j["schema"] = "bst.train_metrics/1";
  j["config"] = r.config.echo();
  j["steps"] = r.steps;
  j["param_count"] = r.param_count;
  j["final_loss"] = r.losses.empty() ? 0.0 : r.losses.back().loss;
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["peak_activation_bytes"] = r.peak_activation_bytes;
  j["census_activation_bytes"] = r.census_activation_bytes;
  return j.dump(2) + "\n";
}

std::string memory_json(const TrainResult& r) {
  json j;
  j["schema"] = "bst.train_memory/1";
  j["config"] = r.config.echo();
  j["runtime_breakdown"] = json::parse(breakdown_json(r.memory));
  j["savings"] = json::parse(savings_json(r.savings));
  return j.dump(2) + "\n";
}

std::string memory_text(const TrainResult& r) {
  return "runtime peak by component\n" + breakdown_text(r.memory) + "\nactivation savings (analytic)\n" +
         savings_text(r.savings);
}

void write_train_outputs(const TrainResult& r, const std::string& out_dir) {
  auto dir = ensure_dir(out_dir);
  write_file(dir / "loss.csv", loss_csv(r));
  write_file(dir / "metrics.json", metrics_json(r));
  write_file(dir / "memory.json", memory_json(r));
  write_file(dir / "memory.txt", memory_text(r));
  save_checkpoint((dir / "checkpoint.bin").string(), r.final_params);
}

// --- grid ------------------------------------------------------------------------------------

std::string classify_delta(double delta_pp, double acceptable_drop_pp) {
  if (delta_pp > 0.0) return "above-baseline";
  if (delta_pp >= -acceptable_drop_pp) return "acceptable";
  return "degraded";
}

GridResult run_grid(const RunConfig& base, const GridOptions& opt) {
  if (opt.sparsities.empty() || opt.blocks.empty()) throw InvalidArgument("grid needs sparsities and blocks");
  for (double s : opt.sparsities) validate_prune_config(PruneConfig{s, 1});
  for (std::size_t b : opt.blocks) {
    if (b == 0) throw InvalidArgument("grid block sizes must be positive");
  }
  GridResult g;
  g.base = base;
  g.options = opt;
  const DatasetSplit data = load_dataset(base);

  RunConfig dense = base;
  dense.model.prune.reset();
  TrainResult baseline = train_model(dense, data);
  g.baseline_accuracy = baseline.test_accuracy;
  g.baseline_losses = std::move(baseline.losses);

  for (double s : opt.sparsities) {
    for (std::size_t b : opt.blocks) {
      RunConfig rc = base;
      rc.model.prune = PruneConfig{s, b};
      TrainResult tr = train_model(rc, data);
      GridCell c;
      c.sparsity = s;
      c.block = b;
      c.test_accuracy = tr.test_accuracy;
      c.delta_pp = 100.0 * (tr.test_accuracy - g.baseline_accuracy);
      c.classification = classify_delta(c.delta_pp, opt.acceptable_drop_pp);
      c.losses = std::move(tr.losses);
      g.cells.push_back(std::move(c));
    }
  }
  return g;
}

namespace {

std::string grid_header(const GridResult& g) {
  RunConfig dense = g.base;
  dense.model.prune.reset();
  std::ostringstream os;
  os << "# config: " << dense.echo() << '\n';
  os << "# baseline_test_accuracy=" << fmt_g(g.baseline_accuracy) << " acceptable_drop_pp="
     << fmt_g(g.options.acceptable_drop_pp) << '\n';
  return os.str();
}

}  // namespace

std::string heatmap_csv(const GridResult& g) {
  std::ostringstream os;
  os << grid_header(g);
  os << "# values: test accuracy minus baseline, percentage points\n";
  os << "sparsity";
  for (std::size_t b : g.options.blocks) os << ",b=" << b;
  os << '\n';
  std::size_t i = 0;
  for (double s : g.options.sparsities) {
    os << fmt_g(s, 6);
    for (std::size_t j = 0; j < g.options.blocks.size(); ++j, ++i) os << ',' << format_fixed(g.cells[i].delta_pp, 2);
    os << '\n';
  }
  return os.str();
}

std::string grid_cells_csv(const GridResult& g) {
  std::ostringstream os;
  os << grid_header(g);
  os << "sparsity,block,test_accuracy,delta_pp,classification\n";
  for (const auto& c : g.cells) {
    os << fmt_g(c.sparsity, 6) << ',' << c.block << ',' << fmt_g(c.test_accuracy) << ',' << format_fixed(c.delta_pp, 2)
       << ',' << c.classification << '\n';
  }
  return os.str();
}

std::string grid_losses_csv(const GridResult& g) {
  std::ostringstream os;
  os << grid_header(g);
  os << "run,sparsity,block,step,loss\n";
  for (const auto& p : g.baseline_losses) os << "dense,0,0," << p.step << ',' << fmt_g(p.loss) << '\n';
  for (const auto& c : g.cells) {
    const std::string tag = "s" + fmt_g(c.sparsity, 6) + "_b" + std::to_string(c.block);
    for (const auto& p : c.losses) {
      os << tag << ',' << fmt_g(c.sparsity, 6) << ',' << c.block << ',' << p.step << ',' << fmt_g(p.loss) << '\n';
    }
  }
  return os.str();
}

void write_grid_outputs(const GridResult& g, const std::string& out_dir) {
  auto dir = ensure_dir(out_dir);
  write_file(dir / "heatmap.csv", heatmap_csv(g));
  write_file(dir / "cells.csv", grid_cells_csv(g));
  write_file(dir / "losses.csv", grid_losses_csv(g));
}

// --- memory report ------------------------------------------------------------------------------

void dry_run_ledger(const RunConfig& rc, std::size_t batch, MemLedger& ledger) {
  if (batch == 0) throw InvalidArgument("batch must be >= 1");
  const auto& m = rc.model;
  const std::size_t params = count_params(m);
  ledger.allocate(Component::kInput, "batch", batch * m.channels * m.height * m.width * sizeof(float));
  ledger.allocate(Component::kModel, "parameters", params * sizeof(float));
  if (auto sb = optimizer_state_bytes(rc.optim, params)) ledger.allocate(Component::kOptimizer, "optimizer_state", sb);
  const auto census = activation_census(m, batch);
  const auto sr = savings_report(census, m.prune);
  for (const auto& layer : sr.layers) {
    ledger.allocate(Component::kActivations, layer.label, layer.compressed_bytes, layer.dense_bytes);
  }
}

MemoryReport memory_report(const RunConfig& rc, std::optional<std::size_t> batch) {
  MemoryReport r;
  r.config = rc;
  r.batch = batch.value_or(rc.train.batch_size);
  MemLedger ledger;
  dry_run_ledger(rc, r.batch, ledger);
  r.breakdown = component_breakdown(ledger);
  r.savings = savings_report(activation_census(rc.model, r.batch), rc.model.prune);
  r.eligibility = ResMlp(rc.model, 0).eligibility_report();
  return r;
}

std::string memory_report_text(const MemoryReport& r) {
  std::ostringstream os;
  os << "config: " << r.config.echo() << "\nbatch: " << r.batch << "\n\ncomponent breakdown (dry run)\n"
     << breakdown_text(r.breakdown) << "\nactivation savings\n" << savings_text(r.savings) << "\neligibility\n";
  for (const auto& e : r.eligibility) {
    os << "  " << e.layer << " width=" << e.activation_width << (e.eligible ? " eligible" : " dense") << '\n';
  }
  return os.str();
}

std::string memory_report_json(const MemoryReport& r) {
  json j;
  j["schema"] = "bst.memory_report/1";
  j["config"] = r.config.echo();
  j["batch"] = r.batch;
  j["breakdown"] = json::parse(breakdown_json(r.breakdown));
  j["savings"] = json::parse(savings_json(r.savings));
  json el = json::array();
  for (const auto& e : r.eligibility) {
    el.push_back({{"layer", e.layer}, {"activation_width", e.activation_width}, {"eligible", e.eligible}});
  }
  j["eligibility"] = el;
  return j.dump(2) + "\n";
}

}  // namespace bst
