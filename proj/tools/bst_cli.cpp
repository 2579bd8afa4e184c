// Command-line front end over the C interface of libbst.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bst/bst.h"

namespace {

struct Failure {
  bst_status status;
  std::string message;
};

void check(bst_status s) {
  if (s != BST_OK) throw Failure{s, bst_last_error_message()};
}

int report(const std::string& code, int status, const std::string& message, int exit_code) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"status", status}, {"message", message}};
  std::cerr << j.dump() << std::endl;
  return exit_code;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  bst_string_free(s);
  return out;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text)) throw Failure{BST_ERR_IO, "cannot write " + path};
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  for (const auto& item : split(text)) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) {
      throw Failure{BST_ERR_INVALID_ARGUMENT, std::string(flag) + ": cannot parse '" + item + "'"};
    }
    out.push_back(v);
  }
  if (out.empty()) throw Failure{BST_ERR_INVALID_ARGUMENT, std::string(flag) + ": empty list"};
  return out;
}

struct ConfigHandle {
  bst_config* cfg = nullptr;
  ~ConfigHandle() { bst_config_free(cfg); }
};

void load_config(ConfigHandle& h, const std::string& path, const std::optional<std::uint64_t>& seed,
                 const std::vector<std::string>& sets) {
  check(bst_config_load(path.c_str(), &h.cfg));
  std::vector<std::string> all = sets;
  if (seed) all.push_back("train.seed=" + std::to_string(*seed));
  std::vector<const char*> ptrs;
  for (const auto& s : all) ptrs.push_back(s.c_str());
  check(bst_config_set_many(h.cfg, ptrs.data(), ptrs.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bst: block-sparse activation pruning toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bst_version());

  // overhead-table
  auto* ot = app.add_subcommand("overhead-table", "BSR memory overhead over ideal compression, percent");
  std::size_t ot_rows = 196, ot_cols = 384;
  std::string ot_blocks, ot_sparsities, ot_out;
  ot->add_option("--rows", ot_rows, "matrix rows")->capture_default_str();
  ot->add_option("--cols", ot_cols, "matrix columns")->capture_default_str();
  ot->add_option("--blocks", ot_blocks, "comma-separated block widths (default 1,4,8,16,32,64,128,384)");
  ot->add_option("--sparsities", ot_sparsities, "comma-separated sparsities in percent (default 0,20,...,100)");
  ot->add_option("--out", ot_out, "CSV path (default stdout)");

  // bench
  auto* bn = app.add_subcommand("bench", "BSpMM latency sweep against the dense matmul");
  std::string bn_shape = "64,196,384", bn_blocks, bn_sparsities, bn_out;
  std::size_t bn_reps = 5;
  std::uint64_t bn_seed = 0;
  bn->add_option("--shape", bn_shape, "B,P,D")->capture_default_str();
  bn->add_option("--blocks", bn_blocks, "comma-separated block widths (default 1,4,8,16,32,64)");
  bn->add_option("--sparsities", bn_sparsities, "comma-separated sparsities (default 0.1,0.3,0.5,0.7,0.9)");
  bn->add_option("--reps", bn_reps, "repetitions per cell")->capture_default_str();
  bn->add_option("--seed", bn_seed, "operand seed")->capture_default_str();
  bn->add_option("--out", bn_out, "CSV path (default stdout)");

  // train
  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string tr_config, tr_out;
  std::optional<std::uint64_t> tr_seed;
  std::vector<std::string> tr_sets;
  tr->add_option("--config", tr_config, "config file")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--seed", tr_seed, "overrides train.seed");
  tr->add_option("--set", tr_sets, "section.key=value override (repeatable)");

  // grid
  auto* gr = app.add_subcommand("grid", "dense baseline plus every (sparsity, block) cell");
  std::string gr_config, gr_out, gr_sparsities = "0,0.3,0.5,0.7,0.9", gr_blocks = "4,8,16";
  std::optional<std::uint64_t> gr_seed;
  std::vector<std::string> gr_sets;
  gr->add_option("--config", gr_config, "config file")->required();
  gr->add_option("--out", gr_out, "output directory")->required();
  gr->add_option("--sparsities", gr_sparsities, "comma-separated sparsities")->capture_default_str();
  gr->add_option("--blocks", gr_blocks, "comma-separated block widths")->capture_default_str();
  gr->add_option("--seed", gr_seed, "overrides train.seed");
  gr->add_option("--set", gr_sets, "section.key=value override (repeatable)");

  // memory-report
  auto* mr = app.add_subcommand("memory-report", "component breakdown and pruning savings without training");
  std::string mr_config, mr_out;
  std::size_t mr_batch = 0;
  bool mr_json = false;
  std::vector<std::string> mr_sets;
  mr->add_option("--config", mr_config, "config file")->required();
  mr->add_option("--batch", mr_batch, "batch size (default train.batch_size)");
  mr->add_flag("--json", mr_json, "emit JSON instead of text");
  mr->add_option("--set", mr_sets, "section.key=value override (repeatable)");
  mr->add_option("--out", mr_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", BST_ERR_INVALID_ARGUMENT, e.what(), 2);
  }

  try {
    if (*ot) {
      std::vector<std::size_t> blocks;
      std::vector<double> sp;
      if (!ot_blocks.empty()) blocks = parse_list<std::size_t>(ot_blocks, "--blocks");
      if (!ot_sparsities.empty()) sp = parse_list<double>(ot_sparsities, "--sparsities");
      char* csv = nullptr;
      check(bst_overhead_table_csv(ot_rows, ot_cols, blocks.data(), blocks.size(), sp.data(), sp.size(), &csv));
      emit(take(csv), ot_out);
    } else if (*bn) {
      auto shape = parse_list<std::size_t>(bn_shape, "--shape");
      if (shape.size() != 3) throw Failure{BST_ERR_INVALID_ARGUMENT, "--shape expects B,P,D"};
      bst_bench_options opt;
      bst_bench_options_default(&opt);
      opt.batch = shape[0];
      opt.patches = shape[1];
      opt.dim = shape[2];
      opt.reps = bn_reps;
      opt.seed = bn_seed;
      std::vector<std::size_t> blocks;
      std::vector<double> sp;
      if (!bn_blocks.empty()) blocks = parse_list<std::size_t>(bn_blocks, "--blocks");
      if (!bn_sparsities.empty()) sp = parse_list<double>(bn_sparsities, "--sparsities");
      char* csv = nullptr;
      check(bst_bench_csv(&opt, blocks.data(), blocks.size(), sp.data(), sp.size(), &csv));
      emit(take(csv), bn_out);
    } else if (*tr) {
      ConfigHandle h;
      load_config(h, tr_config, tr_seed, tr_sets);
      bst_train_summary s{};
      check(bst_train(h.cfg, tr_out.c_str(), &s));
      nlohmann::ordered_json j;
      j["steps"] = s.steps;
      j["final_loss"] = s.final_loss;
      j["train_accuracy"] = s.train_accuracy;
      j["test_accuracy"] = s.test_accuracy;
      j["out"] = tr_out;
      std::cout << j.dump() << '\n';
    } else if (*gr) {
      ConfigHandle h;
      load_config(h, gr_config, gr_seed, gr_sets);
      auto sp = parse_list<double>(gr_sparsities, "--sparsities");
      auto blocks = parse_list<std::size_t>(gr_blocks, "--blocks");
      double baseline = 0.0;
      check(bst_grid(h.cfg, sp.data(), sp.size(), blocks.data(), blocks.size(), gr_out.c_str(), &baseline));
      nlohmann::ordered_json j;
      j["baseline_test_accuracy"] = baseline;
      j["out"] = gr_out;
      std::cout << j.dump() << '\n';
    } else if (*mr) {
      ConfigHandle h;
      load_config(h, mr_config, std::nullopt, mr_sets);
      char* text = nullptr;
      check(bst_memory_report(h.cfg, mr_batch, mr_json ? 1 : 0, &text));
      emit(take(text), mr_out);
    }
  } catch (const Failure& f) {
    return report(bst_status_name(f.status), f.status, f.message, 1);
  }
  return 0;
}
