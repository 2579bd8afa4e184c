#include "bst/memstat.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "bst/error.hpp"

namespace bst {

const char* component_name(Component c) {
  switch (c) {
    case Component::kInput: return "input";
    case Component::kModel: return "model";
    case Component::kOptimizer: return "optimizer";
    case Component::kActivations: return "activations";
  }
  return "unknown";
}

MemLedger::EntryId MemLedger::allocate(Component component, std::string label, std::size_t bytes,
                                       std::size_t dense_bytes) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto c = static_cast<std::size_t>(component);
  entries_.push_back(LedgerEntry{component, std::move(label), bytes, dense_bytes, ++clock_, std::nullopt});
  current_[c] += bytes;
  peak_[c] = std::max(peak_[c], current_[c]);
  ++live_[c];
  peak_live_[c] = std::max(peak_live_[c], live_[c]);
  current_total_ += bytes;
  peak_total_ = std::max(peak_total_, current_total_);
  return entries_.size() - 1;
}

void MemLedger::release(EntryId id) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (id >= entries_.size()) throw StateError("release of unknown ledger entry " + std::to_string(id));
  LedgerEntry& e = entries_[id];
  if (e.released_at) throw StateError("ledger entry '" + e.label + "' released twice");
  e.released_at = ++clock_;
  const auto c = static_cast<std::size_t>(e.component);
  current_[c] -= e.bytes;
  --live_[c];
  current_total_ -= e.bytes;
}

std::size_t MemLedger::current_bytes(Component c) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return current_[static_cast<std::size_t>(c)];
}
std::size_t MemLedger::peak_bytes(Component c) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return peak_[static_cast<std::size_t>(c)];
}
std::size_t MemLedger::current_total() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return current_total_;
}
std::size_t MemLedger::peak_total() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return peak_total_;
}
std::size_t MemLedger::live_entries(Component c) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return live_[static_cast<std::size_t>(c)];
}
std::size_t MemLedger::peak_live_entries(Component c) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return peak_live_[static_cast<std::size_t>(c)];
}
std::vector<LedgerEntry> MemLedger::entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_;
}
bool MemLedger::empty() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.empty();
}

MemLedger::EntryId record_activation(MemLedger& ledger, std::string label, const SavedActivation& saved) {
  return ledger.allocate(Component::kActivations, std::move(label), saved.stored_bytes(), saved.dense_bytes());
}

// --- reports -----------------------------------------------------------------

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

double round_to(double v, double unit) { return std::round(v / unit) * unit; }

}  // namespace

ComponentBreakdown component_breakdown(const MemLedger& ledger) {
  if (ledger.empty()) throw StateError("component breakdown of an empty ledger");
  ComponentBreakdown b;
  for (Component c : kAllComponents) {
    auto& row = b.rows[static_cast<std::size_t>(c)];
    row.component = c;
    row.peak_bytes = ledger.peak_bytes(c);
    row.mib = static_cast<double>(row.peak_bytes) / kMiB;
    b.total_bytes += row.peak_bytes;
  }
  b.total_mib = static_cast<double>(b.total_bytes) / kMiB;
  for (auto& row : b.rows) {
    row.percent = b.total_bytes ? 100.0 * static_cast<double>(row.peak_bytes) / static_cast<double>(b.total_bytes) : 0.0;
  }
  return b;
}

std::string breakdown_text(const ComponentBreakdown& b) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %14s %12s %8s\n", "component", "peak_bytes", "MiB", "%");
  os << line;
  for (const auto& row : b.rows) {
    std::snprintf(line, sizeof(line), "%-12s %14zu %12.1f %8.1f\n", component_name(row.component), row.peak_bytes,
                  row.mib, row.percent);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-12s %14zu %12.1f %8.1f\n", "total", b.total_bytes, b.total_mib, 100.0);
  os << line;
  return os.str();
}

std::string breakdown_json(const ComponentBreakdown& b) {
  nlohmann::ordered_json j;
  j["schema"] = "bst.component_breakdown/1";
  auto& comps = j["components"];
  comps = nlohmann::ordered_json::array();
  for (const auto& row : b.rows) {
    comps.push_back({{"component", component_name(row.component)},
                     {"peak_bytes", row.peak_bytes},
                     {"mib", round_to(row.mib, 1e-4)},
                     {"percent", round_to(row.percent, 1e-4)}});
  }
  j["total_bytes"] = b.total_bytes;
  j["total_mib"] = round_to(b.total_mib, 1e-4);
  return j.dump(2);
}

bool site_eligible(const ActivationSite& site, const std::optional<PruneConfig>& cfg) {
  return site.prunable && cfg.has_value() && cfg->block_cols != 0 && site.cols % cfg->block_cols == 0;
}

SavingsReport savings_report(std::span<const ActivationSite> census, const std::optional<PruneConfig>& cfg) {
  if (cfg) validate_prune_config(*cfg);
  SavingsReport r;
  r.cfg = cfg;
  std::size_t eligible_dense = 0;
  for (const auto& site : census) {
    LayerSavings layer;
    layer.label = site.label;
    layer.dense_bytes = site.dense_bytes();
    layer.eligible = site_eligible(site, cfg);
    layer.compressed_bytes =
        layer.eligible ? pruned_bsr_size(site.samples, site.rows, site.cols, *cfg).total_bytes() : layer.dense_bytes;
    if (layer.eligible) eligible_dense += layer.dense_bytes;
    r.total_dense_bytes += layer.dense_bytes;
    r.total_compressed_bytes += layer.compressed_bytes;
    r.layers.push_back(std::move(layer));
  }
  r.delta_bytes = static_cast<std::int64_t>(r.total_compressed_bytes) - static_cast<std::int64_t>(r.total_dense_bytes);
  if (r.total_dense_bytes != 0) {
    const double dense = static_cast<double>(r.total_dense_bytes);
    r.delta_percent = 100.0 * static_cast<double>(r.delta_bytes) / dense;
    r.eligible_fraction = static_cast<double>(eligible_dense) / dense;
  }
  return r;
}

std::string savings_text(const SavingsReport& r) {
  std::ostringstream os;
  os << "config: ";
  if (r.cfg) {
    os << "sparsity=" << fmt("%.3g", r.cfg->sparsity) << " block=" << r.cfg->block_cols;
  } else {
    os << "dense";
  }
  os << '\n';
  char line[200];
  std::snprintf(line, sizeof(line), "%-28s %14s %14s %9s\n", "layer", "dense_bytes", "stored_bytes", "eligible");
  os << line;
  for (const auto& l : r.layers) {
    std::snprintf(line, sizeof(line), "%-28s %14zu %14zu %9s\n", l.label.c_str(), l.dense_bytes, l.compressed_bytes,
                  l.eligible ? "yes" : "no");
    os << line;
  }
  std::snprintf(line, sizeof(line),
                "activations: dense %.1f MiB, stored %.1f MiB, delta %.1f MiB (%.1f%%), eligible fraction %.3f\n",
                static_cast<double>(r.total_dense_bytes) / kMiB, static_cast<double>(r.total_compressed_bytes) / kMiB,
                static_cast<double>(r.delta_bytes) / kMiB, r.delta_percent, r.eligible_fraction);
  os << line;
  return os.str();
}

std::string savings_json(const SavingsReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = "bst.savings_report/1";
  if (r.cfg) {
    j["prune"] = {{"sparsity", r.cfg->sparsity}, {"block", r.cfg->block_cols}};
  } else {
    j["prune"] = nullptr;
  }
  auto& layers = j["layers"];
  layers = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"label", l.label},
                      {"dense_bytes", l.dense_bytes},
                      {"stored_bytes", l.compressed_bytes},
                      {"eligible", l.eligible}});
  }
  j["total_dense_bytes"] = r.total_dense_bytes;
  j["total_stored_bytes"] = r.total_compressed_bytes;
  j["dense_mib"] = round_to(static_cast<double>(r.total_dense_bytes) / kMiB, 1e-4);
  j["stored_mib"] = round_to(static_cast<double>(r.total_compressed_bytes) / kMiB, 1e-4);
  j["delta_bytes"] = r.delta_bytes;
  j["delta_mib"] = round_to(static_cast<double>(r.delta_bytes) / kMiB, 1e-4);
  j["delta_percent"] = round_to(r.delta_percent, 1e-4);
  j["eligible_fraction"] = round_to(r.eligible_fraction, 1e-6);
  return j.dump(2);
}

}  // namespace bst
