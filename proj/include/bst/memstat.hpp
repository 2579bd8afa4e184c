#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bst/pruner.hpp"
#include "bst/sparse_ops.hpp"

namespace bst {

enum class Component : std::uint8_t { kInput = 0, kModel = 1, kOptimizer = 2, kActivations = 3 };
inline constexpr std::array<Component, 4> kAllComponents = {Component::kInput, Component::kModel,
                                                             Component::kOptimizer, Component::kActivations};
const char* component_name(Component c);

inline constexpr double kMiB = 1024.0 * 1024.0;

struct LedgerEntry {
  Component component = Component::kActivations;
  std::string label;
  std::size_t bytes = 0;
  std::size_t dense_bytes = 0;
  std::uint64_t allocated_at = 0;
  std::optional<std::uint64_t> released_at;
};

/// Logical allocation log. Every allocation and release is stamped with a
/// sequence number; current and peak bytes are tracked per component and for
/// the sum. Safe for concurrent writers.
class MemLedger {
 public:
  using EntryId = std::size_t;

  EntryId allocate(Component component, std::string label, std::size_t bytes, std::size_t dense_bytes);
  EntryId allocate(Component component, std::string label, std::size_t bytes) {
    return allocate(component, std::move(label), bytes, bytes);
  }
  /// Throws StateError on unknown or already released ids.
  void release(EntryId id);

  std::size_t current_bytes(Component c) const;
  std::size_t peak_bytes(Component c) const;
  std::size_t current_total() const;
  std::size_t peak_total() const;
  std::size_t live_entries(Component c) const;
  std::size_t peak_live_entries(Component c) const;
  std::vector<LedgerEntry> entries() const;
  bool empty() const;

 private:
  mutable std::mutex mutex_;
  std::vector<LedgerEntry> entries_;
  std::array<std::size_t, 4> current_{};
  std::array<std::size_t, 4> peak_{};
  std::array<std::size_t, 4> live_{};
  std::array<std::size_t, 4> peak_live_{};
  std::size_t current_total_ = 0;
  std::size_t peak_total_ = 0;
  std::uint64_t clock_ = 0;
};

/// Logs the bytes the saved activation actually holds (values + indices when
/// compressed), together with its dense-equivalent size.
MemLedger::EntryId record_activation(MemLedger& ledger, std::string label, const SavedActivation& saved);

struct BreakdownRow {
  Component component = Component::kInput;
  std::size_t peak_bytes = 0;
  double mib = 0.0;
  double percent = 0.0;
};

struct ComponentBreakdown {
  std::array<BreakdownRow, 4> rows{};
  std::size_t total_bytes = 0;
  double total_mib = 0.0;
  const BreakdownRow& row(Component c) const { return rows[static_cast<std::size_t>(c)]; }
};

/// Peak bytes per component, and each component's share of their sum.
ComponentBreakdown component_breakdown(const MemLedger& ledger);
std::string breakdown_text(const ComponentBreakdown& b);
std::string breakdown_json(const ComponentBreakdown& b);

/// One tensor retained for the backward pass, described by shape. Rows and
/// cols are per sample; cols is the trailing extent along which blocks run.
struct ActivationSite {
  std::string label;
  std::size_t samples = 1;
  std::size_t rows = 1;
  std::size_t cols = 1;
  bool prunable = false;  // input of a sparse linear layer

  std::size_t dense_bytes() const { return samples * rows * cols * sizeof(float); }
};

struct LayerSavings {
  std::string label;
  std::size_t dense_bytes = 0;
  std::size_t compressed_bytes = 0;
  bool eligible = false;
};

/// Dense vs compressed activation bytes: delta_bytes = compressed - dense, so savings
/// are negative.
struct SavingsReport {
  std::optional<PruneConfig> cfg;
  std::vector<LayerSavings> layers;
  std::size_t total_dense_bytes = 0;
  std::size_t total_compressed_bytes = 0;
  std::int64_t delta_bytes = 0;
  double delta_percent = 0.0;
  /// Share of dense activation bytes held by eligible layers.
  double eligible_fraction = 0.0;
};

/// A site is eligible when it is prunable, a config is given and the block
/// size divides its trailing extent.
bool site_eligible(const ActivationSite& site, const std::optional<PruneConfig>& cfg);

SavingsReport savings_report(std::span<const ActivationSite> census, const std::optional<PruneConfig>& cfg);
std::string savings_text(const SavingsReport& r);
std::string savings_json(const SavingsReport& r);

}  // namespace bst
