#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bst/memstat.hpp"
#include "bst/pruner.hpp"
#include "bst/sparse_ops.hpp"
#include "bst/tensor.hpp"

namespace bst::nn {

struct Param {
  Param() = default;
  Param(std::string name_, Tensor value_) : name(std::move(name_)), value(std::move(value_)), grad(Tensor::zeros_like(value)) {}

  std::string name;
  Tensor value;
  Tensor grad;
};

void zero_grads(std::span<Param> params);

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Records one forward pass for reverse-mode differentiation.
///
/// Each op appends a node holding its backward closure and whatever context
/// it saved. When a ledger is attached, saved context is logged as
/// activation memory on record and released right after the node's backward
/// has run. backward() walks the nodes in exact reverse order and can run
/// once per tape. A tape constructed with grad disabled records nothing.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(MemLedger* ledger = nullptr, bool grad_enabled = true);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// The param must outlive the tape; its grad receives the accumulated
  /// gradient at the end of backward().
  Var param(Param& p);

  const Tensor& value(Var v) const;
  /// nullptr if no gradient reached v.
  const Tensor* grad(Var v) const;
  bool requires_grad(Var v) const;
  bool grad_enabled() const { return grad_enabled_; }

  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t live_saved_activations() const { return live_saved_activations_; }
  std::size_t peak_saved_activations() const { return peak_saved_activations_; }

  // --- op construction ---------------------------------------------------
  struct SavedRecord {
    std::string label;
    std::size_t bytes = 0;
    std::size_t dense_bytes = 0;
    bool sparse_linear_input = false;
  };

  /// True when an op with these inputs must record a backward node.
  bool needs_node(std::initializer_list<Var> inputs) const;
  Var push_value(Tensor value, bool requires_grad);
  void push_node(Var output, BackwardFn fn, std::vector<SavedRecord> saved);
  void accumulate(Var v, const Tensor& g);

 private:
  struct Slot {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Param* param = nullptr;
    bool produced = false;  // output of a recorded node
  };
  struct Node {
    Var output;
    BackwardFn fn;
    std::vector<MemLedger::EntryId> ledger_ids;
    std::size_t saved_activations = 0;
  };

  void release_node(Node& node);

  MemLedger* ledger_;
  bool grad_enabled_;
  bool consumed_ = false;
  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
  std::size_t live_saved_activations_ = 0;
  std::size_t peak_saved_activations_ = 0;
};

// --- ops ---------------------------------------------------------------------
// Per-channel parameters broadcast over the trailing axis.

/// y = alpha * x + beta.
Var affine(Tape& t, Var x, Var alpha, Var beta, const std::string& label = "affine");
/// y = gamma * x (LayerScale).
Var channel_scale(Tape& t, Var x, Var gamma, const std::string& label = "scale");
/// tanh-approximated GELU.
Var gelu(Tape& t, Var x, const std::string& label = "gelu");
Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b, const std::string& label = "mul");
Var sum(Tape& t, Var x);
Var sum_squares(Tape& t, Var x, const std::string& label = "sum_squares");
/// Swaps the last two axes of a rank-3 tensor.
Var transpose_last2(Tape& t, Var x);
/// [B x P x D] -> [B x D], mean over P.
Var mean_over_patches(Tape& t, Var x);
/// Linear layer with pruned activation storage. cfg = nullopt is a plain
/// dense linear layer.
Var sparse_linear(Tape& t, Var x, Var weight, Var bias, const std::optional<PruneConfig>& cfg,
                  const std::string& label = "linear");
/// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Tape& t, Var logits, std::span<const std::int32_t> labels, const std::string& label = "cross_entropy");

float gelu_value(float x);
float gelu_derivative(float x);

// --- optimizers --------------------------------------------------------------

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step() = 0;
  virtual std::size_t state_bytes() const = 0;
  virtual void set_learning_rate(float lr) = 0;
};

struct SgdConfig {
  float lr = 0.05f;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
};

/// v = momentum * v + (g + weight_decay * w);  w -= lr * v
class SgdMomentum final : public Optimizer {
 public:
  SgdMomentum(std::span<Param> params, SgdConfig cfg);
  void step() override;
  std::size_t state_bytes() const override;
  void set_learning_rate(float lr) override { cfg_.lr = lr; }

 private:
  std::span<Param> params_;
  SgdConfig cfg_;
  std::vector<std::vector<float>> velocity_;
};

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;
};

/// Adam with bias correction; weight decay is decoupled (AdamW style).
class Adam final : public Optimizer {
 public:
  Adam(std::span<Param> params, AdamConfig cfg);
  void step() override;
  std::size_t state_bytes() const override;
  void set_learning_rate(float lr) override { cfg_.lr = lr; }

 private:
  std::span<Param> params_;
  AdamConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace bst::nn
