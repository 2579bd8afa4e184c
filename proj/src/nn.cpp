#include "bst/nn.hpp"

#include <algorithm>
#include <cmath>

#include "bst/error.hpp"

namespace bst::nn {

void zero_grads(std::span<Param> params) {
  for (Param& p : params) {
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor::zeros_like(p.value);
    std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0f);
  }
}

// --- Tape --------------------------------------------------------------------

Tape::Tape(MemLedger* ledger, bool grad_enabled) : ledger_(ledger), grad_enabled_(grad_enabled) {}

Tape::~Tape() {
  for (Node& node : nodes_) {
    try {
      release_node(node);
    } catch (...) {
    }
  }
}

Var Tape::constant(Tensor value) { return push_value(std::move(value), false); }

Var Tape::param(Param& p) {
  Slot slot;
  slot.requires_grad = grad_enabled_;
  slot.param = &p;
  slots_.push_back(std::move(slot));
  return Var{slots_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  if (!v.valid() || v.id >= slots_.size()) throw StateError("unknown tape variable");
  const Slot& s = slots_[v.id];
  return s.param != nullptr ? s.param->value : s.value;
}

const Tensor* Tape::grad(Var v) const {
  if (!v.valid() || v.id >= slots_.size()) throw StateError("unknown tape variable");
  const Slot& s = slots_[v.id];
  return s.has_grad ? &s.grad : nullptr;
}

bool Tape::requires_grad(Var v) const {
  if (!v.valid() || v.id >= slots_.size()) throw StateError("unknown tape variable");
  return slots_[v.id].requires_grad;
}

bool Tape::needs_node(std::initializer_list<Var> inputs) const {
  if (!grad_enabled_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return requires_grad(v); });
}

Var Tape::push_value(Tensor value, bool requires_grad) {
  Slot slot;
  slot.value = std::move(value);
  slot.requires_grad = requires_grad && grad_enabled_;
  slots_.push_back(std::move(slot));
  return Var{slots_.size() - 1};
}

void Tape::push_node(Var output, BackwardFn fn, std::vector<SavedRecord> saved) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  Node node;
  node.output = output;
  node.fn = std::move(fn);
  for (auto& rec : saved) {
    if (ledger_ != nullptr) {
      node.ledger_ids.push_back(
          ledger_->allocate(Component::kActivations, std::move(rec.label), rec.bytes, rec.dense_bytes));
    }
    if (rec.sparse_linear_input) ++node.saved_activations;
  }
  live_saved_activations_ += node.saved_activations;
  peak_saved_activations_ = std::max(peak_saved_activations_, live_saved_activations_);
  slots_[output.id].produced = true;
  nodes_.push_back(std::move(node));
}

void Tape::accumulate(Var v, const Tensor& g) {
  Slot& s = slots_.at(v.id);
  if (!s.requires_grad) return;
  const Tensor& val = s.param != nullptr ? s.param->value : s.value;
  if (g.shape() != val.shape()) {
    throw DimensionError("gradient shape " + shape_to_string(g.shape()) + " does not match value shape " +
                         shape_to_string(val.shape()));
  }
  if (!s.has_grad) {
    s.grad = g;
    s.has_grad = true;
    return;
  }
  auto dst = s.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::release_node(Node& node) {
  if (ledger_ != nullptr) {
    for (auto id : node.ledger_ids) ledger_->release(id);
  }
  node.ledger_ids.clear();
  live_saved_activations_ -= node.saved_activations;
  node.saved_activations = 0;
  node.fn = nullptr;
}

void Tape::backward(Var loss) {
  if (consumed_) throw StateError("backward() already ran on this tape");
  if (!loss.valid() || loss.id >= slots_.size()) throw StateError("backward(): unknown loss variable");
  Slot& ls = slots_[loss.id];
  if (!ls.produced) throw StateError("backward before forward: loss was not produced by a recorded op");
  if (ls.value.numel() != 1) throw DimensionError("backward(): loss must be a scalar");
  consumed_ = true;
  ls.grad = Tensor(ls.value.shape(), 1.0f);
  ls.has_grad = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Slot& out = slots_[it->output.id];
    if (out.has_grad && it->fn) {
      Tensor g = out.grad;
      it->fn(*this, g);
    }
    release_node(*it);
  }
  for (Slot& s : slots_) {
    if (s.param == nullptr || !s.has_grad) continue;
    auto dst = s.param->grad.data();
    auto src = s.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

// --- ops ---------------------------------------------------------------------

namespace {

const Tensor& channel_vector(const Tape& t, Var v, std::size_t channels, const char* what) {
  const Tensor& p = t.value(v);
  if (p.rank() != 1 || p.dim(0) != channels) {
    throw DimensionError(std::string(what) + ": expected per-channel vector of " + std::to_string(channels) +
                         ", got " + shape_to_string(p.shape()));
  }
  return p;
}

std::size_t bytes_of(const Tensor& t) { return t.numel() * sizeof(float); }

}  // namespace

Var affine(Tape& t, Var x, Var alpha, Var beta, const std::string& label) {
  const Tensor& xv = t.value(x);
  const std::size_t d = xv.cols(), rows = xv.rows();
  const Tensor& a = channel_vector(t, alpha, d, "affine alpha");
  const Tensor& b = channel_vector(t, beta, d, "affine beta");
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) y[r * d + c] = a[c] * xv[r * d + c] + b[c];
  const std::size_t saved = bytes_of(xv);
  const bool rec = t.needs_node({x, alpha, beta});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(
        out,
        [x, alpha, beta, d, rows](Tape& tp, const Tensor& dy) {
          const Tensor& xv = tp.value(x);
          const Tensor& a = tp.value(alpha);
          Tensor dx(xv.shape()), da({d}), db({d});
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              const float g = dy[r * d + c];
              dx[r * d + c] = a[c] * g;
              da[c] += xv[r * d + c] * g;
              db[c] += g;
            }
          }
          tp.accumulate(x, dx);
          tp.accumulate(alpha, da);
          tp.accumulate(beta, db);
        },
        {{label + ".input", saved, saved, false}});
  }
  return out;
}

Var channel_scale(Tape& t, Var x, Var gamma, const std::string& label) {
  const Tensor& xv = t.value(x);
  const std::size_t d = xv.cols(), rows = xv.rows();
  const Tensor& g = channel_vector(t, gamma, d, "scale gamma");
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) y[r * d + c] = g[c] * xv[r * d + c];
  const std::size_t saved = bytes_of(xv);
  const bool rec = t.needs_node({x, gamma});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(
        out,
        [x, gamma, d, rows](Tape& tp, const Tensor& dy) {
          const Tensor& xv = tp.value(x);
          const Tensor& gv = tp.value(gamma);
          Tensor dx(xv.shape()), dg({d});
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              const float gr = dy[r * d + c];
              dx[r * d + c] = gv[c] * gr;
              dg[c] += xv[r * d + c] * gr;
            }
          }
          tp.accumulate(x, dx);
          tp.accumulate(gamma, dg);
        },
        {{label + ".input", saved, saved, false}});
  }
  return out;
}

namespace {
constexpr float kSqrt2OverPi = 0.7978845608028654f;
constexpr float kGeluCubic = 0.044715f;
}  // namespace

float gelu_value(float x) {
  const float inner = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

float gelu_derivative(float x) {
  const float inner = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
  const float th = std::tanh(inner);
  const float dinner = kSqrt2OverPi * (1.0f + 3.0f * kGeluCubic * x * x);
  return 0.5f * (1.0f + th) + 0.5f * x * (1.0f - th * th) * dinner;
}

Var gelu(Tape& t, Var x, const std::string& label) {
  const Tensor& xv = t.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = gelu_value(xv[i]);
  const std::size_t saved = bytes_of(xv);
  const bool rec = t.needs_node({x});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(
        out,
        [x](Tape& tp, const Tensor& dy) {
          const Tensor& xv = tp.value(x);
          Tensor dx(xv.shape());
          for (std::size_t i = 0; i < xv.numel(); ++i) dx[i] = gelu_derivative(xv[i]) * dy[i];
          tp.accumulate(x, dx);
        },
        {{label + ".input", saved, saved, false}});
  }
  return out;
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw DimensionError("add: shapes " + shape_to_string(av.shape()) + " and " + shape_to_string(bv.shape()));
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += bv[i];
  const bool rec = t.needs_node({a, b});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(
        out,
        [a, b](Tape& tp, const Tensor& dy) {
          tp.accumulate(a, dy);
          tp.accumulate(b, dy);
        },
        {});
  }
  return out;
}

Var mul(Tape& t, Var a, Var b, const std::string& label) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) {
    throw DimensionError("mul: shapes " + shape_to_string(av.shape()) + " and " + shape_to_string(bv.shape()));
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= bv[i];
  const std::size_t saved = bytes_of(av) + bytes_of(bv);
  const bool rec = t.needs_node({a, b});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(
        out,
        [a, b](Tape& tp, const Tensor& dy) {
          const Tensor& av = tp.value(a);
          const Tensor& bv = tp.value(b);
          Tensor da(av.shape()), db(bv.shape());
          for (std::size_t i = 0; i < dy.numel(); ++i) {
            da[i] = dy[i] * bv[i];
            db[i] = dy[i] * av[i];
          }
          tp.accumulate(a, da);
          tp.accumulate(b, db);
        },
        {{label + ".operands", saved, saved, false}});
  }
  return out;
}

Var sum(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  double acc = 0.0;
  for (float v : xv.data()) acc += v;
  const bool rec = t.needs_node({x});
  Var out = t.push_value(Tensor({1}, static_cast<float>(acc)), rec);
  if (rec) {
    t.push_node(
        out,
        [x](Tape& tp, const Tensor& dy) { tp.accumulate(x, Tensor(tp.value(x).shape(), dy[0])); }, {});
  }
  return out;
}

Var sum_squares(Tape& t, Var x, const std::string& label) {
  const Tensor& xv = t.value(x);
  double acc = 0.0;
  for (float v : xv.data()) acc += static_cast<double>(v) * v;
  const std::size_t saved = bytes_of(xv);
  const bool rec = t.needs_node({x});
  Var out = t.push_value(Tensor({1}, static_cast<float>(acc)), rec);
  if (rec) {
    t.push_node(
        out,
        [x](Tape& tp, const Tensor& dy) {
          const Tensor& xv = tp.value(x);
          Tensor dx(xv.shape());
          for (std::size_t i = 0; i < xv.numel(); ++i) dx[i] = 2.0f * xv[i] * dy[0];
          tp.accumulate(x, dx);
        },
        {{label + ".input", saved, saved, false}});
  }
  return out;
}

Var transpose_last2(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  if (xv.rank() != 3) throw DimensionError("transpose_last2 expects rank 3, got " + shape_to_string(xv.shape()));
  Tensor y = transpose2d(xv);
  const bool rec = t.needs_node({x});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(out, [x](Tape& tp, const Tensor& dy) { tp.accumulate(x, transpose2d(dy)); }, {});
  }
  return out;
}

Var mean_over_patches(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  if (xv.rank() != 3) throw DimensionError("mean_over_patches expects [B x P x D], got " + shape_to_string(xv.shape()));
  const std::size_t b = xv.dim(0), p = xv.dim(1), d = xv.dim(2);
  Tensor y({b, d});
  const float inv = 1.0f / static_cast<float>(p);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t c = 0; c < d; ++c) y.at(i, c) += xv.at(i, j, c);
    for (std::size_t c = 0; c < d; ++c) y.at(i, c) *= inv;
  }
  const bool rec = t.needs_node({x});
  Var out = t.push_value(std::move(y), rec);
  if (rec) {
    t.push_node(
        out,
        [x, b, p, d, inv](Tape& tp, const Tensor& dy) {
          Tensor dx({b, p, d});
          for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < p; ++j)
              for (std::size_t c = 0; c < d; ++c) dx.at(i, j, c) = dy.at(i, c) * inv;
          tp.accumulate(x, dx);
        },
        {});
  }
  return out;
}

Var sparse_linear(Tape& t, Var x, Var weight, Var bias, const std::optional<PruneConfig>& cfg,
                  const std::string& label) {
  const bool rec = t.needs_node({x, weight, bias});
  if (!rec) {
    Tensor y = linear_dense(t.value(x), t.value(weight), t.value(bias));
    return t.push_value(std::move(y), false);
  }
  LinearForward fwd = sparse_linear_forward(t.value(x), t.value(weight), t.value(bias), cfg);
  Tape::SavedRecord record{label + ".input", fwd.saved.stored_bytes(), fwd.saved.dense_bytes(), true};
  Var out = t.push_value(std::move(fwd.y), true);
  auto saved = std::make_shared<SavedActivation>(std::move(fwd.saved));
  t.push_node(
      out,
      [x, weight, bias, saved](Tape& tp, const Tensor& dy) {
        LinearGrads g = sparse_linear_backward(dy, *saved, tp.value(weight));
        tp.accumulate(x, g.dx);
        tp.accumulate(weight, g.dweight);
        tp.accumulate(bias, g.dbias);
      },
      {std::move(record)});
  return out;
}

Var cross_entropy(Tape& t, Var logits, std::span<const std::int32_t> labels, const std::string& label) {
  const Tensor& z = t.value(logits);
  if (z.rank() != 2 || z.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits " + shape_to_string(z.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = z.dim(0), k = z.dim(1);
  for (std::int32_t y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw InvalidArgument("label " + std::to_string(y) + " out of range for " + std::to_string(k) + " classes");
    }
  }
  Tensor probs({b, k});
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    float mx = z.at(i, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, z.at(i, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(static_cast<double>(z.at(i, c) - mx));
    for (std::size_t c = 0; c < k; ++c) {
      probs.at(i, c) = static_cast<float>(std::exp(static_cast<double>(z.at(i, c) - mx)) / denom);
    }
    total += std::log(denom) - static_cast<double>(z.at(i, static_cast<std::size_t>(labels[i])) - mx);
  }
  const bool rec = t.needs_node({logits});
  Var out = t.push_value(Tensor({1}, static_cast<float>(total / static_cast<double>(b))), rec);
  if (rec) {
    const std::size_t saved = bytes_of(probs);
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    t.push_node(
        out,
        [logits, probs = std::move(probs), lab = std::move(lab), b, k](Tape& tp, const Tensor& dy) {
          Tensor dz({b, k});
          const float scale = dy[0] / static_cast<float>(b);
          for (std::size_t i = 0; i < b; ++i) {
            for (std::size_t c = 0; c < k; ++c) {
              float g = probs.at(i, c);
              if (static_cast<std::int32_t>(c) == lab[i]) g -= 1.0f;
              dz.at(i, c) = g * scale;
            }
          }
          tp.accumulate(logits, dz);
        },
        {{label + ".softmax", saved, saved, false}});
  }
  return out;
}

}  // namespace bst::nn
