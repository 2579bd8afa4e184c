#include <cmath>

#include "bst/error.hpp"
#include "bst/nn.hpp"

namespace bst::nn {

SgdMomentum::SgdMomentum(std::span<Param> params, SgdConfig cfg) : params_(params), cfg_(cfg) {
  velocity_.reserve(params.size());
  for (const Param& p : params) velocity_.emplace_back(p.value.numel(), 0.0f);
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].value.data();
    auto g = params_[i].grad.data();
    auto& v = velocity_[i];
    if (g.size() != w.size()) throw StateError("gradient of '" + params_[i].name + "' not populated");
    for (std::size_t j = 0; j < w.size(); ++j) {
      const float grad = g[j] + cfg_.weight_decay * w[j];
      v[j] = cfg_.momentum * v[j] + grad;
      w[j] -= cfg_.lr * v[j];
    }
  }
}

std::size_t SgdMomentum::state_bytes() const {
  std::size_t n = 0;
  for (const auto& v : velocity_) n += v.size();
  return cfg_.momentum == 0.0f ? 0 : n * sizeof(float);
}

Adam::Adam(std::span<Param> params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Param& p : params) {
    m_.emplace_back(p.value.numel(), 0.0f);
    v_.emplace_back(p.value.numel(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].value.data();
    auto g = params_[i].grad.data();
    if (g.size() != w.size()) throw StateError("gradient of '" + params_[i].name + "' not populated");
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g[j] * g[j];
      const float mhat = static_cast<float>(m[j] / bc1);
      const float vhat = static_cast<float>(v[j] / bc2);
      w[j] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[j]);
    }
  }
}

std::size_t Adam::state_bytes() const {
  std::size_t n = 0;
  for (const auto& m : m_) n += m.size();
  return 2 * n * sizeof(float);
}

}  // namespace bst::nn
