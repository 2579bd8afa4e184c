#pragma once

// Independent double-precision forward pass of the ResMLP stack, written
// from the layer equations rather than from the library's ops. Used as the
// finite-difference oracle for gradient checks.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bst/resmlp.hpp"

namespace bst::reftest {

struct RefTensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;
};

using RefParams = std::map<std::string, RefTensor>;

inline RefParams to_ref(const std::vector<nn::Param>& params) {
  RefParams out;
  for (const auto& p : params) {
    RefTensor t;
    t.shape = p.value.shape();
    t.v.assign(p.value.data().begin(), p.value.data().end());
    out[p.name] = std::move(t);
  }
  return out;
}

inline double ref_gelu(double x) {
  const double c = std::sqrt(2.0 / 3.14159265358979323846);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

// rows: vectors of length in; W [out x in]; returns rows of length out.
inline std::vector<double> ref_linear(const std::vector<double>& x, std::size_t rows, std::size_t in,
                                      const RefTensor& w, const RefTensor& b) {
  const std::size_t out = w.shape[0];
  std::vector<double> y(rows * out);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b.v[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * w.v[o * in + i];
      y[r * out + o] = acc;
    }
  return y;
}

/// Mean cross-entropy of the model on images [B x C x H x W] (float data).
inline double ref_loss(const ModelConfig& cfg, const RefParams& P, const std::vector<float>& images, std::size_t batch,
                       const std::vector<std::int32_t>& labels) {
  const std::size_t c = cfg.channels, h = cfg.height, w = cfg.width, ps = cfg.patch_size;
  const std::size_t pw = w / ps, np = cfg.num_patches(), feat = cfg.patch_features(), d = cfg.hidden_dim;
  const std::size_t hd = cfg.mlp_dim();
  // patches, channel values of one pixel adjacent
  std::vector<double> patches(batch * np * feat);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t p = 0; p < np; ++p) {
      const std::size_t pi = p / pw, pj = p % pw;
      for (std::size_t u = 0; u < ps; ++u)
        for (std::size_t v = 0; v < ps; ++v)
          for (std::size_t ch = 0; ch < c; ++ch) {
            patches[(n * np + p) * feat + (u * ps + v) * c + ch] =
                images[((n * c + ch) * h + pi * ps + u) * w + pj * ps + v];
          }
    }
  auto x = ref_linear(patches, batch * np, feat, P.at("embed.weight"), P.at("embed.bias"));

  for (std::size_t blk = 0; blk < cfg.depth; ++blk) {
    const std::string pre = "block" + std::to_string(blk) + ".";
    const auto& a1 = P.at(pre + "affine1.alpha");
    const auto& b1 = P.at(pre + "affine1.beta");
    // transposed affine output: [B][D][P]
    std::vector<double> t(batch * d * np);
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t p = 0; p < np; ++p)
        for (std::size_t k = 0; k < d; ++k) t[(n * d + k) * np + p] = a1.v[k] * x[(n * np + p) * d + k] + b1.v[k];
    auto mixed = ref_linear(t, batch * d, np, P.at(pre + "cross_patch.weight"), P.at(pre + "cross_patch.bias"));
    const auto& ls1 = P.at(pre + "layerscale1");
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t p = 0; p < np; ++p)
        for (std::size_t k = 0; k < d; ++k) x[(n * np + p) * d + k] += ls1.v[k] * mixed[(n * d + k) * np + p];

    const auto& a2 = P.at(pre + "affine2.alpha");
    const auto& b2 = P.at(pre + "affine2.beta");
    std::vector<double> z(batch * np * d);
    for (std::size_t r = 0; r < batch * np; ++r)
      for (std::size_t k = 0; k < d; ++k) z[r * d + k] = a2.v[k] * x[r * d + k] + b2.v[k];
    auto hid = ref_linear(z, batch * np, d, P.at(pre + "fc1.weight"), P.at(pre + "fc1.bias"));
    for (double& e : hid) e = ref_gelu(e);
    auto m = ref_linear(hid, batch * np, hd, P.at(pre + "fc2.weight"), P.at(pre + "fc2.bias"));
    const auto& ls2 = P.at(pre + "layerscale2");
    for (std::size_t r = 0; r < batch * np; ++r)
      for (std::size_t k = 0; k < d; ++k) x[r * d + k] += ls2.v[k] * m[r * d + k];
  }

  std::vector<double> pooled(batch * d, 0.0);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t k = 0; k < d; ++k) pooled[n * d + k] += x[(n * np + p) * d + k] / static_cast<double>(np);
  const auto& fa = P.at("final_affine.alpha");
  const auto& fb = P.at("final_affine.beta");
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t k = 0; k < d; ++k) pooled[n * d + k] = fa.v[k] * pooled[n * d + k] + fb.v[k];
  auto logits = ref_linear(pooled, batch, d, P.at("head.weight"), P.at("head.bias"));

  const std::size_t classes = cfg.num_classes;
  double loss = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    double mx = logits[n * classes];
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, logits[n * classes + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < classes; ++j) s += std::exp(logits[n * classes + j] - mx);
    loss += -(logits[n * classes + static_cast<std::size_t>(labels[n])] - mx - std::log(s));
  }
  return loss / static_cast<double>(batch);
}

}  // namespace bst::reftest
