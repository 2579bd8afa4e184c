#include "bst/resmlp.hpp"

#include <cmath>

#include "bst/error.hpp"

namespace bst {

ModelConfig ModelConfig::s12_imagenet() {
  ModelConfig c;
  c.channels = 3;
  c.height = c.width = 224;
  c.patch_size = 16;
  c.hidden_dim = 384;
  c.mlp_ratio = 4;
  c.depth = 12;
  c.num_classes = 1000;
  return c;
}

void validate_model_config(const ModelConfig& cfg) {
  auto fail = [](const std::string& m) { throw InvalidArgument("model config: " + m); };
  if (cfg.channels == 0 || cfg.height == 0 || cfg.width == 0) fail("image extents must be positive");
  if (cfg.patch_size == 0) fail("patch_size must be positive");
  if (cfg.height % cfg.patch_size != 0 || cfg.width % cfg.patch_size != 0) {
    fail("patch_size " + std::to_string(cfg.patch_size) + " does not divide image " + std::to_string(cfg.height) +
         "x" + std::to_string(cfg.width));
  }
  if (cfg.hidden_dim == 0) fail("hidden_dim must be positive");
  if (cfg.mlp_ratio == 0) fail("mlp_ratio must be positive");
  if (cfg.num_classes == 0) fail("num_classes must be positive");
  if (cfg.prune) validate_prune_config(*cfg.prune);
}

namespace {

std::string block_name(std::size_t i, const char* leaf) { return "block" + std::to_string(i) + "." + leaf; }

}  // namespace

std::vector<ParamSpec> describe_params(const ModelConfig& cfg) {
  validate_model_config(cfg);
  const std::size_t d = cfg.hidden_dim, p = cfg.num_patches(), h = cfg.mlp_dim();
  std::vector<ParamSpec> out;
  out.push_back({"embed.weight", {d, cfg.patch_features()}});
  out.push_back({"embed.bias", {d}});
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    out.push_back({block_name(i, "affine1.alpha"), {d}});
    out.push_back({block_name(i, "affine1.beta"), {d}});
    out.push_back({block_name(i, "cross_patch.weight"), {p, p}});
    out.push_back({block_name(i, "cross_patch.bias"), {p}});
    out.push_back({block_name(i, "layerscale1"), {d}});
    out.push_back({block_name(i, "affine2.alpha"), {d}});
    out.push_back({block_name(i, "affine2.beta"), {d}});
    out.push_back({block_name(i, "fc1.weight"), {h, d}});
    out.push_back({block_name(i, "fc1.bias"), {h}});
    out.push_back({block_name(i, "fc2.weight"), {d, h}});
    out.push_back({block_name(i, "fc2.bias"), {d}});
    out.push_back({block_name(i, "layerscale2"), {d}});
  }
  out.push_back({"final_affine.alpha", {d}});
  out.push_back({"final_affine.beta", {d}});
  out.push_back({"head.weight", {cfg.num_classes, d}});
  out.push_back({"head.bias", {cfg.num_classes}});
  return out;
}

std::size_t count_params(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& s : describe_params(cfg)) n += shape_numel(s.shape);
  return n;
}

Tensor patchify(const Tensor& images, std::size_t ps) {
  if (images.rank() != 4) throw DimensionError("patchify expects [B x C x H x W], got " + shape_to_string(images.shape()));
  const std::size_t b = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (ps == 0 || h % ps != 0 || w % ps != 0) {
    throw DimensionError("patch size " + std::to_string(ps) + " does not divide image " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
  const std::size_t ph = h / ps, pw = w / ps, feat = c * ps * ps;
  Tensor out({b, ph * pw, feat});
  const float* src = images.data().data();
  float* dst = out.data().data();
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t pi = 0; pi < ph; ++pi)
      for (std::size_t pj = 0; pj < pw; ++pj) {
        float* row = dst + (n * ph * pw + pi * pw + pj) * feat;
        for (std::size_t u = 0; u < ps; ++u)
          for (std::size_t v = 0; v < ps; ++v)
            for (std::size_t ch = 0; ch < c; ++ch) {
              row[(u * ps + v) * c + ch] = src[((n * c + ch) * h + pi * ps + u) * w + pj * ps + v];
            }
      }
  return out;
}

std::vector<ActivationSite> activation_census(const ModelConfig& cfg, std::size_t batch) {
  validate_model_config(cfg);
  const std::size_t d = cfg.hidden_dim, p = cfg.num_patches(), h = cfg.mlp_dim();
  std::vector<ActivationSite> sites;
  sites.push_back({"embed.input", batch, p, cfg.patch_features(), true});
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    sites.push_back({block_name(i, "affine1.input"), batch, p, d, false});
    sites.push_back({block_name(i, "cross_patch.input"), batch, d, p, true});
    sites.push_back({block_name(i, "layerscale1.input"), batch, p, d, false});
    sites.push_back({block_name(i, "affine2.input"), batch, p, d, false});
    sites.push_back({block_name(i, "fc1.input"), batch, p, d, true});
    sites.push_back({block_name(i, "gelu.input"), batch, p, h, false});
    sites.push_back({block_name(i, "fc2.input"), batch, p, h, true});
    sites.push_back({block_name(i, "layerscale2.input"), batch, p, d, false});
  }
  sites.push_back({"final_affine.input", batch, 1, d, false});
  sites.push_back({"head.input", batch, 1, d, false});
  sites.push_back({"loss.softmax", batch, 1, cfg.num_classes, false});
  return sites;
}

// -----------------------------------------------------------------------------

ResMlp::ResMlp(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  auto descs = describe_params(cfg_);
  Rng rng(seed);
  params_.reserve(descs.size());
  for (auto& desc : descs) {
    const std::string& n = desc.name;
    auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    Tensor value;
    if (ends_with(".weight")) {
      const float stddev = 1.0f / std::sqrt(static_cast<float>(desc.shape[1]));
      value = rng_normal(rng, desc.shape, 0.0f, stddev);
    } else if (ends_with(".alpha")) {
      value = Tensor(desc.shape, 1.0f);
    } else if (n.find("layerscale") != std::string::npos) {
      value = Tensor(desc.shape, cfg_.layerscale_init);
    } else {
      value = Tensor(desc.shape, 0.0f);
    }
    params_.emplace_back(std::move(desc.name), std::move(value));
  }
}

nn::Param& ResMlp::param(const std::string& name) {
  for (auto& prm : params_) {
    if (prm.name == name) return prm;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

std::size_t ResMlp::param_count() const {
  std::size_t n = 0;
  for (const auto& prm : params_) n += prm.value.numel();
  return n;
}

nn::Var ResMlp::p(nn::Tape& tape, const std::string& name) { return tape.param(param(name)); }

nn::Var ResMlp::embed(nn::Tape& tape, const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != cfg_.channels || images.dim(2) != cfg_.height ||
      images.dim(3) != cfg_.width) {
    throw DimensionError("model expects images [B x " + std::to_string(cfg_.channels) + " x " +
                         std::to_string(cfg_.height) + " x " + std::to_string(cfg_.width) + "], got " +
                         shape_to_string(images.shape()));
  }
  nn::Var patches = tape.constant(patchify(images, cfg_.patch_size));
  return nn::sparse_linear(tape, patches, p(tape, "embed.weight"), p(tape, "embed.bias"), cfg_.prune, "embed");
}

nn::Var ResMlp::block(nn::Tape& tape, nn::Var x, std::size_t i) {
  const auto name = [i](const char* leaf) { return block_name(i, leaf); };
  // cross-patch sublayer, mixing along the patch axis
  nn::Var a1 = nn::affine(tape, x, p(tape, name("affine1.alpha")), p(tape, name("affine1.beta")), name("affine1"));
  nn::Var t1 = nn::transpose_last2(tape, a1);
  nn::Var c1 = nn::sparse_linear(tape, t1, p(tape, name("cross_patch.weight")), p(tape, name("cross_patch.bias")),
                                 cfg_.prune, name("cross_patch"));
  nn::Var c1t = nn::transpose_last2(tape, c1);
  nn::Var x1 = nn::add(tape, x, nn::channel_scale(tape, c1t, p(tape, name("layerscale1")), name("layerscale1")));
  // cross-channel MLP sublayer
  nn::Var a2 = nn::affine(tape, x1, p(tape, name("affine2.alpha")), p(tape, name("affine2.beta")), name("affine2"));
  nn::Var h = nn::sparse_linear(tape, a2, p(tape, name("fc1.weight")), p(tape, name("fc1.bias")), cfg_.prune,
                                name("fc1"));
  nn::Var g = nn::gelu(tape, h, name("gelu"));
  nn::Var m = nn::sparse_linear(tape, g, p(tape, name("fc2.weight")), p(tape, name("fc2.bias")), cfg_.prune,
                                name("fc2"));
  return nn::add(tape, x1, nn::channel_scale(tape, m, p(tape, name("layerscale2")), name("layerscale2")));
}

nn::Var ResMlp::forward(nn::Tape& tape, const Tensor& images) {
  nn::Var x = embed(tape, images);
  for (std::size_t i = 0; i < cfg_.depth; ++i) x = block(tape, x, i);
  nn::Var pooled = nn::mean_over_patches(tape, x);
  nn::Var z = nn::affine(tape, pooled, p(tape, "final_affine.alpha"), p(tape, "final_affine.beta"), "final_affine");
  // The classifier head always trains dense.
  return nn::sparse_linear(tape, z, p(tape, "head.weight"), p(tape, "head.bias"), std::nullopt, "head");
}

std::vector<LayerEligibility> ResMlp::eligibility_report() const {
  std::vector<LayerEligibility> out;
  for (const auto& site : activation_census(cfg_, 1)) {
    if (!site.prunable) continue;
    std::string layer = site.label.substr(0, site.label.size() - std::string(".input").size());
    out.push_back({std::move(layer), site.cols, site_eligible(site, cfg_.prune)});
  }
  return out;
}

}  // namespace bst
