#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bst/memstat.hpp"
#include "bst/nn.hpp"
#include "bst/pruner.hpp"
#include "bst/tensor.hpp"

namespace bst {

struct ModelConfig {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch_size = 4;
  std::size_t hidden_dim = 64;
  std::size_t mlp_ratio = 4;
  std::size_t depth = 2;
  std::size_t num_classes = 10;
  float layerscale_init = 0.1f;
  /// nullopt trains every linear layer dense.
  std::optional<PruneConfig> prune;

  std::size_t num_patches() const { return (height / patch_size) * (width / patch_size); }
  std::size_t patch_features() const { return channels * patch_size * patch_size; }
  std::size_t mlp_dim() const { return mlp_ratio * hidden_dim; }

  /// ResMLP-S12 at 224x224 ImageNet geometry.
  static ModelConfig s12_imagenet();
};

void validate_model_config(const ModelConfig& cfg);

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// Parameters of the model in creation order.
std::vector<ParamSpec> describe_params(const ModelConfig& cfg);
std::size_t count_params(const ModelConfig& cfg);

/// [B x C x H x W] -> [B x P x C*p*p]. Patches in raster order; inside a
/// patch, pixels in raster order with their C channel values adjacent.
Tensor patchify(const Tensor& images, std::size_t patch_size);

struct LayerEligibility {
  std::string layer;
  std::size_t activation_width = 0;  // trailing extent of the saved input
  bool eligible = false;
};

/// Every tensor the training stack saves for backward at the given batch
/// size, in forward order. Matches what the tape logs at runtime.
std::vector<ActivationSite> activation_census(const ModelConfig& cfg, std::size_t batch);

class ResMlp {
 public:
  /// Weights ~ N(0, 1/fan_in), biases 0, affine (1, 0), LayerScale at
  /// cfg.layerscale_init.
  ResMlp(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<nn::Param>& params() { return params_; }
  const std::vector<nn::Param>& params() const { return params_; }
  nn::Param& param(const std::string& name);
  std::size_t param_count() const;

  /// Patch embedding only: [B x C x H x W] -> [B x P x D].
  nn::Var embed(nn::Tape& tape, const Tensor& images);
  /// One residual block.
  nn::Var block(nn::Tape& tape, nn::Var x, std::size_t index);
  /// Logits [B x num_classes].
  nn::Var forward(nn::Tape& tape, const Tensor& images);

  /// Per sparse-linear layer: is its saved input BSR-eligible under cfg.prune.
  std::vector<LayerEligibility> eligibility_report() const;

 private:
  struct Bound;
  nn::Var p(nn::Tape& tape, const std::string& name);

  ModelConfig cfg_;
  std::vector<nn::Param> params_;
};

/// Named-tensor container; layout in docs/formats.md.
void save_checkpoint(const std::string& path, std::span<const nn::Param> params);
std::vector<nn::Param> load_checkpoint(const std::string& path);
/// Copies values from the checkpoint into params matched by name and shape.
void restore_checkpoint(const std::string& path, std::span<nn::Param> params);

}  // namespace bst
