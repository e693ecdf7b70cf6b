#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "swtsr/attention.hpp"
#include "swtsr/autodiff.hpp"
#include "swtsr/loss.hpp"

namespace swtsr {

/// Shallow conv -> pre NLSA blocks -> hybrid-attention groups -> post NLSA
/// blocks -> conv -> pixel-shuffle upsampler. Defaults are the toy profile.
struct ModelConfig {
  int n_pre_nlsa = 2;
  int n_post_nlsa = 2;
  int n_groups = 1;
  int blocks_per_group = 2;
  int dim = 16;
  int window = 4;
  int chunk_size = 16;
  int heads = 2;
  int scale = 4;
  /// Weight of the channel-attention branch inside each hybrid block.
  double cab_weight = 0.01;
  int squeeze_ratio = 4;
  int mlp_ratio = 2;
  double overlap_ratio = 0.5;
  int hash_rounds = 1;
  int lsh_projections = 4;
  int nlsa_reduction = 4;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  AttentionConfig attention(int shift, std::uint64_t seed = 0) const;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Model {
  ModelConfig config;
  std::uint64_t seed = 0;
  ParameterSet params;
};

/// Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a seeded generator;
/// biases, positional biases and norm shifts zero; norm scales one.
Model build_model(const ModelConfig& cfg, std::uint64_t seed);

/// Forward pass over a (n, 3, h, w) batch with its pullback. Parameters must
/// not change until the pullback has run.
GradientPair forward_with_pullback(const Model& model, const Tensor& lr);
Tensor forward(const Model& model, const Tensor& lr);

std::size_t count_params(const Model& model);
/// Multiply-accumulates for one image of the given LR size: convolutions as
/// out * in * k^2 * output pixels, attention as the score and weighted-sum
/// matmuls.
std::uint64_t count_mult_adds(const Model& model, int input_h, int input_w);

struct AdamSettings {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// The rate is multiplied by `decay` once each listed step has passed.
  std::vector<long> milestones;
  double decay = 0.5;
};

struct OptimizerState {
  AdamSettings settings;
  ParameterSet first_moment;
  ParameterSet second_moment;
  long step = 0;

  /// Rate used by update number `step` (1-based).
  double rate_at(long step) const;
};

OptimizerState make_optimizer(const Model& model, const AdamSettings& settings);

struct LossAndGrad {
  double loss = 0.0;
  ParameterSet grads;
};

/// total_loss(forward(lr), hr) and its gradient with respect to every parameter.
LossAndGrad model_loss_and_grad(const Model& model, const Tensor& lr, const Tensor& hr,
                                const LossConfig& loss_cfg);

/// One Adam update; returns the loss before the update. Throws NonFiniteError
/// naming the first non-finite tensor (output, loss, gradient or parameter).
double train_step(Model& model, const Tensor& lr, const Tensor& hr, OptimizerState& opt,
                  const LossConfig& loss_cfg);

/// Binary checkpoint: magic, u64 header length, JSON header (config, seed,
/// tensor names and shapes, dtype), then little-endian f64 data in order.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace swtsr
