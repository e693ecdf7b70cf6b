#include "swtsr/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "swtsr/error.hpp"
#include "swtsr/layers.hpp"

namespace swtsr {
namespace {

constexpr std::array<double, 3> kRgbMean = {0.4488, 0.4371, 0.4040};
constexpr char kCheckpointMagic[8] = {'S', 'W', 'T', 'S', 'R', 'C', 'K', '1'};

using Step = std::function<GradientPair(const Tensor&)>;

std::string block_name(const std::string& stage, int i) { return stage + "." + std::to_string(i) + "."; }

std::string group_name(int g) { return "groups." + std::to_string(g) + "."; }

std::uint64_t nlsa_seed(std::uint64_t model_seed, int block) {
  return round_seed(model_seed, 1000 + block);
}

void add_conv(ParameterSet& params, const std::string& name, int out, int in, int k) {
  params.add(name + ".weight", Shape{std::size_t(out), std::size_t(in), std::size_t(k), std::size_t(k)});
  params.add(name + ".bias", Shape{1, std::size_t(out), 1, 1});
}

void add_norm(ParameterSet& params, const std::string& name, int c) {
  params.add(name + ".gamma", Shape{1, std::size_t(c), 1, 1});
  params.add(name + ".beta", Shape{1, std::size_t(c), 1, 1});
}

void add_mlp(ParameterSet& params, const std::string& prefix, const ModelConfig& cfg) {
  add_conv(params, prefix + "mlp.fc1", cfg.dim * cfg.mlp_ratio, cfg.dim, 1);
  add_conv(params, prefix + "mlp.fc2", cfg.dim, cfg.dim * cfg.mlp_ratio, 1);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int upsample_stages(int scale) { return scale == 4 ? 2 : 1; }

// x + fc2(gelu(fc1(norm(x))))
GradientPair mlp_residual(const Tensor& x, const ParameterSet& p, const std::string& prefix) {
  GradientPair branch = layers::layer_norm(x, p, prefix + "norm2");
  branch = chain(std::move(branch), [&](const Tensor& t) { return layers::linear(t, p, prefix + "mlp.fc1"); });
  branch = chain(std::move(branch), [](const Tensor& t) { return layers::gelu(t); });
  branch = chain(std::move(branch), [&](const Tensor& t) { return layers::linear(t, p, prefix + "mlp.fc2"); });
  return residual(x, std::move(branch));
}

GradientPair hybrid_block(const Tensor& x, const Model& m, const std::string& prefix, int shift) {
  const ModelConfig& cfg = m.config;
  const ParameterSet& p = m.params;
  const AttentionConfig acfg = cfg.attention(shift);
  GradientPair branch = chain(layers::layer_norm(x, p, prefix + "norm1"), [&](const Tensor& n) {
    GradientPair ca = chain(channel_attention(n, cfg.squeeze_ratio, p, prefix + "ca."),
                            [&](const Tensor& t) { return layers::scale(t, cfg.cab_weight); });
    return add_branches(window_msa(n, acfg, p, prefix + "attn."), std::move(ca));
  });
  return chain(residual(x, std::move(branch)),
               [&](const Tensor& t) { return mlp_residual(t, p, prefix); });
}

GradientPair cross_block(const Tensor& x, const Model& m, const std::string& prefix) {
  const ParameterSet& p = m.params;
  const AttentionConfig acfg = m.config.attention(0);
  GradientPair branch = chain(layers::layer_norm(x, p, prefix + "norm1"), [&](const Tensor& n) {
    return overlapping_cross_attention(n, acfg, p, prefix + "attn.");
  });
  return chain(residual(x, std::move(branch)),
               [&](const Tensor& t) { return mlp_residual(t, p, prefix); });
}

GradientPair residual_group(const Tensor& x, const Model& m, int g) {
  const std::string prefix = group_name(g);
  GradientPair body = identity(x);
  for (int b = 0; b < m.config.blocks_per_group; ++b) {
    const int shift = b % 2 == 0 ? 0 : m.config.window / 2;
    body = chain(std::move(body), [&](const Tensor& t) {
      return hybrid_block(t, m, block_name(prefix + "blocks", b), shift);
    });
  }
  body = chain(std::move(body), [&](const Tensor& t) { return cross_block(t, m, prefix + "ocab."); });
  body = chain(std::move(body), [&](const Tensor& t) { return layers::conv(t, m.params, prefix + "conv"); });
  return residual(x, std::move(body));
}

GradientPair nlsa_stack(GradientPair x, const Model& m, const std::string& stage, int count,
                        int first_index) {
  for (int i = 0; i < count; ++i) {
    const AttentionConfig acfg = m.config.attention(0, nlsa_seed(m.seed, first_index + i));
    x = chain(std::move(x), [&](const Tensor& t) {
      return nlsa(t, acfg, m.params, block_name(stage, i));
    });
  }
  return x;
}

GradientPair shift_mean(const Tensor& x, double sign) {
  Tensor out = x;
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t c = 0; c < 3; ++c) {
      double* p = out.plane(n, c);
      for (std::size_t i = 0; i < x.shape().plane(); ++i) p[i] += sign * kRgbMean[c];
    }
  }
  return identity(out);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("model config: " + why); };
  if (scale != 2 && scale != 4) fail("scale must be 2 or 4, got " + std::to_string(scale));
  if (dim < 1 || heads < 1 || dim % heads != 0) {
    fail("dim " + std::to_string(dim) + " must be a positive multiple of heads " + std::to_string(heads));
  }
  if (n_pre_nlsa < 0 || n_post_nlsa < 0 || n_groups < 0 || blocks_per_group < 0) {
    fail("block counts must be non-negative");
  }
  if (window < 1) fail("window must be >= 1");
  if (squeeze_ratio < 1 || dim % squeeze_ratio != 0) fail("dim must be divisible by squeeze_ratio");
  if (mlp_ratio < 1) fail("mlp_ratio must be >= 1");
  if (!std::isfinite(cab_weight)) fail("cab_weight must be finite");
  attention(0).validate();
}

AttentionConfig ModelConfig::attention(int shift, std::uint64_t seed) const {
  AttentionConfig a;
  a.dim = dim;
  a.heads = heads;
  a.window = window;
  a.shift = shift;
  a.overlap_ratio = overlap_ratio;
  a.chunk_size = chunk_size;
  a.hash_rounds = hash_rounds;
  a.lsh_projections = lsh_projections;
  a.nlsa_reduction = nlsa_reduction;
  a.seed = seed;
  return a;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"n_pre_nlsa", cfg.n_pre_nlsa},     {"n_post_nlsa", cfg.n_post_nlsa},
          {"n_groups", cfg.n_groups},         {"blocks_per_group", cfg.blocks_per_group},
          {"dim", cfg.dim},                   {"window", cfg.window},
          {"chunk_size", cfg.chunk_size},     {"heads", cfg.heads},
          {"scale", cfg.scale},               {"cab_weight", cfg.cab_weight},
          {"squeeze_ratio", cfg.squeeze_ratio}, {"mlp_ratio", cfg.mlp_ratio},
          {"overlap_ratio", cfg.overlap_ratio}, {"hash_rounds", cfg.hash_rounds},
          {"lsh_projections", cfg.lsh_projections}, {"nlsa_reduction", cfg.nlsa_reduction}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_pre_nlsa") cfg.n_pre_nlsa = value.get<int>();
      else if (key == "n_post_nlsa") cfg.n_post_nlsa = value.get<int>();
      else if (key == "n_groups") cfg.n_groups = value.get<int>();
      else if (key == "blocks_per_group") cfg.blocks_per_group = value.get<int>();
      else if (key == "dim") cfg.dim = value.get<int>();
      else if (key == "window") cfg.window = value.get<int>();
      else if (key == "chunk_size") cfg.chunk_size = value.get<int>();
      else if (key == "heads") cfg.heads = value.get<int>();
      else if (key == "scale") cfg.scale = value.get<int>();
      else if (key == "cab_weight") cfg.cab_weight = value.get<double>();
      else if (key == "squeeze_ratio") cfg.squeeze_ratio = value.get<int>();
      else if (key == "mlp_ratio") cfg.mlp_ratio = value.get<int>();
      else if (key == "overlap_ratio") cfg.overlap_ratio = value.get<double>();
      else if (key == "hash_rounds") cfg.hash_rounds = value.get<int>();
      else if (key == "lsh_projections") cfg.lsh_projections = value.get<int>();
      else if (key == "nlsa_reduction") cfg.nlsa_reduction = value.get<int>();
      else throw ConfigError("unknown model config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model config key '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m{cfg, seed, {}};
  ParameterSet& p = m.params;
  add_conv(p, "conv_first", cfg.dim, 3, 3);
  for (int i = 0; i < cfg.n_pre_nlsa; ++i) add_nlsa_params(p, block_name("pre", i), cfg.attention(0));
  for (int g = 0; g < cfg.n_groups; ++g) {
    const std::string prefix = group_name(g);
    for (int b = 0; b < cfg.blocks_per_group; ++b) {
      const std::string blk = block_name(prefix + "blocks", b);
      add_norm(p, blk + "norm1", cfg.dim);
      add_window_attention_params(p, blk + "attn.", cfg.attention(0));
      add_channel_attention_params(p, blk + "ca.", cfg.dim, cfg.squeeze_ratio);
      add_norm(p, blk + "norm2", cfg.dim);
      add_mlp(p, blk, cfg);
    }
    add_norm(p, prefix + "ocab.norm1", cfg.dim);
    add_cross_attention_params(p, prefix + "ocab.attn.", cfg.attention(0));
    add_norm(p, prefix + "ocab.norm2", cfg.dim);
    add_mlp(p, prefix + "ocab.", cfg);
    add_conv(p, prefix + "conv", cfg.dim, cfg.dim, 3);
  }
  if (cfg.n_groups > 0) {
    add_norm(p, "norm", cfg.dim);
    add_conv(p, "conv_after_body", cfg.dim, cfg.dim, 3);
  }
  for (int i = 0; i < cfg.n_post_nlsa; ++i) add_nlsa_params(p, block_name("post", i), cfg.attention(0));
  add_conv(p, "conv_before_upsample", cfg.dim, cfg.dim, 3);
  for (int s = 0; s < upsample_stages(cfg.scale); ++s) {
    add_conv(p, "upsample." + std::to_string(s), 4 * cfg.dim, cfg.dim, 3);
  }
  add_conv(p, "conv_last", 3, cfg.dim, 3);

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::string& name = p.names()[i];
    Tensor& t = p.value(i);
    if (ends_with(name, ".gamma")) {
      for (double& v : t.data()) v = 1.0;
    } else if (ends_with(name, ".weight")) {
      const Shape& s = t.shape();
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.c * s.h * s.w));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.data()) v = dist(rng);
    }
  }
  return m;
}

GradientPair forward_with_pullback(const Model& m, const Tensor& lr) {
  const ModelConfig& cfg = m.config;
  if (lr.channels() != 3) throw DimensionError("model input must have 3 channels, got " + lr.shape().str());
  if (cfg.n_groups > 0 && (lr.height() % std::size_t(cfg.window) != 0 ||
                           lr.width() % std::size_t(cfg.window) != 0)) {
    throw DimensionError("model input " + std::to_string(lr.height()) + "x" +
                         std::to_string(lr.width()) + " is not divisible by window " +
                         std::to_string(cfg.window) + "; pad the input to a multiple of the window");
  }
  const ParameterSet& p = m.params;
  GradientPair x = shift_mean(lr, -1.0);
  x = chain(std::move(x), [&](const Tensor& t) { return layers::conv(t, p, "conv_first"); });
  x = nlsa_stack(std::move(x), m, "pre", cfg.n_pre_nlsa, 0);
  if (cfg.n_groups > 0) {
    x = chain(std::move(x), [&](const Tensor& shallow) {
      GradientPair body = identity(shallow);
      for (int g = 0; g < cfg.n_groups; ++g) {
        body = chain(std::move(body), [&](const Tensor& t) { return residual_group(t, m, g); });
      }
      body = chain(std::move(body), [&](const Tensor& t) { return layers::layer_norm(t, p, "norm"); });
      body = chain(std::move(body), [&](const Tensor& t) { return layers::conv(t, p, "conv_after_body"); });
      return residual(shallow, std::move(body));
    });
  }
  x = nlsa_stack(std::move(x), m, "post", cfg.n_post_nlsa, cfg.n_pre_nlsa);
  x = chain(std::move(x), [&](const Tensor& t) { return layers::conv(t, p, "conv_before_upsample"); });
  x = chain(std::move(x), [](const Tensor& t) { return layers::leaky_relu(t, 0.2); });
  for (int s = 0; s < upsample_stages(cfg.scale); ++s) {
    x = chain(std::move(x), [&](const Tensor& t) { return layers::conv(t, p, "upsample." + std::to_string(s)); });
    x = chain(std::move(x), [](const Tensor& t) { return layers::shuffle(t, 2); });
  }
  x = chain(std::move(x), [&](const Tensor& t) { return layers::conv(t, p, "conv_last"); });
  return chain(std::move(x), [](const Tensor& t) { return shift_mean(t, 1.0); });
}

Tensor forward(const Model& model, const Tensor& lr) { return forward_with_pullback(model, lr).value; }

std::size_t count_params(const Model& model) { return model.params.total_elements(); }

std::uint64_t count_mult_adds(const Model& model, int input_h, int input_w) {
  const ModelConfig& cfg = model.config;
  using u64 = std::uint64_t;
  const u64 c = u64(cfg.dim);
  const u64 hw = u64(input_h) * u64(input_w);
  auto conv = [](u64 out, u64 in, u64 k, u64 pixels) { return out * in * k * k * pixels; };

  u64 total = conv(c, 3, 3, hw);
  const u64 e = c / u64(cfg.nlsa_reduction);
  const u64 chunk = u64(cfg.chunk_size);
  const u64 full = hw / chunk;
  const u64 rest = hw % chunk;
  const u64 nlsa_pairs = u64(cfg.hash_rounds) * (full * chunk * chunk + rest * rest);
  const u64 nlsa_cost = conv(e, c, 3, hw) + conv(c, c, 1, hw) + nlsa_pairs * (e + c);
  total += u64(cfg.n_pre_nlsa + cfg.n_post_nlsa) * nlsa_cost;

  if (cfg.n_groups > 0) {
    const u64 m2 = u64(cfg.window) * u64(cfg.window);
    const u64 mo = u64(cfg.attention(0).key_window());
    const u64 hidden = c * u64(cfg.mlp_ratio);
    const u64 squeeze = c / u64(cfg.squeeze_ratio);
    const u64 mlp = 2 * hidden * c * hw;
    // qkv + proj + (scores and weighted sum over `keys` keys per query) + mlp
    auto attention_block = [&](u64 keys) { return 4 * c * c * hw + 2 * hw * keys * c + mlp; };
    const u64 hab = attention_block(m2) + 2 * squeeze * c;
    const u64 ocab = attention_block(mo * mo);
    const u64 group = u64(cfg.blocks_per_group) * hab + ocab + conv(c, c, 3, hw);
    total += u64(cfg.n_groups) * group + conv(c, c, 3, hw);
  }
  total += conv(c, c, 3, hw);
  u64 pixels = hw;
  for (int s = 0; s < upsample_stages(cfg.scale); ++s) {
    total += conv(4 * c, c, 3, pixels);
    pixels *= 4;
  }
  total += conv(3, c, 3, pixels);
  return total;
}

double OptimizerState::rate_at(long at_step) const {
  double rate = settings.learning_rate;
  for (long m : settings.milestones) {
    if (at_step > m) rate *= settings.decay;
  }
  return rate;
}

OptimizerState make_optimizer(const Model& model, const AdamSettings& settings) {
  if (!(settings.learning_rate >= 0.0) || !(settings.beta1 >= 0.0 && settings.beta1 < 1.0) ||
      !(settings.beta2 >= 0.0 && settings.beta2 < 1.0) || !(settings.eps > 0.0)) {
    throw ConfigError("invalid Adam settings");
  }
  return {settings, model.params.zeros_like(), model.params.zeros_like(), 0};
}

LossAndGrad model_loss_and_grad(const Model& model, const Tensor& lr, const Tensor& hr,
                                const LossConfig& loss_cfg) {
  GradientPair out = forward_with_pullback(model, lr);
  if (!out.value.all_finite()) throw NonFiniteError("model output contains non-finite values");
  LossAndGrad result{total_loss(out.value, hr, loss_cfg), model.params.zeros_like()};
  if (!std::isfinite(result.loss)) throw NonFiniteError("loss is not finite");
  out.pullback(total_loss_grad(out.value, hr, loss_cfg), result.grads);
  return result;
}

double train_step(Model& model, const Tensor& lr, const Tensor& hr, OptimizerState& opt,
                  const LossConfig& loss_cfg) {
  LossAndGrad lg = model_loss_and_grad(model, lr, hr, loss_cfg);
  for (std::size_t i = 0; i < lg.grads.size(); ++i) {
    if (!lg.grads.value(i).all_finite()) {
      throw NonFiniteError("gradient of '" + lg.grads.names()[i] + "' is not finite");
    }
  }
  ++opt.step;
  const AdamSettings& s = opt.settings;
  const double rate = opt.rate_at(opt.step);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    Tensor& w = model.params.value(i);
    Tensor& m1 = opt.first_moment.value(i);
    Tensor& m2 = opt.second_moment.value(i);
    const Tensor& g = lg.grads.value(i);
    for (std::size_t k = 0; k < w.size(); ++k) {
      m1[k] = s.beta1 * m1[k] + (1.0 - s.beta1) * g[k];
      m2[k] = s.beta2 * m2[k] + (1.0 - s.beta2) * g[k] * g[k];
      w[k] -= rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + s.eps);
    }
    if (!w.all_finite()) {
      throw NonFiniteError("parameter '" + model.params.names()[i] + "' became non-finite");
    }
  }
  return lg.loss;
}

void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json header;
  header["format"] = "swtsr-checkpoint";
  header["dtype"] = "float64-le";
  header["seed"] = model.seed;
  header["config"] = to_json(model.config);
  header["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const Shape& s = model.params.value(i).shape();
    header["tensors"].push_back({{"name", model.params.names()[i]}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    for (double v : model.params.value(i).data()) write_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw IoError("failed while writing checkpoint '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[sizeof kCheckpointMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw IntegrityError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const std::uint64_t length = read_u64(is);
  if (!is || length > (1u << 26)) throw IntegrityError("'" + path + "': bad header length");
  std::string text(length, '\0');
  is.read(text.data(), static_cast<std::streamsize>(length));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("'" + path + "': unreadable header: " + e.what());
  }
  Model model;
  try {
    model = build_model(model_config_from_json(header.at("config")), header.at("seed").get<std::uint64_t>());
    const auto& tensors = header.at("tensors");
    if (tensors.size() != model.params.size()) {
      throw IntegrityError("'" + path + "': tensor count does not match its config");
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
      Tensor& t = model.params.value(i);
      const Shape& s = t.shape();
      if (tensors[i].at("name").get<std::string>() != model.params.names()[i] || shape.size() != 4 ||
          Shape{shape[0], shape[1], shape[2], shape[3]} != s) {
        throw IntegrityError("'" + path + "': tensor " + std::to_string(i) + " does not match its config");
      }
      for (double& v : t.data()) v = std::bit_cast<double>(read_u64(is));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("'" + path + "': malformed header: " + e.what());
  }
  if (!is) throw IntegrityError("'" + path + "': truncated tensor data");
  return model;
}

}  // namespace swtsr
