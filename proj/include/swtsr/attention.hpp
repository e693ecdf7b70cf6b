#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "swtsr/autodiff.hpp"

// Attention blocks over (n, c, h, w) feature maps. Every op returns its value
// together with a pullback; parameters are read from a ParameterSet under a
// caller-chosen prefix (see the add_*_params helpers for names and shapes).
namespace swtsr {

struct AttentionConfig {
  int dim = 16;
  int heads = 2;
  int window = 4;
  /// Cyclic shift applied before window partitioning (0 <= shift < window).
  int shift = 0;
  /// Overlapping key windows span floor((1 + overlap_ratio) * window) pixels.
  double overlap_ratio = 0.5;
  /// Maximum tokens per non-local attention bucket.
  int chunk_size = 144;
  /// Independent hash assignments whose outputs are averaged.
  int hash_rounds = 1;
  /// Random projections per hash; codes range over [0, 2 * lsh_projections).
  int lsh_projections = 4;
  /// Channel reduction of the non-local matching embedding.
  int nlsa_reduction = 4;
  std::uint64_t seed = 0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  int head_dim() const { return dim / heads; }
  int key_window() const;
};

/// Hash code and chunk of every token. Tokens are ordered by hash code
/// (stable in token index) and the sequence is cut into consecutive buckets
/// of at most chunk_size tokens.
struct BucketAssignment {
  std::vector<int> bucket_id;
  std::vector<std::size_t> chunk_of;
  std::vector<std::vector<std::size_t>> buckets;
};

/// Softmax weight diagnostics gathered while an op runs.
struct AttentionStats {
  std::size_t rows = 0;
  double max_row_sum_error = 0.0;
  double min_weight = std::numeric_limits<double>::infinity();

  void record_row(std::span<const double> weights);
};

void add_window_attention_params(ParameterSet& params, const std::string& prefix,
                                 const AttentionConfig& cfg);
void add_cross_attention_params(ParameterSet& params, const std::string& prefix,
                                const AttentionConfig& cfg);
void add_channel_attention_params(ParameterSet& params, const std::string& prefix, int channels,
                                  int squeeze_ratio);
void add_nlsa_params(ParameterSet& params, const std::string& prefix, const AttentionConfig& cfg);

/// Multi-head self-attention inside non-overlapping window x window tiles of
/// the (optionally cyclically shifted) map, with a learned relative-position
/// bias. Parameters: qkv.{weight,bias}, proj.{weight,bias}, rel_bias.
GradientPair window_msa(const Tensor& features, const AttentionConfig& cfg,
                        const ParameterSet& params, const std::string& prefix,
                        AttentionStats* stats = nullptr);

/// Squeeze-excite gate: out = x * sigmoid(W2 relu(W1 avgpool(x) + b1) + b2).
/// Parameters: squeeze.{weight,bias}, excite.{weight,bias}.
GradientPair channel_attention(const Tensor& features, int squeeze_ratio,
                               const ParameterSet& params, const std::string& prefix);

/// Window queries attending to enlarged, centred, periodically wrapped key
/// windows. Same parameter names as window_msa.
GradientPair overlapping_cross_attention(const Tensor& features, const AttentionConfig& cfg,
                                         const ParameterSet& params, const std::string& prefix,
                                         AttentionStats* stats = nullptr);

/// Unit-norm Gaussian projection rows (n_hashes x dim), row-major.
std::vector<double> lsh_projections(std::size_t dim, int n_hashes, std::uint64_t seed);

/// Spherical LSH of `count` row-major vectors of length dim: a vector's code
/// is the argmax over [Pv; -Pv] of its normalized form (zero vectors get 0).
BucketAssignment spherical_lsh(std::span<const double> vectors, std::size_t dim, int n_hashes,
                               std::uint64_t seed, int chunk_size);

/// Seed used for hash round `round` of a block seeded with `seed`.
std::uint64_t round_seed(std::uint64_t seed, int round);

/// Non-local sparse attention with residual: tokens attend within their
/// LSH bucket; rounds are averaged. Parameters: match.{weight,bias} (3x3),
/// assembly.{weight,bias} (1x1).
GradientPair nlsa(const Tensor& features, const AttentionConfig& cfg, const ParameterSet& params,
                  const std::string& prefix, AttentionStats* stats = nullptr);

}  // namespace swtsr
