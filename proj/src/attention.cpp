#include "swtsr/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "swtsr/error.hpp"
#include "swtsr/layers.hpp"

namespace swtsr {
namespace {

constexpr double kKeyNormFloor = 5e-5;

// (n, c, h, w) -> row-major tokens [n][pixel][c].
std::vector<double> to_tokens(const Tensor& t) {
  const Shape& s = t.shape();
  std::vector<double> out(s.numel());
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = t.plane(n, c);
      double* dst = out.data() + n * plane * s.c + c;
      for (std::size_t p = 0; p < plane; ++p) dst[p * s.c] = src[p];
    }
  }
  return out;
}

Tensor from_tokens(const std::vector<double>& tokens, Shape s) {
  Tensor out(s);
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = tokens.data() + n * plane * s.c + c;
      double* dst = out.plane(n, c);
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p * s.c];
    }
  }
  return out;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Numerically stable in-place softmax.
void softmax(std::span<double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : row) v /= total;
}

// Query tiles of size m and centred key tiles of size mo (periodic wrap).
struct WindowPlan {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t m = 0;
  std::size_t mo = 0;

  std::size_t tiles_x() const { return w / m; }
  std::size_t count() const { return (h / m) * tiles_x(); }
  std::size_t rel_extent() const { return m + mo - 1; }

  std::vector<std::size_t> queries(std::size_t tile) const {
    const std::size_t ty = tile / tiles_x();
    const std::size_t tx = tile % tiles_x();
    std::vector<std::size_t> idx;
    idx.reserve(m * m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) idx.push_back((ty * m + a) * w + tx * m + b);
    }
    return idx;
  }

  std::vector<std::size_t> keys(std::size_t tile) const {
    const long pad = static_cast<long>((mo - m) / 2);
    const long ty = static_cast<long>(tile / tiles_x());
    const long tx = static_cast<long>(tile % tiles_x());
    const long lh = static_cast<long>(h);
    const long lw = static_cast<long>(w);
    std::vector<std::size_t> idx;
    idx.reserve(mo * mo);
    for (long a = 0; a < static_cast<long>(mo); ++a) {
      const long y = ((ty * static_cast<long>(m) + a - pad) % lh + lh) % lh;
      for (long b = 0; b < static_cast<long>(mo); ++b) {
        const long x = ((tx * static_cast<long>(m) + b - pad) % lw + lw) % lw;
        idx.push_back(static_cast<std::size_t>(y * lw + x));
      }
    }
    return idx;
  }

  // Flat offset into a (T x T) relative-position table for query i, key j.
  std::size_t rel_index(std::size_t i, std::size_t j) const {
    const std::size_t dy = i / m + mo - 1 - j / mo;
    const std::size_t dx = i % m + mo - 1 - j % mo;
    return dy * rel_extent() + dx;
  }
};

void check_tiling(const Tensor& x, const AttentionConfig& cfg, const char* op) {
  const std::size_t m = static_cast<std::size_t>(cfg.window);
  if (x.height() % m != 0 || x.width() % m != 0) {
    throw DimensionError(std::string(op) + ": spatial size " + std::to_string(x.height()) + "x" +
                         std::to_string(x.width()) + " is not divisible by window " +
                         std::to_string(m) + "; pad the input to a multiple of the window");
  }
  if (x.channels() != static_cast<std::size_t>(cfg.dim)) {
    throw DimensionError(std::string(op) + ": expected " + std::to_string(cfg.dim) +
                         " channels, got " + x.shape().str());
  }
}

// Softmax attention of query tiles over key tiles on a (n, 3C, h, w) qkv map.
GradientPair tiled_attention(const Tensor& qkv, const WindowPlan& plan, std::size_t heads,
                             const ParameterSet& params, const std::string& bias_name,
                             AttentionStats* stats) {
  const Shape s = qkv.shape();
  const std::size_t dim = s.c / 3;
  const std::size_t dh = dim / heads;
  const std::size_t hw = s.plane();
  const std::size_t stride = 3 * dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor* bias = &params.at(bias_name);
  const std::size_t t = plan.rel_extent();
  if (bias->shape() != Shape{1, heads, t, t}) {
    throw DimensionError(bias_name + " must have shape " + Shape{1, heads, t, t}.str() +
                         ", got " + bias->shape().str());
  }
  const std::size_t nq = plan.m * plan.m;
  const std::size_t nk = plan.mo * plan.mo;

  std::vector<double> tok = to_tokens(qkv);
  std::vector<double> out(s.n * hw * dim, 0.0);
  std::vector<double> probs(s.n * plan.count() * heads * nq * nk);
  std::size_t block = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* base = tok.data() + n * hw * stride;
    for (std::size_t tile = 0; tile < plan.count(); ++tile) {
      const auto qi = plan.queries(tile);
      const auto kj = plan.keys(tile);
      for (std::size_t hd = 0; hd < heads; ++hd, ++block) {
        const double* table = bias->plane(0, hd);
        for (std::size_t i = 0; i < nq; ++i) {
          std::span<double> row(probs.data() + (block * nq + i) * nk, nk);
          const double* q = base + qi[i] * stride + hd * dh;
          for (std::size_t j = 0; j < nk; ++j) {
            const double* k = base + kj[j] * stride + dim + hd * dh;
            row[j] = scale * dot(q, k, dh) + table[plan.rel_index(i, j)];
          }
          softmax(row);
          if (stats != nullptr) stats->record_row(row);
          double* o = out.data() + (n * hw + qi[i]) * dim + hd * dh;
          for (std::size_t j = 0; j < nk; ++j) {
            const double* v = base + kj[j] * stride + 2 * dim + hd * dh;
            for (std::size_t d = 0; d < dh; ++d) o[d] += row[j] * v[d];
          }
        }
      }
    }
  }
  Tensor value = from_tokens(out, Shape{s.n, dim, s.h, s.w});
  return {std::move(value), [tok = std::move(tok), probs = std::move(probs), plan, heads, s,
                             bias_name](const Tensor& cot, ParameterSet& grads) {
            const std::size_t dim = s.c / 3;
            const std::size_t dh = dim / heads;
            const std::size_t hw = s.plane();
            const std::size_t stride = 3 * dim;
            const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
            const std::size_t nq = plan.m * plan.m;
            const std::size_t nk = plan.mo * plan.mo;
            const std::vector<double> dout = to_tokens(cot);
            std::vector<double> dtok(tok.size(), 0.0);
            Tensor& dbias = grads.at(bias_name);
            std::vector<double> dp(nk);
            std::size_t block = 0;
            for (std::size_t n = 0; n < s.n; ++n) {
              const double* base = tok.data() + n * hw * stride;
              double* dbase = dtok.data() + n * hw * stride;
              for (std::size_t tile = 0; tile < plan.count(); ++tile) {
                const auto qi = plan.queries(tile);
                const auto kj = plan.keys(tile);
                for (std::size_t hd = 0; hd < heads; ++hd, ++block) {
                  double* dtable = dbias.plane(0, hd);
                  for (std::size_t i = 0; i < nq; ++i) {
                    const double* row = probs.data() + (block * nq + i) * nk;
                    const double* go = dout.data() + (n * hw + qi[i]) * dim + hd * dh;
                    double weighted = 0.0;
                    for (std::size_t j = 0; j < nk; ++j) {
                      const double* v = base + kj[j] * stride + 2 * dim + hd * dh;
                      double* dv = dbase + kj[j] * stride + 2 * dim + hd * dh;
                      dp[j] = dot(go, v, dh);
                      weighted += row[j] * dp[j];
                      for (std::size_t d = 0; d < dh; ++d) dv[d] += row[j] * go[d];
                    }
                    const double* q = base + qi[i] * stride + hd * dh;
                    double* dq = dbase + qi[i] * stride + hd * dh;
                    for (std::size_t j = 0; j < nk; ++j) {
                      const double ds = row[j] * (dp[j] - weighted);
                      dtable[plan.rel_index(i, j)] += ds;
                      const double* k = base + kj[j] * stride + dim + hd * dh;
                      double* dk = dbase + kj[j] * stride + dim + hd * dh;
                      for (std::size_t d = 0; d < dh; ++d) {
                        dq[d] += scale * ds * k[d];
                        dk[d] += scale * ds * q[d];
                      }
                    }
                  }
                }
              }
            }
            return from_tokens(dtok, s);
          }};
}

GradientPair windowed(const Tensor& features, const AttentionConfig& cfg,
                      const ParameterSet& params, const std::string& prefix, std::size_t key_window,
                      long shift, AttentionStats* stats) {
  WindowPlan plan{features.height(), features.width(), static_cast<std::size_t>(cfg.window),
                  key_window};
  const std::size_t heads = static_cast<std::size_t>(cfg.heads);
  GradientPair x = layers::shift(features, -shift, -shift);
  x = chain(std::move(x), [&](const Tensor& t) { return layers::linear(t, params, prefix + "qkv"); });
  x = chain(std::move(x), [&](const Tensor& t) {
    return tiled_attention(t, plan, heads, params, prefix + "rel_bias", stats);
  });
  x = chain(std::move(x), [&](const Tensor& t) { return layers::linear(t, params, prefix + "proj"); });
  return chain(std::move(x), [&](const Tensor& t) { return layers::shift(t, shift, shift); });
}

void add_attention_params(ParameterSet& params, const std::string& prefix,
                          const AttentionConfig& cfg, std::size_t key_window) {
  const std::size_t c = static_cast<std::size_t>(cfg.dim);
  const std::size_t t = static_cast<std::size_t>(cfg.window) + key_window - 1;
  params.add(prefix + "qkv.weight", Shape{3 * c, c, 1, 1});
  params.add(prefix + "qkv.bias", Shape{1, 3 * c, 1, 1});
  params.add(prefix + "proj.weight", Shape{c, c, 1, 1});
  params.add(prefix + "proj.bias", Shape{1, c, 1, 1});
  params.add(prefix + "rel_bias", Shape{1, static_cast<std::size_t>(cfg.heads), t, t});
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

void AttentionConfig::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("attention config: " + why); };
  if (dim < 1 || heads < 1) fail("dim and heads must be positive");
  if (dim % heads != 0) fail("dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  if (window < 1) fail("window must be >= 1");
  if (shift < 0 || shift >= window) fail("shift must satisfy 0 <= shift < window");
  if (!(overlap_ratio >= 0.0)) fail("overlap ratio must be >= 0");
  if (chunk_size < 1) fail("chunk_size must be >= 1");
  if (hash_rounds < 1) fail("hash_rounds must be >= 1");
  if (lsh_projections < 1) fail("lsh_projections must be >= 1");
  if (nlsa_reduction < 1 || dim % nlsa_reduction != 0) {
    fail("dim must be divisible by nlsa_reduction");
  }
}

int AttentionConfig::key_window() const {
  return static_cast<int>(std::floor((1.0 + overlap_ratio) * window));
}

void AttentionStats::record_row(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    total += w;
    min_weight = std::min(min_weight, w);
  }
  ++rows;
  max_row_sum_error = std::max(max_row_sum_error, std::abs(total - 1.0));
}

void add_window_attention_params(ParameterSet& params, const std::string& prefix,
                                 const AttentionConfig& cfg) {
  add_attention_params(params, prefix, cfg, static_cast<std::size_t>(cfg.window));
}

void add_cross_attention_params(ParameterSet& params, const std::string& prefix,
                                const AttentionConfig& cfg) {
  add_attention_params(params, prefix, cfg, static_cast<std::size_t>(cfg.key_window()));
}

void add_channel_attention_params(ParameterSet& params, const std::string& prefix, int channels,
                                  int squeeze_ratio) {
  if (squeeze_ratio < 1 || channels % squeeze_ratio != 0) {
    throw DimensionError("channel attention: " + std::to_string(channels) +
                         " channels not divisible by squeeze ratio " + std::to_string(squeeze_ratio));
  }
  const std::size_t c = static_cast<std::size_t>(channels);
  const std::size_t r = c / static_cast<std::size_t>(squeeze_ratio);
  params.add(prefix + "squeeze.weight", Shape{r, c, 1, 1});
  params.add(prefix + "squeeze.bias", Shape{1, r, 1, 1});
  params.add(prefix + "excite.weight", Shape{c, r, 1, 1});
  params.add(prefix + "excite.bias", Shape{1, c, 1, 1});
}

void add_nlsa_params(ParameterSet& params, const std::string& prefix, const AttentionConfig& cfg) {
  cfg.validate();
  const std::size_t c = static_cast<std::size_t>(cfg.dim);
  const std::size_t e = c / static_cast<std::size_t>(cfg.nlsa_reduction);
  params.add(prefix + "match.weight", Shape{e, c, 3, 3});
  params.add(prefix + "match.bias", Shape{1, e, 1, 1});
  params.add(prefix + "assembly.weight", Shape{c, c, 1, 1});
  params.add(prefix + "assembly.bias", Shape{1, c, 1, 1});
}

GradientPair window_msa(const Tensor& features, const AttentionConfig& cfg,
                        const ParameterSet& params, const std::string& prefix,
                        AttentionStats* stats) {
  cfg.validate();
  check_tiling(features, cfg, "window_msa");
  return windowed(features, cfg, params, prefix, static_cast<std::size_t>(cfg.window), cfg.shift,
                  stats);
}

GradientPair overlapping_cross_attention(const Tensor& features, const AttentionConfig& cfg,
                                         const ParameterSet& params, const std::string& prefix,
                                         AttentionStats* stats) {
  if (!(cfg.overlap_ratio >= 0.0)) {
    throw ConfigError("overlapping_cross_attention: overlap ratio must be >= 0");
  }
  cfg.validate();
  check_tiling(features, cfg, "overlapping_cross_attention");
  return windowed(features, cfg, params, prefix, static_cast<std::size_t>(cfg.key_window()), 0,
                  stats);
}

GradientPair channel_attention(const Tensor& features, int squeeze_ratio,
                               const ParameterSet& params, const std::string& prefix) {
  const Shape s = features.shape();
  if (squeeze_ratio < 1 || s.c % static_cast<std::size_t>(squeeze_ratio) != 0) {
    throw DimensionError("channel attention: " + std::to_string(s.c) +
                         " channels not divisible by squeeze ratio " + std::to_string(squeeze_ratio));
  }
  const std::size_t r = s.c / static_cast<std::size_t>(squeeze_ratio);
  const Tensor* w1 = &params.at(prefix + "squeeze.weight");
  const Tensor* b1 = &params.at(prefix + "squeeze.bias");
  const Tensor* w2 = &params.at(prefix + "excite.weight");
  const Tensor* b2 = &params.at(prefix + "excite.bias");
  if (w1->shape() != Shape{r, s.c, 1, 1} || w2->shape() != Shape{s.c, r, 1, 1}) {
    throw DimensionError(prefix + ": channel attention weights do not match " + s.str());
  }
  const double inv_plane = 1.0 / static_cast<double>(s.plane());
  std::vector<double> pooled(s.n * s.c), hidden(s.n * r), gate(s.n * s.c);
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* p = features.plane(n, c);
      pooled[n * s.c + c] = std::accumulate(p, p + s.plane(), 0.0) * inv_plane;
    }
    for (std::size_t k = 0; k < r; ++k) {
      double z = (*b1)[k];
      for (std::size_t c = 0; c < s.c; ++c) z += (*w1)[k * s.c + c] * pooled[n * s.c + c];
      hidden[n * r + k] = z;
    }
    for (std::size_t c = 0; c < s.c; ++c) {
      double g = (*b2)[c];
      for (std::size_t k = 0; k < r; ++k) g += (*w2)[c * r + k] * std::max(hidden[n * r + k], 0.0);
      gate[n * s.c + c] = sigmoid(g);
      const double* in = features.plane(n, c);
      double* o = out.plane(n, c);
      for (std::size_t p = 0; p < s.plane(); ++p) o[p] = in[p] * gate[n * s.c + c];
    }
  }
  return {std::move(out), [features, s, r, w1, w2, pooled = std::move(pooled),
                           hidden = std::move(hidden), gate = std::move(gate),
                           prefix](const Tensor& cot, ParameterSet& grads) {
            Tensor& gw1 = grads.at(prefix + "squeeze.weight");
            Tensor& gb1 = grads.at(prefix + "squeeze.bias");
            Tensor& gw2 = grads.at(prefix + "excite.weight");
            Tensor& gb2 = grads.at(prefix + "excite.bias");
            const double inv_plane = 1.0 / static_cast<double>(s.plane());
            Tensor dx(s);
            std::vector<double> dg(s.c), dz(r), dpooled(s.c);
            for (std::size_t n = 0; n < s.n; ++n) {
              for (std::size_t c = 0; c < s.c; ++c) {
                const double* g = cot.plane(n, c);
                const double* in = features.plane(n, c);
                double ds = 0.0;
                for (std::size_t p = 0; p < s.plane(); ++p) ds += g[p] * in[p];
                const double sg = gate[n * s.c + c];
                dg[c] = ds * sg * (1.0 - sg);
                gb2[c] += dg[c];
              }
              for (std::size_t k = 0; k < r; ++k) {
                const double z = hidden[n * r + k];
                double da = 0.0;
                for (std::size_t c = 0; c < s.c; ++c) {
                  gw2[c * r + k] += dg[c] * std::max(z, 0.0);
                  da += (*w2)[c * r + k] * dg[c];
                }
                dz[k] = z > 0.0 ? da : 0.0;
                gb1[k] += dz[k];
              }
              for (std::size_t c = 0; c < s.c; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < r; ++k) {
                  gw1[k * s.c + c] += dz[k] * pooled[n * s.c + c];
                  acc += (*w1)[k * s.c + c] * dz[k];
                }
                dpooled[c] = acc * inv_plane;
              }
              for (std::size_t c = 0; c < s.c; ++c) {
                const double* g = cot.plane(n, c);
                double* o = dx.plane(n, c);
                const double sg = gate[n * s.c + c];
                for (std::size_t p = 0; p < s.plane(); ++p) o[p] = g[p] * sg + dpooled[c];
              }
            }
            return dx;
          }};
}

std::vector<double> lsh_projections(std::size_t dim, int n_hashes, std::uint64_t seed) {
  if (n_hashes < 1) throw ConfigError("spherical LSH needs at least one projection");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> rows(static_cast<std::size_t>(n_hashes) * dim);
  for (int m = 0; m < n_hashes; ++m) {
    double* row = rows.data() + static_cast<std::size_t>(m) * dim;
    double norm = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      row[d] = normal(rng);
      norm += row[d] * row[d];
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < dim; ++d) row[d] /= norm;
  }
  return rows;
}

BucketAssignment spherical_lsh(std::span<const double> vectors, std::size_t dim, int n_hashes,
                               std::uint64_t seed, int chunk_size) {
  if (dim == 0 || vectors.size() % dim != 0) {
    throw DimensionError("spherical_lsh: " + std::to_string(vectors.size()) +
                         " values do not form vectors of length " + std::to_string(dim));
  }
  if (chunk_size < 1) throw ConfigError("spherical_lsh: chunk_size must be >= 1");
  const std::size_t count = vectors.size() / dim;
  const std::size_t m = static_cast<std::size_t>(n_hashes);
  const std::vector<double> proj = lsh_projections(dim, n_hashes, seed);

  BucketAssignment out;
  out.bucket_id.assign(count, 0);
  for (std::size_t t = 0; t < count; ++t) {
    const double* v = vectors.data() + t * dim;
    const double norm = std::sqrt(dot(v, v, dim));
    if (norm == 0.0) continue;
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      const double p = dot(proj.data() + k * dim, v, dim) / norm;
      if (p > best_value) {
        best_value = p;
        best = static_cast<int>(k);
      }
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double p = -dot(proj.data() + k * dim, v, dim) / norm;
      if (p > best_value) {
        best_value = p;
        best = static_cast<int>(m + k);
      }
    }
    out.bucket_id[t] = best;
  }

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.bucket_id[a] < out.bucket_id[b];
  });
  out.chunk_of.assign(count, 0);
  const std::size_t chunk = static_cast<std::size_t>(chunk_size);
  for (std::size_t pos = 0; pos < count; ++pos) {
    if (pos % chunk == 0) out.buckets.emplace_back();
    out.buckets.back().push_back(order[pos]);
    out.chunk_of[order[pos]] = out.buckets.size() - 1;
  }
  return out;
}

std::uint64_t round_seed(std::uint64_t seed, int round) {
  return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(round);
}

GradientPair nlsa(const Tensor& features, const AttentionConfig& cfg, const ParameterSet& params,
                  const std::string& prefix, AttentionStats* stats) {
  cfg.validate();
  if (features.channels() != static_cast<std::size_t>(cfg.dim)) {
    throw DimensionError("nlsa: expected " + std::to_string(cfg.dim) + " channels, got " +
                         features.shape().str());
  }
  GradientPair embed = layers::conv(features, params, prefix + "match", Boundary::zero);
  GradientPair assembly = layers::linear(features, params, prefix + "assembly");
  const Shape s = features.shape();
  const std::size_t hw = s.plane();
  const std::size_t c = s.c;
  const std::size_t e = embed.value.channels();
  const std::size_t rounds = static_cast<std::size_t>(cfg.hash_rounds);
  const double inv_rounds = 1.0 / static_cast<double>(rounds);

  std::vector<double> etok = to_tokens(embed.value);
  std::vector<double> vtok = to_tokens(assembly.value);
  std::vector<double> keys(etok.size());
  std::vector<double> norms(s.n * hw);
  for (std::size_t t = 0; t < s.n * hw; ++t) {
    const double* src = etok.data() + t * e;
    norms[t] = std::sqrt(dot(src, src, e));
    const double denom = std::max(norms[t], kKeyNormFloor);
    for (std::size_t d = 0; d < e; ++d) keys[t * e + d] = src[d] / denom;
  }

  // Buckets per (batch, round) in iteration order, with their softmax weights.
  std::vector<std::vector<std::size_t>> buckets;
  std::vector<double> probs;
  std::vector<double> out(s.n * hw * c, 0.0);
  for (std::size_t n = 0; n < s.n; ++n) {
    std::span<const double> batch_embed(etok.data() + n * hw * e, hw * e);
    for (std::size_t round = 0; round < rounds; ++round) {
      BucketAssignment assign = spherical_lsh(batch_embed, e, cfg.lsh_projections,
                                              round_seed(cfg.seed, static_cast<int>(round)),
                                              cfg.chunk_size);
      for (auto& members : assign.buckets) {
        const std::size_t len = members.size();
        const std::size_t offset = probs.size();
        probs.resize(offset + len * len);
        for (std::size_t i = 0; i < len; ++i) {
          const double* qi = etok.data() + (n * hw + members[i]) * e;
          std::span<double> row(probs.data() + offset + i * len, len);
          for (std::size_t j = 0; j < len; ++j) {
            row[j] = dot(qi, keys.data() + (n * hw + members[j]) * e, e);
          }
          softmax(row);
          if (stats != nullptr) stats->record_row(row);
          double* o = out.data() + (n * hw + members[i]) * c;
          for (std::size_t j = 0; j < len; ++j) {
            const double* v = vtok.data() + (n * hw + members[j]) * c;
            const double wgt = row[j] * inv_rounds;
            for (std::size_t d = 0; d < c; ++d) o[d] += wgt * v[d];
          }
        }
        buckets.push_back(std::move(members));
      }
    }
  }
  Tensor value = features + from_tokens(out, s);

  return {std::move(value),
          [s, e, rounds, etok = std::move(etok), vtok = std::move(vtok), keys = std::move(keys),
           norms = std::move(norms), buckets = std::move(buckets), probs = std::move(probs),
           pe = std::move(embed.pullback), pv = std::move(assembly.pullback)](
              const Tensor& cot, ParameterSet& grads) {
            const std::size_t hw = s.plane();
            const std::size_t c = s.c;
            const double inv_rounds = 1.0 / static_cast<double>(rounds);
            const std::vector<double> dout = to_tokens(cot);
            std::vector<double> de(etok.size(), 0.0), dkey(etok.size(), 0.0), dv(vtok.size(), 0.0);
            std::vector<double> dp;
            std::size_t bucket = 0;
            std::size_t offset = 0;
            const std::size_t per_batch = buckets.size() / s.n;
            for (std::size_t n = 0; n < s.n; ++n) {
              for (std::size_t b = 0; b < per_batch; ++b, ++bucket) {
                const auto& members = buckets[bucket];
                const std::size_t len = members.size();
                dp.assign(len, 0.0);
                for (std::size_t i = 0; i < len; ++i) {
                  const double* row = probs.data() + offset + i * len;
                  const double* go = dout.data() + (n * hw + members[i]) * c;
                  double weighted = 0.0;
                  for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t tj = n * hw + members[j];
                    dp[j] = dot(go, vtok.data() + tj * c, c) * inv_rounds;
                    weighted += row[j] * dp[j];
                    double* g = dv.data() + tj * c;
                    const double wgt = row[j] * inv_rounds;
                    for (std::size_t d = 0; d < c; ++d) g[d] += wgt * go[d];
                  }
                  const std::size_t ti = n * hw + members[i];
                  for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t tj = n * hw + members[j];
                    const double ds = row[j] * (dp[j] - weighted);
                    for (std::size_t d = 0; d < e; ++d) {
                      de[ti * e + d] += ds * keys[tj * e + d];
                      dkey[tj * e + d] += ds * etok[ti * e + d];
                    }
                  }
                }
                offset += len * len;
              }
            }
            for (std::size_t t = 0; t < s.n * hw; ++t) {
              const double* k = keys.data() + t * e;
              const double* g = dkey.data() + t * e;
              double* out = de.data() + t * e;
              if (norms[t] > kKeyNormFloor) {
                const double proj = dot(k, g, e);
                for (std::size_t d = 0; d < e; ++d) out[d] += (g[d] - k[d] * proj) / norms[t];
              } else {
                for (std::size_t d = 0; d < e; ++d) out[d] += g[d] / kKeyNormFloor;
              }
            }
            Tensor dx = cot;
            dx += pe(from_tokens(de, Shape{s.n, e, s.h, s.w}), grads);
            dx += pv(from_tokens(dv, s), grads);
            return dx;
          }};
}

}  // namespace swtsr
