#include "swtsr/loss.hpp"

#include <algorithm>
#include <cmath>

#include "swtsr/error.hpp"

namespace swtsr {
namespace {

constexpr double kYOffset = 16.0 / 255.0;
constexpr double kYWeights[3] = {65.481 / 255.0, 128.553 / 255.0, 24.966 / 255.0};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Single-channel planes fed to the transform: luma, or every channel on its own.
Tensor transform_input(const Tensor& x, const LossConfig& cfg) {
  if (cfg.use_y_channel) return rgb_to_y(x);
  const Shape& s = x.shape();
  return x.reshaped(Shape{s.n * s.c, 1, s.h, s.w});
}

SubbandPyramid residual_pyramid(const Tensor& x, const Tensor& y, const LossConfig& cfg) {
  cfg.validate();
  require_same_shape(x, y, "swt_loss");
  const FilterBank& bank = cached_filter(cfg.filter_name);
  SubbandPyramid px = swt_forward(transform_input(x, cfg), bank, cfg.levels);
  const SubbandPyramid py = swt_forward(transform_input(y, cfg), bank, cfg.levels);
  for (std::size_t j = 0; j < px.subbands.size(); ++j) px.subbands[j] -= py.subbands[j];
  return px;
}

double mean_abs(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += std::abs(v);
  return t.size() == 0 ? 0.0 : acc / static_cast<double>(t.size());
}

}  // namespace

void LossConfig::validate() const {
  if (levels < 1) throw ConfigError("loss levels must be >= 1, got " + std::to_string(levels));
  const std::size_t expected = SubbandPyramid::count_for(levels);
  if (lambda.size() != expected) {
    throw ConfigError("loss with " + std::to_string(levels) + " level(s) needs " +
                      std::to_string(expected) + " subband weights, got " +
                      std::to_string(lambda.size()));
  }
  for (double l : lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ConfigError("subband weights must be finite and non-negative");
    }
  }
}

LossConfig LossConfig::defaults() { return LossConfig{}; }

LossConfig LossConfig::swinir_preset() {
  LossConfig cfg;
  cfg.levels = 1;
  // LL, LH, HL, HH
  cfg.lambda = {0.05, 0.01, 0.01, 0.05};
  return cfg;
}

LossConfig LossConfig::uniform(const std::string& filter, int levels, double weight) {
  LossConfig cfg;
  cfg.filter_name = filter;
  cfg.levels = levels;
  cfg.lambda.assign(SubbandPyramid::count_for(std::max(levels, 1)), weight);
  return cfg;
}

Tensor rgb_to_y(const Tensor& rgb) {
  const Shape& s = rgb.shape();
  if (s.c != 3) throw DimensionError("rgb_to_y expects 3 channels, got " + s.str());
  Tensor y(Shape{s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    double* out = y.plane(n, 0);
    for (std::size_t p = 0; p < s.plane(); ++p) out[p] = kYOffset;
    for (std::size_t c = 0; c < 3; ++c) {
      const double* in = rgb.plane(n, c);
      for (std::size_t p = 0; p < s.plane(); ++p) {
        out[p] += kYWeights[c] * std::clamp(in[p], 0.0, 1.0);
      }
    }
  }
  return y;
}

Tensor rgb_to_y_pullback(const Tensor& rgb, const Tensor& grad_y) {
  const Shape& s = rgb.shape();
  if (s.c != 3) throw DimensionError("rgb_to_y expects 3 channels, got " + s.str());
  if (grad_y.shape() != Shape{s.n, 1, s.h, s.w}) {
    throw DimensionError("rgb_to_y cotangent has shape " + grad_y.shape().str());
  }
  Tensor g(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* gy = grad_y.plane(n, 0);
    for (std::size_t c = 0; c < 3; ++c) {
      const double* in = rgb.plane(n, c);
      double* out = g.plane(n, c);
      for (std::size_t p = 0; p < s.plane(); ++p) {
        out[p] = (in[p] >= 0.0 && in[p] <= 1.0) ? kYWeights[c] * gy[p] : 0.0;
      }
    }
  }
  return g;
}

double l1_rgb(const Tensor& x, const Tensor& y) {
  require_same_shape(x, y, "l1_rgb");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return x.size() == 0 ? 0.0 : acc / static_cast<double>(x.size());
}

LossBreakdown loss_breakdown(const Tensor& x, const Tensor& y, const LossConfig& cfg) {
  const SubbandPyramid r = residual_pyramid(x, y, cfg);
  LossBreakdown out;
  out.rgb = l1_rgb(x, y);
  out.lambda = cfg.lambda;
  for (std::size_t j = 0; j < r.subbands.size(); ++j) {
    out.labels.push_back(SubbandPyramid::label(j, cfg.levels));
    out.subband_l1.push_back(mean_abs(r.subbands[j]));
    out.swt += cfg.lambda[j] * out.subband_l1.back();
  }
  out.total = out.rgb + out.swt;
  return out;
}

double swt_loss(const Tensor& x, const Tensor& y, const LossConfig& cfg) {
  return loss_breakdown(x, y, cfg).swt;
}

double total_loss(const Tensor& x, const Tensor& y, const LossConfig& cfg) {
  return loss_breakdown(x, y, cfg).total;
}

Tensor total_loss_grad(const Tensor& x, const Tensor& y, const LossConfig& cfg) {
  SubbandPyramid r = residual_pyramid(x, y, cfg);
  for (std::size_t j = 0; j < r.subbands.size(); ++j) {
    Tensor& band = r.subbands[j];
    const double w = band.size() == 0 ? 0.0 : cfg.lambda[j] / static_cast<double>(band.size());
    for (std::size_t i = 0; i < band.size(); ++i) band[i] = w * sign(band[i]);
  }
  const Tensor g_planes = swt_adjoint(r, cached_filter(cfg.filter_name));
  Tensor grad = cfg.use_y_channel ? rgb_to_y_pullback(x, g_planes) : g_planes.reshaped(x.shape());
  const double inv_n = x.size() == 0 ? 0.0 : 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] += sign(x[i] - y[i]) * inv_n;
  return grad;
}

}  // namespace swtsr
