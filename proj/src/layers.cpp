#include "swtsr/layers.hpp"

#include <cmath>
#include <numbers>

#include "swtsr/error.hpp"

namespace swtsr::layers {

GradientPair conv(const Tensor& x, const ParameterSet& params, const std::string& name,
                  Boundary boundary) {
  const Tensor* weight = &params.at(name + ".weight");
  const Tensor* bias = params.contains(name + ".bias") ? &params.at(name + ".bias") : nullptr;
  Tensor y = conv2d(x, *weight, 1, boundary);
  if (bias != nullptr) {
    const Shape& s = y.shape();
    if (bias->size() != s.c) {
      throw DimensionError(name + ".bias has " + std::to_string(bias->size()) +
                           " entries for " + std::to_string(s.c) + " channels");
    }
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        double* p = y.plane(n, c);
        const double b = (*bias)[c];
        for (std::size_t i = 0; i < s.plane(); ++i) p[i] += b;
      }
    }
  }
  return {std::move(y), [x, weight, name, boundary, has_bias = bias != nullptr](
                            const Tensor& cot, ParameterSet& grads) {
            Conv2dGrads g = conv2d_backward(x, *weight, cot, 1, boundary);
            grads.at(name + ".weight") += g.kernel;
            if (has_bias) {
              Tensor& gb = grads.at(name + ".bias");
              const Shape& s = cot.shape();
              for (std::size_t n = 0; n < s.n; ++n) {
                for (std::size_t c = 0; c < s.c; ++c) {
                  const double* p = cot.plane(n, c);
                  double acc = 0.0;
                  for (std::size_t i = 0; i < s.plane(); ++i) acc += p[i];
                  gb[c] += acc;
                }
              }
            }
            return std::move(g.input);
          }};
}

GradientPair linear(const Tensor& x, const ParameterSet& params, const std::string& name) {
  const Shape& w = params.at(name + ".weight").shape();
  if (w.h != 1 || w.w != 1) {
    throw DimensionError(name + ".weight must be (out, in, 1, 1), got " + w.str());
  }
  return conv(x, params, name, Boundary::zero);
}

GradientPair layer_norm(const Tensor& x, const ParameterSet& params, const std::string& name,
                        double eps) {
  const Tensor* gamma = &params.at(name + ".gamma");
  const Tensor* beta = &params.at(name + ".beta");
  const Shape& s = x.shape();
  if (gamma->size() != s.c || beta->size() != s.c) {
    throw DimensionError(name + ": affine parameters do not match " + std::to_string(s.c) +
                         " channels");
  }
  const std::size_t plane = s.plane();
  Tensor xhat(s);
  Tensor inv_std(Shape{s.n, 1, s.h, s.w});
  Tensor y(s);
  const double inv_c = 1.0 / static_cast<double>(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < plane; ++p) {
      double mean = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) mean += x.plane(n, c)[p];
      mean *= inv_c;
      double var = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double d = x.plane(n, c)[p] - mean;
        var += d * d;
      }
      var *= inv_c;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std.plane(n, 0)[p] = is;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double h = (x.plane(n, c)[p] - mean) * is;
        xhat.plane(n, c)[p] = h;
        y.plane(n, c)[p] = (*gamma)[c] * h + (*beta)[c];
      }
    }
  }
  return {std::move(y), [xhat = std::move(xhat), inv_std = std::move(inv_std), gamma, name](
                            const Tensor& cot, ParameterSet& grads) {
            const Shape& s = cot.shape();
            const std::size_t plane = s.plane();
            const double inv_c = 1.0 / static_cast<double>(s.c);
            Tensor& gg = grads.at(name + ".gamma");
            Tensor& gbeta = grads.at(name + ".beta");
            Tensor gx(s);
            for (std::size_t n = 0; n < s.n; ++n) {
              for (std::size_t p = 0; p < plane; ++p) {
                double mean_dh = 0.0;
                double mean_dh_h = 0.0;
                for (std::size_t c = 0; c < s.c; ++c) {
                  const double g = cot.plane(n, c)[p];
                  const double h = xhat.plane(n, c)[p];
                  gg[c] += g * h;
                  gbeta[c] += g;
                  const double dh = g * (*gamma)[c];
                  mean_dh += dh;
                  mean_dh_h += dh * h;
                }
                mean_dh *= inv_c;
                mean_dh_h *= inv_c;
                const double is = inv_std.plane(n, 0)[p];
                for (std::size_t c = 0; c < s.c; ++c) {
                  const double dh = cot.plane(n, c)[p] * (*gamma)[c];
                  const double h = xhat.plane(n, c)[p];
                  gx.plane(n, c)[p] = is * (dh - mean_dh - h * mean_dh_h);
                }
              }
            }
            return gx;
          }};
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

GradientPair gelu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu_value(x[i]);
  return {std::move(y), [x](const Tensor& cot, ParameterSet&) {
            Tensor g(cot.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = cot[i] * gelu_derivative(x[i]);
            return g;
          }};
}

GradientPair leaky_relu(const Tensor& x, double slope) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  return {std::move(y), [x, slope](const Tensor& cot, ParameterSet&) {
            Tensor g(cot.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = x[i] > 0.0 ? cot[i] : slope * cot[i];
            return g;
          }};
}

GradientPair scale(const Tensor& x, double s) {
  return {x * s, [s](const Tensor& cot, ParameterSet&) { return cot * s; }};
}

GradientPair shuffle(const Tensor& x, int r) {
  return {pixel_shuffle(x, r),
          [r](const Tensor& cot, ParameterSet&) { return pixel_unshuffle(cot, r); }};
}

GradientPair shift(const Tensor& x, long dy, long dx) {
  return {roll(x, dy, dx), [dy, dx](const Tensor& cot, ParameterSet&) { return roll(cot, -dy, -dx); }};
}

}  // namespace swtsr::layers
