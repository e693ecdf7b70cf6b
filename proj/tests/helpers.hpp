#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "swtsr/autodiff.hpp"
#include "swtsr/loss.hpp"
#include "swtsr/tensor.hpp"

namespace testing {

using swtsr::ParameterSet;
using swtsr::Shape;
using swtsr::Tensor;

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(s);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline void randomize(ParameterSet& p, std::mt19937_64& rng, double scale = 0.5) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (double& v : p.value(i).data()) v = std::uniform_real_distribution<double>(-scale, scale)(rng);
  }
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

inline double param_dot(const ParameterSet& a, const ParameterSet& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += swtsr::dot(a.value(i), b.value(i));
  return acc;
}

// Checks <J u, v> against <u, J^T v> for a map f(x, params), where J is taken
// with respect to both the input and the parameters. J u is estimated with a
// 5-point stencil along (u_x, u_p). Returns the relative mismatch.
inline double adjoint_mismatch(
    const std::function<swtsr::GradientPair(const Tensor&, const ParameterSet&)>& f, const Tensor& x,
    const ParameterSet& params, std::mt19937_64& rng, double h = 1e-4) {
  const Tensor ux = random_tensor(x.shape(), rng);
  ParameterSet up = params.zeros_like();
  randomize(up, rng, 1.0);
  auto eval = [&](double t) {
    ParameterSet p = params.zeros_like();
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.value(i) = params.value(i);
      p.value(i).axpy(t, up.value(i));
    }
    Tensor xt = x;
    xt.axpy(t, ux);
    return f(xt, p).value;
  };
  Tensor jvp = eval(-2 * h) * (1.0 / 12.0);
  jvp.axpy(-8.0 / 12.0, eval(-h));
  jvp.axpy(8.0 / 12.0, eval(h));
  jvp.axpy(-1.0 / 12.0, eval(2 * h));
  jvp *= 1.0 / h;

  swtsr::GradientPair out = f(x, params);
  const Tensor v = random_tensor(out.value.shape(), rng);
  ParameterSet grads = params.zeros_like();
  const Tensor gx = out.pullback(v, grads);
  const double lhs = swtsr::dot(jvp, v);
  const double rhs = swtsr::dot(ux, gx) + param_dot(up, grads);
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

// Image pairs in [0.05, 0.95] whose pixel residuals are at least 0.1 in
// magnitude and whose subband residuals under `cfg` stay clear of zero by
// more than `margin`, so every l1 term is smooth within the probe step.
struct LossPair {
  Tensor x;
  Tensor y;
};

inline LossPair sample_loss_pair(Shape s, const swtsr::LossConfig& cfg, std::mt19937_64& rng,
                                 double margin = 1e-4) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (;;) {
    LossPair p{Tensor(s), Tensor(s)};
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      p.x[i] = u(rng);
      do {
        p.y[i] = u(rng);
      } while (std::abs(p.x[i] - p.y[i]) < 0.1);
    }
    const swtsr::FilterBank& f = swtsr::cached_filter(cfg.filter_name);
    auto planes = [&](const Tensor& t) {
      return cfg.use_y_channel ? swtsr::rgb_to_y(t) : t.reshaped(Shape{s.n * s.c, 1, s.h, s.w});
    };
    const auto a = swtsr::swt_forward(planes(p.x), f, cfg.levels);
    const auto b = swtsr::swt_forward(planes(p.y), f, cfg.levels);
    bool clear = true;
    for (std::size_t j = 0; j < a.subbands.size() && clear; ++j)
      for (std::size_t i = 0; i < a.subbands[j].size(); ++i)
        if (std::abs(a.subbands[j][i] - b.subbands[j][i]) <= margin) {
          clear = false;
          break;
        }
    if (clear) return p;
  }
}

// Central differences of the total loss, coordinate by coordinate, compared
// with total_loss_grad. Returns {grad_check metric, error relative to max |grad|}.
inline std::pair<double, double> loss_gradient_errors(const LossPair& p, const swtsr::LossConfig& cfg,
                                                      double eps = 1e-5) {
  const Tensor g = swtsr::total_loss_grad(p.x, p.y, cfg);
  Tensor probe = p.x;
  double worst_metric = 0.0, worst_abs = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = swtsr::total_loss(probe, p.y, cfg);
    probe[i] = saved - eps;
    const double down = swtsr::total_loss(probe, p.y, cfg);
    probe[i] = saved;
    const double cd = (up - down) / (2 * eps);
    worst_metric = std::max(worst_metric, std::abs(g[i] - cd) / std::max(1.0, std::abs(cd)));
    worst_abs = std::max(worst_abs, std::abs(g[i] - cd));
    scale = std::max(scale, std::abs(cd));
  }
  return {worst_metric, worst_abs / scale};
}

}  // namespace testing
