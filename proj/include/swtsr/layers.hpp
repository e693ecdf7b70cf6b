#pragma once

#include <string>

#include "swtsr/autodiff.hpp"
#include "swtsr/ops.hpp"

// Differentiable building blocks over (n, c, h, w) feature maps. Layers read
// their weights from a ParameterSet by name; the parameters must stay alive
// and unchanged until the returned pullback has run.
namespace swtsr::layers {

/// conv2d with `<name>.weight` (out, in, k, k) and optional `<name>.bias` (1, out, 1, 1).
GradientPair conv(const Tensor& x, const ParameterSet& params, const std::string& name,
                  Boundary boundary = Boundary::zero);

/// Per-pixel affine map over channels; weight (out, in, 1, 1). Same as a 1x1 conv.
GradientPair linear(const Tensor& x, const ParameterSet& params, const std::string& name);

/// Normalizes each pixel's channel vector; `<name>.gamma`, `<name>.beta` shaped (1, c, 1, 1).
GradientPair layer_norm(const Tensor& x, const ParameterSet& params, const std::string& name,
                        double eps = 1e-5);

GradientPair gelu(const Tensor& x);
GradientPair leaky_relu(const Tensor& x, double slope);
GradientPair scale(const Tensor& x, double s);
GradientPair shuffle(const Tensor& x, int r);
GradientPair shift(const Tensor& x, long dy, long dx);

// Elementwise helpers shared with the attention kernels.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace swtsr::layers
