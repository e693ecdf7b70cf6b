#pragma once

#include <cstddef>

#include "swtsr/tensor.hpp"

namespace swtsr {

enum class ResizeDirection { down, up };

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Separable bicubic resampling to (out_h, out_w) with mirrored borders and
/// normalized weights. When shrinking an axis the kernel is widened by the
/// inverse scale (antialiasing). Throws DimensionError for zero sizes.
Tensor bicubic_resize(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Resize by an integer factor: down gives ceil(h / factor), up gives h * factor.
Tensor bicubic_resize(const Tensor& image, int factor, ResizeDirection direction);

}  // namespace swtsr
