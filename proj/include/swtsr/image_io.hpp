#pragma once

#include <string>

#include "swtsr/tensor.hpp"

namespace swtsr {

/// Reads an 8- or 16-bit grayscale or RGB PNG (palette images are expanded
/// to RGB) into a (1, c, h, w) tensor scaled to [0, 1]. Throws IoError naming
/// the path for unreadable files and alpha channels.
Tensor load_png(const std::string& path);

/// Writes a (1, 1, h, w) or (1, 3, h, w) tensor, clamping to [0, 1] and
/// rounding to the nearest level. bit_depth is 8 or 16.
void save_png(const Tensor& image, const std::string& path, int bit_depth = 8);

/// Rounds every value to the nearest of the 2^bit_depth - 1 levels in [0, 1].
Tensor quantize(const Tensor& image, int bit_depth = 8);

}  // namespace swtsr
