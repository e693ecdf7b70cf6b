#pragma once

#include "swtsr/tensor.hpp"

namespace swtsr {

enum class Boundary { periodic, zero };

/// 2-D cross-correlation (no kernel flip) of `input` (n, in_c, h, w) with
/// `kernel` (out_c, in_c, kh, kw). The input is pre-padded by (k - 1) / 2 on
/// the leading side so that stride 1 yields an output of the input's size;
/// stride s samples every s-th position of that same-size map.
///
///   out(n, o, i, j) = sum_{c, a, b} kernel(o, c, a, b) * in(n, c, i*s + a - ph, j*s + b - pw)
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1,
              Boundary boundary = Boundary::periodic);

struct Conv2dGrads {
  Tensor input;
  Tensor kernel;
};

/// Vector-Jacobian products of conv2d with respect to input and kernel.
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                            int stride = 1, Boundary boundary = Boundary::periodic);

/// (n, c*r*r, h, w) -> (n, c, h*r, w*r); out(k, y*r + i, x*r + j) = in(k*r*r + i*r + j, y, x).
Tensor pixel_shuffle(const Tensor& input, int r);
/// Exact inverse of pixel_shuffle (and its adjoint, since it is a permutation).
Tensor pixel_unshuffle(const Tensor& input, int r);

}  // namespace swtsr
