#include "swtsr/ops.hpp"

#include <vector>

#include "swtsr/error.hpp"

namespace swtsr {
namespace {

struct ConvGeometry {
  std::size_t out_h;
  std::size_t out_w;
  // rows[a][i]: source row for output row i and kernel row a, or -1 for zero padding.
  std::vector<std::vector<long>> rows;
  std::vector<std::vector<long>> cols;
};

std::vector<std::vector<long>> tap_table(std::size_t in, std::size_t out, std::size_t k,
                                         int stride, Boundary boundary) {
  const long pad = static_cast<long>((k - 1) / 2);
  const long n = static_cast<long>(in);
  std::vector<std::vector<long>> table(k, std::vector<long>(out));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t i = 0; i < out; ++i) {
      long src = static_cast<long>(i) * stride + static_cast<long>(a) - pad;
      if (boundary == Boundary::periodic) {
        src = ((src % n) + n) % n;
      } else if (src < 0 || src >= n) {
        src = -1;
      }
      table[a][i] = src;
    }
  }
  return table;
}

ConvGeometry geometry(const Tensor& input, const Tensor& kernel, int stride,
                      Boundary boundary) {
  const Shape& in = input.shape();
  const Shape& k = kernel.shape();
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (k.c != in.c) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(k.c) +
                         " input channels but input " + in.str() + " has " +
                         std::to_string(in.c));
  }
  if (in.h == 0 || in.w == 0) throw DimensionError("conv2d: empty spatial input " + in.str());
  if (k.h == 0 || k.w == 0 || k.h > in.h + k.h - 1 || k.w > in.w + k.w - 1) {
    throw DimensionError("conv2d: kernel " + k.str() + " incompatible with input " + in.str());
  }
  ConvGeometry g;
  g.out_h = (in.h + stride - 1) / stride;
  g.out_w = (in.w + stride - 1) / stride;
  g.rows = tap_table(in.h, g.out_h, k.h, stride, boundary);
  g.cols = tap_table(in.w, g.out_w, k.w, stride, boundary);
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, Boundary boundary) {
  const ConvGeometry g = geometry(input, kernel, stride, boundary);
  const Shape& in = input.shape();
  const Shape& k = kernel.shape();
  Tensor out(Shape{in.n, k.n, g.out_h, g.out_w});
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t o = 0; o < k.n; ++o) {
      double* dst = out.plane(n, o);
      for (std::size_t c = 0; c < in.c; ++c) {
        const double* src = input.plane(n, c);
        for (std::size_t a = 0; a < k.h; ++a) {
          const auto& rows = g.rows[a];
          for (std::size_t b = 0; b < k.w; ++b) {
            const double wgt = kernel(o, c, a, b);
            if (wgt == 0.0) continue;
            const auto& cols = g.cols[b];
            for (std::size_t i = 0; i < g.out_h; ++i) {
              if (rows[i] < 0) continue;
              const double* srow = src + rows[i] * in.w;
              double* drow = dst + i * g.out_w;
              for (std::size_t j = 0; j < g.out_w; ++j) {
                if (cols[j] >= 0) drow[j] += wgt * srow[cols[j]];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                            int stride, Boundary boundary) {
  const ConvGeometry g = geometry(input, kernel, stride, boundary);
  const Shape& in = input.shape();
  const Shape& k = kernel.shape();
  const Shape expected{in.n, k.n, g.out_h, g.out_w};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d_backward: cotangent " + grad_out.shape().str() +
                         " does not match output " + expected.str());
  }
  Conv2dGrads grads{Tensor(in), Tensor(k)};
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t o = 0; o < k.n; ++o) {
      const double* gout = grad_out.plane(n, o);
      for (std::size_t c = 0; c < in.c; ++c) {
        const double* src = input.plane(n, c);
        double* gin = grads.input.plane(n, c);
        for (std::size_t a = 0; a < k.h; ++a) {
          const auto& rows = g.rows[a];
          for (std::size_t b = 0; b < k.w; ++b) {
            const double wgt = kernel(o, c, a, b);
            const auto& cols = g.cols[b];
            double gw = 0.0;
            for (std::size_t i = 0; i < g.out_h; ++i) {
              if (rows[i] < 0) continue;
              const double* srow = src + rows[i] * in.w;
              double* girow = gin + rows[i] * in.w;
              const double* grow = gout + i * g.out_w;
              for (std::size_t j = 0; j < g.out_w; ++j) {
                if (cols[j] < 0) continue;
                gw += grow[j] * srow[cols[j]];
                girow[cols[j]] += wgt * grow[j];
              }
            }
            grads.kernel(o, c, a, b) += gw;
          }
        }
      }
    }
  }
  return grads;
}

Tensor pixel_shuffle(const Tensor& input, int r) {
  if (r < 1) throw DimensionError("pixel_shuffle: factor must be >= 1");
  const Shape& s = input.shape();
  const std::size_t rr = static_cast<std::size_t>(r) * r;
  if (s.c % rr != 0) {
    throw DimensionError("pixel_shuffle: channel count " + std::to_string(s.c) +
                         " not divisible by r^2 = " + std::to_string(rr));
  }
  const std::size_t ur = static_cast<std::size_t>(r);
  Tensor out(Shape{s.n, s.c / rr, s.h * ur, s.w * ur});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t ic = 0; ic < s.c; ++ic) {
      const std::size_t oc = ic / rr;
      const std::size_t i = (ic % rr) / ur;
      const std::size_t j = ic % ur;
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
          out(n, oc, y * ur + i, x * ur + j) = input(n, ic, y, x);
        }
      }
    }
  }
  return out;
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
  if (r < 1) throw DimensionError("pixel_unshuffle: factor must be >= 1");
  const Shape& s = input.shape();
  const std::size_t ur = static_cast<std::size_t>(r);
  if (s.h % ur != 0 || s.w % ur != 0) {
    throw DimensionError("pixel_unshuffle: spatial size " + s.str() +
                         " not divisible by " + std::to_string(r));
  }
  const std::size_t rr = ur * ur;
  Tensor out(Shape{s.n, s.c * rr, s.h / ur, s.w / ur});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t oc = 0; oc < out.channels(); ++oc) {
      const std::size_t ic = oc / rr;
      const std::size_t i = (oc % rr) / ur;
      const std::size_t j = oc % ur;
      for (std::size_t y = 0; y < out.height(); ++y) {
        for (std::size_t x = 0; x < out.width(); ++x) {
          out(n, oc, y, x) = input(n, ic, y * ur + i, x * ur + j);
        }
      }
    }
  }
  return out;
}

}  // namespace swtsr
