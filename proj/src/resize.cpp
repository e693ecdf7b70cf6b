#include "swtsr/resize.hpp"

#include <cmath>
#include <vector>

#include "swtsr/error.hpp"

namespace swtsr {
namespace {

struct Taps {
  std::size_t width = 0;
  std::vector<std::size_t> index;  // out * width
  std::vector<double> weight;
};

std::size_t mirror(long i, long n) {
  const long period = 2 * n;
  long k = ((i % period) + period) % period;
  return static_cast<std::size_t>(k < n ? k : period - 1 - k);
}

Taps contributions(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const bool shrink = scale < 1.0;
  const double support = shrink ? 4.0 / scale : 4.0;
  Taps t;
  t.width = static_cast<std::size_t>(std::ceil(support)) + 2;
  t.index.resize(out * t.width);
  t.weight.resize(out * t.width);
  for (std::size_t o = 0; o < out; ++o) {
    // 0-based centre of output sample o in input coordinates.
    const double u = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const long left = static_cast<long>(std::floor(u - support / 2.0));
    double total = 0.0;
    for (std::size_t k = 0; k < t.width; ++k) {
      const long i = left + static_cast<long>(k);
      const double d = u - static_cast<double>(i);
      const double w = shrink ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      t.index[o * t.width + k] = mirror(i, static_cast<long>(in));
      t.weight[o * t.width + k] = w;
      total += w;
    }
    for (std::size_t k = 0; k < t.width; ++k) t.weight[o * t.width + k] /= total;
  }
  return t;
}

}  // namespace

double cubic_kernel(double x) {
  const double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return (a + 2.0) * ax * ax * ax - (a + 3.0) * ax * ax + 1.0;
  if (ax < 2.0) return a * ax * ax * ax - 5.0 * a * ax * ax + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

Tensor bicubic_resize(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  const Shape& s = image.shape();
  if (out_h == 0 || out_w == 0) throw DimensionError("bicubic_resize: target size must be positive");
  if (s.h == 0 || s.w == 0) throw DimensionError("bicubic_resize: empty input " + s.str());
  if (out_h == s.h && out_w == s.w) return image;
  const Taps tx = contributions(s.w, out_w);
  const Taps ty = contributions(s.h, out_h);
  Tensor out(Shape{s.n, s.c, out_h, out_w});
  std::vector<double> rows(s.h * out_w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* in = image.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (std::size_t k = 0; k < tx.width; ++k) {
            acc += tx.weight[x * tx.width + k] * in[y * s.w + tx.index[x * tx.width + k]];
          }
          rows[y * out_w + x] = acc;
        }
      double* o = out.plane(n, c);
      for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (std::size_t k = 0; k < ty.width; ++k) {
            acc += ty.weight[y * ty.width + k] * rows[ty.index[y * ty.width + k] * out_w + x];
          }
          o[y * out_w + x] = acc;
        }
    }
  }
  return out;
}

Tensor bicubic_resize(const Tensor& image, int factor, ResizeDirection direction) {
  if (factor < 1) throw ConfigError("resize factor must be >= 1");
  const std::size_t f = static_cast<std::size_t>(factor);
  const Shape& s = image.shape();
  if (direction == ResizeDirection::up) return bicubic_resize(image, s.h * f, s.w * f);
  return bicubic_resize(image, (s.h + f - 1) / f, (s.w + f - 1) / f);
}

}  // namespace swtsr
