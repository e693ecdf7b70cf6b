#include <doctest.h>

#include "helpers.hpp"
#include "swtsr/error.hpp"
#include "swtsr/ops.hpp"

using namespace swtsr;
using testing::random_tensor;

namespace {

// Direct loop over the defining sum, independent of the tap tables.
Tensor conv_oracle(const Tensor& in, const Tensor& k, int stride, Boundary b) {
  const Shape& s = in.shape();
  const Shape& ks = k.shape();
  const std::size_t oh = (s.h + stride - 1) / stride;
  const std::size_t ow = (s.w + stride - 1) / stride;
  const long ph = static_cast<long>(ks.h - 1) / 2;
  const long pw = static_cast<long>(ks.w - 1) / 2;
  Tensor out(Shape{s.n, ks.n, oh, ow});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < ks.n; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t a = 0; a < ks.h; ++a)
              for (std::size_t bb = 0; bb < ks.w; ++bb) {
                long y = long(i) * stride + long(a) - ph;
                long x = long(j) * stride + long(bb) - pw;
                if (b == Boundary::periodic) {
                  y = (y + 100 * long(s.h)) % long(s.h);
                  x = (x + 100 * long(s.w)) % long(s.w);
                } else if (y < 0 || x < 0 || y >= long(s.h) || x >= long(s.w)) {
                  continue;
                }
                acc += k(o, c, a, bb) * in(n, c, std::size_t(y), std::size_t(x));
              }
          out(n, o, i, j) = acc;
        }
  return out;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("tensor construction checks data length") {
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(3)), DimensionError);
  Tensor t(Shape{2, 3, 4, 5}, 1.5);
  CHECK(t.size() == 120);
  CHECK(t(1, 2, 3, 4) == 1.5);
  CHECK(t.index(1, 2, 3, 4) == 119);
}

TEST_CASE("elementwise arithmetic and reductions") {
  Tensor a(Shape{1, 1, 1, 3}, std::vector<double>{1, 2, 3});
  Tensor b(Shape{1, 1, 1, 3}, std::vector<double>{4, -5, 6});
  CHECK(dot(a, b) == doctest::Approx(1 * 4 - 2 * 5 + 3 * 6));
  CHECK(sum(a + b) == doctest::Approx(11));
  CHECK(max_abs(b) == 6);
  CHECK(max_abs_diff(a, b) == 7);
  CHECK_THROWS_AS(a + Tensor(Shape{1, 1, 3, 1}), DimensionError);
  Tensor c = a;
  c.axpy(2.0, b);
  CHECK(c[1] == 2 - 10);
}

TEST_CASE("roll moves values with periodic wrap") {
  std::mt19937_64 rng(1);
  const Tensor t = random_tensor(Shape{1, 2, 5, 7}, rng);
  const Tensor r = roll(t, 2, -3);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 7; ++x) CHECK(r(0, 1, (y + 2) % 5, (x + 4) % 7) == t(0, 1, y, x));
  CHECK(max_abs_diff(roll(r, -2, 3), t) == 0.0);
}

TEST_CASE("channel slicing round trip") {
  std::mt19937_64 rng(2);
  const Tensor t = random_tensor(Shape{2, 5, 3, 3}, rng);
  Tensor rebuilt(t.shape());
  assign_channels(rebuilt, slice_channels(t, 0, 2), 0);
  assign_channels(rebuilt, slice_channels(t, 2, 5), 2);
  CHECK(max_abs_diff(rebuilt, t) == 0.0);
  CHECK_THROWS_AS(slice_channels(t, 3, 6), DimensionError);
}

TEST_CASE("conv2d identity and zero kernels") {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(Shape{2, 3, 6, 5}, rng);
  Tensor eye(Shape{3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) eye(c, c, 0, 0) = 1.0;
  CHECK(max_abs_diff(conv2d(x, eye), x) == 0.0);
  const Tensor z = conv2d(x, Tensor(Shape{4, 3, 3, 3}));
  CHECK(z.shape() == Shape{2, 4, 6, 5});
  CHECK(max_abs(z) == 0.0);
}

TEST_CASE("conv2d averaging kernel on a ramp matches direct loop") {
  Tensor ramp(Shape{1, 1, 4, 4});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) ramp(0, 0, y, x) = double(4 * y + x);
  const Tensor avg(Shape{1, 1, 3, 3}, 1.0 / 9.0);
  const Tensor out = conv2d(ramp, avg, 1, Boundary::periodic);
  CHECK(max_abs_diff(out, conv_oracle(ramp, avg, 1, Boundary::periodic)) < 1e-14);
  // Interior pixel (1,1): mean of rows 0..2, cols 0..2.
  CHECK(out(0, 0, 1, 1) == doctest::Approx(5.0));
  // Corner (0,0) wraps to rows {3,0,1} and cols {3,0,1}: mean = (4*y_mean + x_mean)
  CHECK(out(0, 0, 0, 0) == doctest::Approx(4.0 * (4.0 / 3.0) + 4.0 / 3.0));
}

TEST_CASE("conv2d matches direct loop for all boundaries, strides and even kernels") {
  std::mt19937_64 rng(4);
  for (Boundary b : {Boundary::periodic, Boundary::zero}) {
    for (int stride : {1, 2, 3}) {
      for (std::size_t k : {1u, 2u, 3u, 4u, 5u}) {
        const Tensor x = random_tensor(Shape{2, 3, 7, 6}, rng);
        const Tensor w = random_tensor(Shape{4, 3, k, k}, rng);
        CHECK(max_abs_diff(conv2d(x, w, stride, b), conv_oracle(x, w, stride, b)) < 1e-12);
      }
    }
  }
}

TEST_CASE("conv2d rejects mismatched channels and bad stride") {
  const Tensor x(Shape{1, 3, 4, 4});
  CHECK_THROWS_AS(conv2d(x, Tensor(Shape{2, 2, 3, 3})), DimensionError);
  CHECK_THROWS_AS(conv2d(x, Tensor(Shape{2, 3, 3, 3}), 0), DimensionError);
}

TEST_CASE("periodic conv2d is shift equivariant") {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(Shape{1, 2, 8, 9}, rng);
  const Tensor w = random_tensor(Shape{3, 2, 3, 3}, rng);
  CHECK(max_abs_diff(conv2d(roll(x, 3, -2), w), roll(conv2d(x, w), 3, -2)) <= 1e-12);
}

TEST_CASE("conv2d_backward satisfies the adjoint identity") {
  std::mt19937_64 rng(6);
  for (Boundary b : {Boundary::periodic, Boundary::zero}) {
    for (int stride : {1, 2}) {
      const Tensor x = random_tensor(Shape{2, 3, 6, 7}, rng);
      const Tensor w = random_tensor(Shape{4, 3, 3, 3}, rng);
      const Tensor dx = random_tensor(x.shape(), rng);
      const Tensor dw = random_tensor(w.shape(), rng);
      const Tensor v = random_tensor(conv2d(x, w, stride, b).shape(), rng);
      const Conv2dGrads g = conv2d_backward(x, w, v, stride, b);
      // conv2d is bilinear, so <J_x dx + J_w dw, v> is exact.
      const double lhs = dot(conv2d(dx, w, stride, b), v) + dot(conv2d(x, dw, stride, b), v);
      const double rhs = dot(dx, g.input) + dot(dw, g.kernel);
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("pixel_shuffle rearrangement") {
  const Tensor abcd(Shape{1, 4, 1, 1}, std::vector<double>{1, 2, 3, 4});
  const Tensor grid = pixel_shuffle(abcd, 2);
  CHECK(grid.shape() == Shape{1, 1, 2, 2});
  CHECK(grid(0, 0, 0, 0) == 1);
  CHECK(grid(0, 0, 0, 1) == 2);
  CHECK(grid(0, 0, 1, 0) == 3);
  CHECK(grid(0, 0, 1, 1) == 4);

  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(Shape{2, 8, 3, 5}, rng);
  CHECK(max_abs_diff(pixel_shuffle(x, 1), x) == 0.0);
  const Tensor y = pixel_shuffle(x, 2);
  CHECK(y.shape() == Shape{2, 2, 6, 10});
  CHECK(sum(y) == doctest::Approx(sum(x)).epsilon(1e-12));
  CHECK(max_abs_diff(pixel_unshuffle(y, 2), x) == 0.0);
  CHECK_THROWS_AS(pixel_shuffle(Tensor(Shape{1, 6, 2, 2}), 2), DimensionError);
}

}  // TEST_SUITE
