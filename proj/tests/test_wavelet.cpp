#include <doctest.h>

#include <numbers>

#include "helpers.hpp"
#include "swtsr/error.hpp"
#include "swtsr/wavelet.hpp"

using namespace swtsr;
using testing::random_tensor;

namespace {

// Direct dilated 2-D true convolution of one plane: the first filter runs
// along x (rows), the second along y (columns).
Tensor filter_oracle(const Tensor& in, const std::vector<double>& fx, const std::vector<double>& fy,
                     std::size_t d) {
  const long h = long(in.height()), w = long(in.width());
  Tensor out(in.shape());
  for (std::size_t n = 0; n < in.batch(); ++n)
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t a = 0; a < fx.size(); ++a)
          for (std::size_t b = 0; b < fy.size(); ++b) {
            const long sy = ((y - long(d * b)) % h + h) % h;
            const long sx = ((x - long(d * a)) % w + w) % w;
            acc += fx[a] * fy[b] * in(n, 0, std::size_t(sy), std::size_t(sx));
          }
        out(n, 0, std::size_t(y), std::size_t(x)) = acc;
      }
  return out;
}

std::vector<Tensor> swt_oracle(const Tensor& image, const FilterBank& f, int levels) {
  std::vector<std::vector<Tensor>> details;
  Tensor approx = image;
  for (int l = 1; l <= levels; ++l) {
    const std::size_t d = std::size_t(1) << (l - 1);
    details.push_back({filter_oracle(approx, f.dec_lo, f.dec_hi, d),
                       filter_oracle(approx, f.dec_hi, f.dec_lo, d),
                       filter_oracle(approx, f.dec_hi, f.dec_hi, d)});
    approx = filter_oracle(approx, f.dec_lo, f.dec_lo, d);
  }
  std::vector<Tensor> out{approx};
  for (int l = levels; l >= 1; --l)
    for (const Tensor& t : details[std::size_t(l - 1)]) out.push_back(t);
  return out;
}

double pyramid_dot(const SubbandPyramid& a, const SubbandPyramid& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.subbands.size(); ++j) acc += dot(a.subbands[j], b.subbands[j]);
  return acc;
}

SubbandPyramid random_pyramid(Shape s, const std::string& filter, int levels, std::mt19937_64& rng) {
  SubbandPyramid p{levels, filter, {}};
  for (std::size_t j = 0; j < SubbandPyramid::count_for(levels); ++j) p.subbands.push_back(random_tensor(s, rng));
  return p;
}

Tensor checker(double scale) {
  Tensor t(Shape{1, 1, 2, 2});
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) t(0, 0, y, x) = ((x + y) % 2 == 0 ? 1.0 : -1.0) * scale;
  return t;
}

}  // namespace

TEST_SUITE("wavelet") {

TEST_CASE("haar filter values") {
  const FilterBank f = make_filter("haar");
  const double r = 1.0 / std::numbers::sqrt2;
  REQUIRE(f.length() == 2);
  CHECK(f.dec_lo[0] == doctest::Approx(r).epsilon(1e-15));
  CHECK(f.dec_lo[1] == doctest::Approx(r).epsilon(1e-15));
  CHECK(f.dec_hi[0] == doctest::Approx(r).epsilon(1e-15));
  CHECK(f.dec_hi[1] == doctest::Approx(-r).epsilon(1e-15));
}

TEST_CASE("sym2 matches its closed form") {
  const FilterBank f = make_filter("sym2");
  const double s3 = std::sqrt(3.0);
  const double k = 4.0 * std::numbers::sqrt2;
  const std::vector<double> expect = {(1 - s3) / k, (3 - s3) / k, (3 + s3) / k, (1 + s3) / k};
  REQUIRE(f.length() == 4);
  // The shipped table carries about 13 correct digits.
  for (std::size_t i = 0; i < 4; ++i) CHECK(f.dec_lo[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("shipped banks satisfy the orthonormal filter-bank relations") {
  const std::vector<std::pair<std::string, std::size_t>> lengths = {
      {"haar", 2}, {"sym2", 4}, {"sym4", 8}, {"sym8", 16}, {"sym19", 38}};
  CHECK(supported_filters().size() == lengths.size());
  for (const auto& [name, len] : lengths) {
    CAPTURE(name);
    const FilterBank f = make_filter(name);
    CHECK(f.length() == len);
    double total = 0.0, energy = 0.0;
    for (double v : f.dec_lo) {
      total += v;
      energy += v * v;
    }
    CHECK(std::abs(total - std::numbers::sqrt2) < 1e-10);
    CHECK(std::abs(energy - 1.0) < 1e-10);
    for (std::size_t shift = 2; shift < len; shift += 2) {
      double acc = 0.0;
      for (std::size_t k = 0; k + shift < len; ++k) acc += f.dec_lo[k] * f.dec_lo[k + shift];
      CHECK(std::abs(acc) < 1e-10);
    }
    for (std::size_t k = 0; k < len; ++k) {
      CHECK(std::abs(f.dec_hi[k] - (k % 2 == 0 ? 1.0 : -1.0) * f.dec_lo[len - 1 - k]) < 1e-10);
      CHECK(f.rec_lo[k] == f.dec_lo[len - 1 - k]);
      CHECK(f.rec_hi[k] == f.dec_hi[len - 1 - k]);
    }
  }
}

TEST_CASE("unknown filters and corrupt tables are rejected") {
  try {
    make_filter("db99");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("db99") != std::string::npos);
    CHECK(msg.find("sym19") != std::string::npos);
    CHECK(msg.find("haar") != std::string::npos);
  }
  CHECK_THROWS_AS(filter_from_tables("bad", "0.7071\nabc\n", "0.7071\n-0.7071\n"), IntegrityError);
  CHECK_THROWS_AS(filter_from_tables("bad", "0.7\n0.7\n", "0.7\n-0.7\n"), IntegrityError);
  FilterBank f = make_filter("sym4");
  f.dec_hi[3] += 1e-6;
  CHECK_THROWS_AS(validate(f), IntegrityError);
  CHECK_NOTHROW(filter_from_tables("h", "# comment\n0.70710678118654752\n0.70710678118654752\n",
                                   "0.70710678118654752\n-0.70710678118654752\n"));
}

TEST_CASE("subband ordering and labels") {
  CHECK(SubbandPyramid::count_for(1) == 4);
  CHECK(SubbandPyramid::count_for(2) == 7);
  const std::vector<std::string> expect = {"LL2", "LH2", "HL2", "HH2", "LH1", "HL1", "HH1"};
  for (std::size_t j = 0; j < expect.size(); ++j) CHECK(SubbandPyramid::label(j, 2) == expect[j]);
  CHECK(SubbandPyramid::index_of(SubbandKind::HH, 1, 2) == 6);
  CHECK(SubbandPyramid::index_of(SubbandKind::LL, 2, 2) == 0);
  CHECK(SubbandPyramid::kind_of(5) == SubbandKind::HL);
  CHECK(SubbandPyramid::level_of(2, 2) == 2);
  CHECK_THROWS_AS(SubbandPyramid::index_of(SubbandKind::LL, 1, 2), DimensionError);
}

TEST_CASE("forward rejects bad input") {
  const FilterBank& f = cached_filter("haar");
  CHECK_THROWS_AS(swt_forward(Tensor(Shape{1, 3, 8, 8}), f, 1), DimensionError);
  CHECK_THROWS_AS(swt_forward(Tensor(Shape{1, 1, 8, 8}), f, 0), DimensionError);
  SubbandPyramid p = swt_forward(Tensor(Shape{1, 1, 8, 8}), f, 1);
  p.subbands[2] = Tensor(Shape{1, 1, 8, 7});
  CHECK_THROWS_AS(swt_inverse(p, f), DimensionError);
  p.subbands.pop_back();
  CHECK_THROWS_AS(swt_adjoint(p, f), DimensionError);
}

TEST_CASE("constant image through haar") {
  const Tensor img(Shape{1, 1, 6, 5}, 0.3);
  const SubbandPyramid p = swt_forward(img, cached_filter("haar"), 1);
  for (double v : p.subbands[0].data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-14));
  for (std::size_t j = 1; j < 4; ++j) CHECK(max_abs(p.subbands[j]) < 1e-15);
}

TEST_CASE("forward matches direct dilated convolution") {
  Tensor impulse(Shape{1, 1, 8, 8});
  impulse(0, 0, 2, 2) = 1.0;
  const SubbandPyramid p = swt_forward(impulse, cached_filter("haar"), 1);
  const auto oracle = swt_oracle(impulse, cached_filter("haar"), 1);
  for (std::size_t j = 0; j < 4; ++j) CHECK(max_abs_diff(p.subbands[j], oracle[j]) < 1e-15);
  // Diagonal detail of the impulse: +1/2 at (2,2) and (3,3), -1/2 at (2,3) and (3,2).
  CHECK(p.subbands[3](0, 0, 2, 2) == doctest::Approx(0.5));
  CHECK(p.subbands[3](0, 0, 3, 3) == doctest::Approx(0.5));
  CHECK(p.subbands[3](0, 0, 2, 3) == doctest::Approx(-0.5));

  std::mt19937_64 rng(1);
  for (const char* name : {"sym2", "sym4"}) {
    const Tensor x = random_tensor(Shape{2, 1, 9, 12}, rng);
    const SubbandPyramid q = swt_forward(x, cached_filter(name), 2);
    const auto o = swt_oracle(x, cached_filter(name), 2);
    for (std::size_t j = 0; j < 7; ++j) CHECK(max_abs_diff(q.subbands[j], o[j]) < 1e-12);
  }
}

TEST_CASE("hand-traced haar synthesis on 2x2") {
  const FilterBank& f = cached_filter("haar");
  // c + u * checkerboard decomposes into LL = 2c, HH = 2u * checkerboard.
  const double c = 0.25, u = 0.1;
  Tensor img(Shape{1, 1, 2, 2}, c);
  img += checker(u);
  const SubbandPyramid p = swt_forward(img, f, 1);
  CHECK(max_abs_diff(p.subbands[0], Tensor(img.shape(), 2 * c)) < 1e-15);
  CHECK(max_abs(p.subbands[1]) < 1e-15);
  CHECK(max_abs(p.subbands[2]) < 1e-15);
  CHECK(max_abs_diff(p.subbands[3], checker(2 * u)) < 1e-15);
  // A lone HH checkerboard of height t synthesizes to t/2 times the checkerboard.
  SubbandPyramid q{1, "haar", {Tensor(img.shape()), Tensor(img.shape()), Tensor(img.shape()), checker(0.8)}};
  CHECK(max_abs_diff(swt_inverse(q, f), checker(0.4)) < 1e-15);
  CHECK(max_abs_diff(swt_inverse(p, f), img) < 1e-15);
}

TEST_CASE("zero pyramids map to zero images") {
  const SubbandPyramid z{2, "sym4", std::vector<Tensor>(7, Tensor(Shape{1, 1, 8, 8}))};
  CHECK(max_abs(swt_inverse(z, cached_filter("sym4"))) == 0.0);
  CHECK(max_abs(swt_adjoint(z, cached_filter("sym4"))) == 0.0);
}

TEST_CASE("perfect reconstruction over sizes, levels and batch") {
  std::mt19937_64 rng(2);
  for (const char* name : {"haar", "sym2", "sym4", "sym8", "sym19"}) {
    for (int levels : {1, 2, 3}) {
      for (Shape s : {Shape{1, 1, 16, 16}, Shape{3, 1, 7, 13}, Shape{1, 1, 24, 40}}) {
        const Tensor x = random_tensor(s, rng);
        const FilterBank& f = cached_filter(name);
        CHECK(max_abs_diff(swt_inverse(swt_forward(x, f, levels), f), x) <= 1e-9);
      }
    }
  }
}

TEST_CASE("linearity and shift equivariance") {
  std::mt19937_64 rng(3);
  const FilterBank& f = cached_filter("sym4");
  const Tensor x = random_tensor(Shape{1, 1, 12, 10}, rng);
  const Tensor y = random_tensor(Shape{1, 1, 12, 10}, rng);
  const SubbandPyramid px = swt_forward(x, f, 2);
  const SubbandPyramid py = swt_forward(y, f, 2);
  const SubbandPyramid pc = swt_forward(x * 0.7 + y * -1.3, f, 2);
  const SubbandPyramid ps = swt_forward(roll(x, 5, -3), f, 2);
  for (std::size_t j = 0; j < 7; ++j) {
    CHECK(max_abs_diff(pc.subbands[j], px.subbands[j] * 0.7 + py.subbands[j] * -1.3) <= 1e-10);
    CHECK(max_abs_diff(ps.subbands[j], roll(px.subbands[j], 5, -3)) <= 1e-12);
  }
}

TEST_CASE("adjoint identity") {
  std::mt19937_64 rng(4);
  for (const char* name : {"haar", "sym19"}) {
    for (int levels : {1, 2}) {
      const Shape s{2, 1, 16, 12};
      const Tensor x = random_tensor(s, rng);
      const SubbandPyramid p = random_pyramid(s, name, levels, rng);
      const FilterBank& f = cached_filter(name);
      const double lhs = pyramid_dot(swt_forward(x, f, levels), p);
      const double rhs = dot(x, swt_adjoint(p, f));
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("explicit 4x4 transform matrix is a tight frame with constant 4") {
  for (const char* name : {"haar", "sym2", "sym4"}) {
    const FilterBank& f = cached_filter(name);
    // Columns of the 64x16 matrix are the transforms of unit impulses.
    std::vector<std::vector<double>> cols;
    for (std::size_t i = 0; i < 16; ++i) {
      Tensor e(Shape{1, 1, 4, 4});
      e[i] = 1.0;
      std::vector<double> col;
      for (const Tensor& band : swt_forward(e, f, 1).subbands) col.insert(col.end(), band.data().begin(), band.data().end());
      cols.push_back(col);
    }
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 16; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k < cols[i].size(); ++k) g += cols[i][k] * cols[j][k];
        // Table orthonormality holds to ~6e-13, scaled by the frame constant in 2D.
        CHECK(std::abs(g - (i == j ? 4.0 : 0.0)) < 1e-11);
      }
    std::mt19937_64 rng(5);
    const Tensor x = random_tensor(Shape{1, 1, 4, 4}, rng);
    CHECK(max_abs_diff(swt_adjoint(swt_forward(x, f, 1), f), x * 4.0) <= 1e-9);
  }
}

TEST_CASE("inverse uses the pyramid's own filter") {
  const SubbandPyramid p = swt_forward(Tensor(Shape{1, 1, 8, 8}), cached_filter("haar"), 1);
  CHECK_THROWS_AS(swt_inverse(p, cached_filter("sym4")), ConfigError);
}

}  // TEST_SUITE
