#include "swtsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "swtsr/error.hpp"

namespace swtsr {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << ", " << c << ", " << h << ", " << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != shape_.numel()) {
    throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor& Tensor::axpy(double s, const Tensor& other) {
  require_same_shape(*this, other, "tensor axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }
Tensor operator*(double s, Tensor a) { return a *= s; }

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(what + ": shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
  }
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return acc;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t end) {
  if (begin > end || end > t.channels()) {
    throw DimensionError("channel slice [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of range for " + t.shape().str());
  }
  const Shape& s = t.shape();
  Tensor out(Shape{s.n, end - begin, s.h, s.w});
  const std::size_t plane = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(t.plane(n, begin), (end - begin) * plane, out.plane(n, 0));
  }
  return out;
}

void assign_channels(Tensor& dst, const Tensor& src, std::size_t begin, bool accumulate) {
  const Shape& d = dst.shape();
  const Shape& s = src.shape();
  if (s.n != d.n || s.h != d.h || s.w != d.w || begin + s.c > d.c) {
    throw DimensionError("assign_channels: cannot place " + s.str() + " into " + d.str());
  }
  const std::size_t count = s.c * s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    double* out = dst.plane(n, begin);
    const double* in = src.plane(n, 0);
    if (accumulate) {
      for (std::size_t i = 0; i < count; ++i) out[i] += in[i];
    } else {
      std::copy_n(in, count, out);
    }
  }
}

Tensor roll(const Tensor& t, long dy, long dx) {
  const Shape& s = t.shape();
  Tensor out(s);
  if (s.numel() == 0) return out;
  const long h = static_cast<long>(s.h);
  const long w = static_cast<long>(s.w);
  const long oy = ((dy % h) + h) % h;
  const long ox = ((dx % w) + w) % w;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* in = t.plane(n, c);
      double* o = out.plane(n, c);
      for (long y = 0; y < h; ++y) {
        const long ty = (y + oy) % h;
        for (long x = 0; x < w; ++x) {
          o[ty * w + (x + ox) % w] = in[y * w + x];
        }
      }
    }
  }
  return out;
}

}  // namespace swtsr
