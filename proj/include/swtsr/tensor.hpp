#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace swtsr {

/// Extents of a rank-4 (batch, channel, height, width) tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense row-major rank-4 array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t batch() const { return shape_.n; }
  std::size_t channels() const { return shape_.c; }
  std::size_t height() const { return shape_.h; }
  std::size_t width() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  double& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(n, c, y, x)];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(n, c, y, x)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the start of plane (n, c).
  double* plane(std::size_t n, std::size_t c) { return data_.data() + index(n, c, 0, 0); }
  const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + index(n, c, 0, 0);
  }

  /// Same data viewed with a different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);
  /// this += s * other
  Tensor& axpy(double s, const Tensor& other);

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
Tensor operator*(double s, Tensor a);

/// Throws DimensionError naming `what` when the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& t);
double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Channel slice [begin, end) of every batch item.
Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t end);
/// Writes `src` into channels [begin, begin + src.channels()) of `dst`, adding when accumulate.
void assign_channels(Tensor& dst, const Tensor& src, std::size_t begin, bool accumulate = false);

/// Circular shift: out(y, x) = in(y - dy, x - dx) with periodic wrap.
Tensor roll(const Tensor& t, long dy, long dx);

}  // namespace swtsr
