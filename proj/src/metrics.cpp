#include "swtsr/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "swtsr/error.hpp"
#include "swtsr/loss.hpp"

namespace swtsr {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Cropped planes to compare: luma or the raw channels.
Tensor prepare(const Tensor& t, int crop, bool on_y, const char* what) {
  if (crop < 0) throw ConfigError(std::string(what) + ": crop must be >= 0");
  const Tensor src = on_y ? rgb_to_y(t) : t;
  const Shape& s = src.shape();
  const std::size_t c2 = 2 * static_cast<std::size_t>(crop);
  if (s.h <= c2 || s.w <= c2) {
    throw DimensionError(std::string(what) + ": crop " + std::to_string(crop) +
                         " leaves no pixels of a " + std::to_string(s.h) + "x" + std::to_string(s.w) + " image");
  }
  Tensor out(Shape{s.n, s.c, s.h - c2, s.w - c2});
  const std::size_t k = static_cast<std::size_t>(crop);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < out.height(); ++y)
        for (std::size_t x = 0; x < out.width(); ++x) out(n, c, y, x) = src(n, c, y + k, x + k);
  return out;
}

std::vector<double> gaussian_1d() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-region separable filtering of one h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t ow = w - kWindow + 1;
  const std::size_t oh = h - kWindow + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * plane[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Tensor& x, const Tensor& y, int crop, bool on_y) {
  require_same_shape(x, y, "psnr");
  const Tensor a = prepare(x, crop, on_y, "psnr");
  const Tensor b = prepare(y, crop, on_y, "psnr");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> ssim_window() {
  const std::vector<double> g = gaussian_1d();
  std::vector<double> w(kWindow * kWindow);
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) w[i * kWindow + j] = g[i] * g[j];
  return w;
}

double ssim(const Tensor& x, const Tensor& y, int crop, bool on_y) {
  require_same_shape(x, y, "ssim");
  const Tensor a = prepare(x, crop, on_y, "ssim");
  const Tensor b = prepare(y, crop, on_y, "ssim");
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  if (h < kWindow || w < kWindow) {
    throw DimensionError("ssim needs at least 11x11 pixels after cropping, got " +
                         std::to_string(h) + "x" + std::to_string(w));
  }
  const std::vector<double> g = gaussian_1d();
  const std::size_t plane = h * w;
  double total = 0.0;
  std::size_t planes = 0;
  std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
  for (std::size_t n = 0; n < a.batch(); ++n) {
    for (std::size_t c = 0; c < a.channels(); ++c) {
      const double* u = a.plane(n, c);
      const double* v = b.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        pa[i] = u[i];
        pb[i] = v[i];
        paa[i] = u[i] * u[i];
        pbb[i] = v[i] * v[i];
        pab[i] = u[i] * v[i];
      }
      const auto mu_a = filter_valid(pa, h, w, g);
      const auto mu_b = filter_valid(pb, h, w, g);
      const auto e_aa = filter_valid(paa, h, w, g);
      const auto e_bb = filter_valid(pbb, h, w, g);
      const auto e_ab = filter_valid(pab, h, w, g);
      double acc = 0.0;
      for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double va = e_aa[i] - mu_a[i] * mu_a[i];
        const double vb = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        acc += ((2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2));
      }
      total += acc / static_cast<double>(mu_a.size());
      ++planes;
    }
  }
  return total / static_cast<double>(planes);
}

void MetricReport::finalize() {
  mean_psnr = 0.0;
  mean_ssim = 0.0;
  if (images.empty()) return;
  for (const ImageMetric& m : images) {
    mean_psnr += m.psnr;
    mean_ssim += m.ssim;
  }
  mean_psnr /= static_cast<double>(images.size());
  mean_ssim /= static_cast<double>(images.size());
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["crop"] = crop;
  j["channel"] = on_y ? "y" : "rgb";
  j["images"] = nlohmann::json::array();
  for (const ImageMetric& m : images) {
    j["images"].push_back({{"name", m.name}, {"psnr", m.psnr}, {"ssim", m.ssim}});
  }
  j["mean_psnr"] = mean_psnr;
  j["mean_ssim"] = mean_ssim;
  return j;
}

std::string MetricReport::table() const {
  std::string out = "image                            PSNR(dB)    SSIM\n";
  char line[256];
  for (const ImageMetric& m : images) {
    std::snprintf(line, sizeof line, "%-32s %8.4f  %.6f\n", m.name.c_str(), m.psnr, m.ssim);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-32s %8.4f  %.6f\n", "mean", mean_psnr, mean_ssim);
  out += line;
  std::snprintf(line, sizeof line, "crop %d, %s\n", crop, on_y ? "Y channel" : "RGB");
  return out + line;
}

}  // namespace swtsr
