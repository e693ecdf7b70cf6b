#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "swtsr/tensor.hpp"

namespace swtsr {

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) with unit peak after removing `crop` pixels from every
/// border; on_y compares the luma of 3-channel inputs. Throws DimensionError
/// if the crop leaves nothing.
double psnr(const Tensor& x, const Tensor& y, int crop, bool on_y);

/// Mean local SSIM over the valid region of an 11x11 Gaussian window
/// (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, averaged over images and channels.
/// The cropped image must be at least 11x11.
double ssim(const Tensor& x, const Tensor& y, int crop, bool on_y);

/// Normalized 11x11 window weights, row-major.
std::vector<double> ssim_window();

struct ImageMetric {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<ImageMetric> images;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  int crop = 0;
  bool on_y = true;

  /// Fills the means from `images`.
  void finalize();
  nlohmann::json to_json() const;
  std::string table() const;
};

}  // namespace swtsr
