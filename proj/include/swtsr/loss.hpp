#pragma once

#include <string>
#include <vector>

#include "swtsr/tensor.hpp"
#include "swtsr/wavelet.hpp"

namespace swtsr {

/// Weights and transform settings of the wavelet fidelity term.
struct LossConfig {
  std::string filter_name = "sym19";
  int levels = 1;
  /// One weight per subband, in SubbandPyramid order.
  std::vector<double> lambda = {0.05, 0.05, 0.05, 0.05};
  /// Compare luma only; otherwise every channel is decomposed separately.
  bool use_y_channel = true;

  /// Throws ConfigError on a bad level count, weight count or negative weight.
  void validate() const;

  /// sym19, one level, all weights 0.05, luma.
  static LossConfig defaults();
  /// One level with LL and HH weighted 0.05 and LH, HL weighted 0.01.
  static LossConfig swinir_preset();
  /// Same weight for every subband.
  static LossConfig uniform(const std::string& filter, int levels, double weight);
};

/// BT.601 luma of an RGB batch in [0, 1] (values are clipped first):
/// Y = (16 + 65.481 R + 128.553 G + 24.966 B) / 255, so Y is in [16/255, 235/255].
Tensor rgb_to_y(const Tensor& rgb);

/// Transpose of the Jacobian of rgb_to_y at `rgb` applied to `grad_y`.
/// Clipped coordinates (outside [0, 1]) receive zero.
Tensor rgb_to_y_pullback(const Tensor& rgb, const Tensor& grad_y);

/// Mean absolute difference over every element.
double l1_rgb(const Tensor& x, const Tensor& y);

/// sum_j lambda_j * mean |SWT(x)_j - SWT(y)_j|, averaged over the batch.
double swt_loss(const Tensor& x, const Tensor& y, const LossConfig& cfg);

/// total = l1_rgb + swt_loss.
double total_loss(const Tensor& x, const Tensor& y, const LossConfig& cfg);

/// Subgradient of total_loss with respect to x, using sign(0) = 0.
Tensor total_loss_grad(const Tensor& x, const Tensor& y, const LossConfig& cfg);

struct LossBreakdown {
  double rgb = 0.0;
  std::vector<std::string> labels;
  /// Unweighted mean |difference| per subband.
  std::vector<double> subband_l1;
  std::vector<double> lambda;
  double swt = 0.0;
  double total = 0.0;
};

/// All terms of total_loss, one entry per subband.
LossBreakdown loss_breakdown(const Tensor& x, const Tensor& y, const LossConfig& cfg);

}  // namespace swtsr
