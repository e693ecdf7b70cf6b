#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "swtsr/loss.hpp"
#include "swtsr/metrics.hpp"
#include "swtsr/model.hpp"
#include "swtsr/wavelet.hpp"

// Experiment drivers and file formats behind the command-line tool.
namespace swtsr {

nlohmann::json to_json(const LossConfig& cfg);
/// Keys: filter, levels, lambda (number or per-subband array), use_y.
/// Unknown keys throw ConfigError.
LossConfig loss_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AdamSettings& s);
AdamSettings adam_settings_from_json(const nlohmann::json& j);

/// Subband sidecar: "SWTSUBB1", u32 levels, channels, height, width,
/// filter-name length, the name, u32 subband count, then little-endian f64
/// values ordered [subband][channel][row][column]. Subbands are stored as
/// (channels, 1, h, w) tensors.
void write_sidecar(const std::string& path, const SubbandPyramid& pyramid);
SubbandPyramid read_sidecar(const std::string& path);

/// Per-channel decomposition of a (1, c, h, w) image.
SubbandPyramid decompose_image(const Tensor& image, const std::string& filter, int levels);
Tensor reconstruct_image(const SubbandPyramid& pyramid);

/// Min-max stretch of one subband to [0, 1] for display (constant -> 0.5).
Tensor display_subband(const Tensor& band);

/// Sorted *.png names in a directory.
std::vector<std::string> list_pngs(const std::string& dir);

/// Pairs files of equal name in both directories; a missing counterpart throws
/// IoError naming it.
MetricReport evaluate_dirs(const std::string& sr_dir, const std::string& gt_dir, int crop, bool on_y);

/// Writes bicubic-downscaled copies of every PNG in hr_dir to lr_dir.
std::size_t degrade_dir(const std::string& hr_dir, const std::string& lr_dir, int factor);

/// Horizontal flip followed by `quarter_turns` counter-clockwise rotations.
Tensor augment(const Tensor& t, bool flip, int quarter_turns);

/// Low- and high-resolution views of the same content.
struct Pair {
  Tensor lr;
  Tensor hr;
};

/// Oriented sinusoid gratings with random angle, period, phase and colour.
std::vector<Tensor> make_stripes(std::size_t count, std::size_t size, std::uint64_t seed);
/// Writes make_stripes output as stripe_XXX.png; returns the file names.
std::vector<std::string> write_stripes(const std::string& dir, std::size_t count, std::size_t size,
                                       std::uint64_t seed);

struct TrainConfig {
  std::string data_dir;
  /// Optional directory of LR images with the same names; generated otherwise.
  std::string lr_dir;
  std::string output_dir;
  ModelConfig model;
  LossConfig loss;
  AdamSettings optimizer;
  int steps = 200;
  int batch_size = 1;
  /// LR patch side; 0 uses the whole (window-aligned) image.
  int patch_size = 16;
  bool augment = true;
  std::uint64_t seed = 0;
  /// Image (name inside data_dir) super-resolved at the end; default is the first.
  std::string validation_image;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Unknown keys throw ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainResult {
  std::vector<double> losses;
  Model model;
};

/// Loads (LR, HR) pairs for training: HR cropped to a multiple of
/// scale * window, LR read from lr_dir or produced by bicubic downscaling.
std::vector<Pair> load_training_pairs(const TrainConfig& cfg);

/// Trains on in-memory pairs; no files are written.
TrainResult train_on_pairs(const TrainConfig& cfg, const std::vector<Pair>& pairs);

/// Full run: echoes the resolved config, trains, and writes loss.csv,
/// checkpoint.bin and sr_<validation image>.png to output_dir.
TrainResult run_toy_train(const TrainConfig& cfg);

/// Mean absolute per-subband difference between the luma decompositions.
struct SubbandErrors {
  std::vector<std::string> labels;
  std::vector<double> errors;
};
SubbandErrors subband_errors(const Tensor& sr, const Tensor& hr, const std::string& filter, int levels);

struct AblationArm {
  std::string name;
  double lambda = 0.0;
  std::vector<double> losses;
  SubbandErrors errors;
  double psnr = 0.0;
};

struct AblationReport {
  std::vector<AblationArm> arms;
  nlohmann::json to_json() const;
  std::string table() const;
};

/// Trains one arm per lambda (applied to every subband) on stripes pairs with
/// identical seeds and steps, then measures subband errors on held-out stripes.
AblationReport run_ablation(const TrainConfig& base, const std::vector<double>& lambdas,
                            std::size_t train_images, std::size_t test_images, std::size_t hr_size);

}  // namespace swtsr
