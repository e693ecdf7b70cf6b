#include "swtsr/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <set>

#include "swtsr/error.hpp"
#include "swtsr/image_io.hpp"
#include "swtsr/resize.hpp"

namespace fs = std::filesystem;

namespace swtsr {
namespace {

constexpr char kSidecarMagic[8] = {'S', 'W', 'T', 'S', 'U', 'B', 'B', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4] = {};
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

template <typename T>
T get_key(const nlohmann::json& value, const std::string& where, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + " key '" + key + "': " + e.what());
  }
}

Tensor to_rgb(const Tensor& t) {
  if (t.channels() == 3) return t;
  if (t.channels() != 1) throw DimensionError("expected a 1- or 3-channel image, got " + t.shape().str());
  Tensor out(Shape{t.batch(), 3, t.height(), t.width()});
  for (std::size_t n = 0; n < t.batch(); ++n)
    for (std::size_t c = 0; c < 3; ++c) std::copy_n(t.plane(n, 0), t.shape().plane(), out.plane(n, c));
  return out;
}

Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  Tensor out(Shape{t.batch(), t.channels(), h, w});
  for (std::size_t n = 0; n < t.batch(); ++n)
    for (std::size_t c = 0; c < t.channels(); ++c)
      for (std::size_t y = 0; y < h; ++y)
        std::copy_n(t.plane(n, c) + (y0 + y) * t.width() + x0, w, out.plane(n, c) + y * w);
  return out;
}

Tensor rot90(const Tensor& t) {
  const Shape& s = t.shape();
  Tensor out(Shape{s.n, s.c, s.w, s.h});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.w; ++y)
        for (std::size_t x = 0; x < s.h; ++x) out(n, c, y, x) = t(n, c, x, s.w - 1 - y);
  return out;
}

Tensor stack(const std::vector<Tensor>& items) {
  const Shape s = items.front().shape();
  Tensor out(Shape{items.size(), s.c, s.h, s.w});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != s) {
      throw DimensionError("batch items differ in shape: " + s.str() + " vs " + items[i].shape().str() +
                           "; set patch_size or use batch_size 1");
    }
    std::copy(items[i].data().begin(), items[i].data().end(), out.ptr() + i * s.numel());
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw IoError("failed while writing '" + path.string() + "'");
}

}  // namespace

nlohmann::json to_json(const LossConfig& cfg) {
  return {{"filter", cfg.filter_name}, {"levels", cfg.levels}, {"lambda", cfg.lambda},
          {"use_y", cfg.use_y_channel}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("loss config must be a JSON object");
  LossConfig cfg;
  bool has_lambda = false;
  std::optional<double> uniform_lambda;
  for (const auto& [key, value] : j.items()) {
    if (key == "filter") {
      cfg.filter_name = get_key<std::string>(value, "loss config", key);
    } else if (key == "levels") {
      cfg.levels = get_key<int>(value, "loss config", key);
    } else if (key == "use_y") {
      cfg.use_y_channel = get_key<bool>(value, "loss config", key);
    } else if (key == "lambda") {
      has_lambda = true;
      if (value.is_number()) {
        uniform_lambda = get_key<double>(value, "loss config", key);
      } else {
        cfg.lambda = get_key<std::vector<double>>(value, "loss config", key);
      }
    } else {
      throw ConfigError("unknown loss config key '" + key + "'");
    }
  }
  if (cfg.levels >= 1) {
    if (!has_lambda) {
      cfg.lambda.assign(SubbandPyramid::count_for(cfg.levels), LossConfig{}.lambda.front());
    } else if (uniform_lambda) {
      cfg.lambda.assign(SubbandPyramid::count_for(cfg.levels), *uniform_lambda);
    }
  }
  cfg.validate();
  make_filter(cfg.filter_name);
  return cfg;
}

nlohmann::json to_json(const AdamSettings& s) {
  return {{"learning_rate", s.learning_rate}, {"beta1", s.beta1}, {"beta2", s.beta2},
          {"eps", s.eps}, {"milestones", s.milestones}, {"decay", s.decay}};
}

AdamSettings adam_settings_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("optimizer config must be a JSON object");
  AdamSettings s;
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") s.learning_rate = get_key<double>(value, "optimizer", key);
    else if (key == "beta1") s.beta1 = get_key<double>(value, "optimizer", key);
    else if (key == "beta2") s.beta2 = get_key<double>(value, "optimizer", key);
    else if (key == "eps") s.eps = get_key<double>(value, "optimizer", key);
    else if (key == "milestones") s.milestones = get_key<std::vector<long>>(value, "optimizer", key);
    else if (key == "decay") s.decay = get_key<double>(value, "optimizer", key);
    else throw ConfigError("unknown optimizer config key '" + key + "'");
  }
  return s;
}

void write_sidecar(const std::string& path, const SubbandPyramid& pyramid) {
  if (pyramid.subbands.empty()) throw DimensionError("cannot write an empty subband pyramid");
  const Shape& s = pyramid.subbands.front().shape();
  if (s.c != 1) throw DimensionError("sidecar subbands must be (channels, 1, h, w), got " + s.str());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  os.write(kSidecarMagic, sizeof kSidecarMagic);
  write_u32(os, static_cast<std::uint32_t>(pyramid.levels));
  write_u32(os, static_cast<std::uint32_t>(s.n));
  write_u32(os, static_cast<std::uint32_t>(s.h));
  write_u32(os, static_cast<std::uint32_t>(s.w));
  write_u32(os, static_cast<std::uint32_t>(pyramid.filter_name.size()));
  os.write(pyramid.filter_name.data(), static_cast<std::streamsize>(pyramid.filter_name.size()));
  write_u32(os, static_cast<std::uint32_t>(pyramid.subbands.size()));
  for (const Tensor& band : pyramid.subbands) {
    if (band.shape() != s) throw DimensionError("subbands differ in shape");
    for (double v : band.data()) write_f64(os, v);
  }
  if (!os) throw IoError("failed while writing '" + path + "'");
}

SubbandPyramid read_sidecar(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[sizeof kSidecarMagic] = {};
  is.read(magic, sizeof magic);
  if (!std::equal(magic, magic + sizeof magic, kSidecarMagic)) {
    throw IoError("'" + path + "' is not a subband sidecar (bad magic)");
  }
  SubbandPyramid p;
  p.levels = static_cast<int>(read_u32(is));
  const std::size_t channels = read_u32(is);
  const std::size_t h = read_u32(is);
  const std::size_t w = read_u32(is);
  const std::uint32_t name_len = read_u32(is);
  if (!is || name_len > 256) throw IoError("'" + path + "': corrupt sidecar header");
  p.filter_name.assign(name_len, '\0');
  is.read(p.filter_name.data(), name_len);
  const std::uint32_t count = read_u32(is);
  if (!is || p.levels < 1 || count != SubbandPyramid::count_for(p.levels)) {
    throw IoError("'" + path + "': subband count does not match its level count");
  }
  for (std::uint32_t k = 0; k < count; ++k) {
    Tensor band(Shape{channels, 1, h, w});
    for (double& v : band.data()) v = read_f64(is);
    p.subbands.push_back(std::move(band));
  }
  if (!is) throw IoError("'" + path + "': truncated sidecar data");
  return p;
}

SubbandPyramid decompose_image(const Tensor& image, const std::string& filter, int levels) {
  const Shape& s = image.shape();
  if (s.n != 1) throw DimensionError("decompose_image expects a single image, got " + s.str());
  return swt_forward(image.reshaped(Shape{s.c, 1, s.h, s.w}), cached_filter(filter), levels);
}

Tensor reconstruct_image(const SubbandPyramid& pyramid) {
  const Tensor planes = swt_inverse(pyramid, cached_filter(pyramid.filter_name));
  const Shape& s = planes.shape();
  return planes.reshaped(Shape{1, s.n, s.h, s.w});
}

Tensor display_subband(const Tensor& band) {
  const auto [lo, hi] = std::minmax_element(band.data().begin(), band.data().end());
  Tensor out = band;
  const double range = *hi - *lo;
  for (double& v : out.data()) v = range > 0.0 ? (v - *lo) / range : 0.5;
  return out;
}

std::vector<std::string> list_pngs(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

MetricReport evaluate_dirs(const std::string& sr_dir, const std::string& gt_dir, int crop_px, bool on_y) {
  const auto gt = list_pngs(gt_dir);
  const auto sr = list_pngs(sr_dir);
  const std::set<std::string> sr_set(sr.begin(), sr.end());
  const std::set<std::string> gt_set(gt.begin(), gt.end());
  for (const auto& name : gt) {
    if (!sr_set.count(name)) throw IoError("missing pair: '" + name + "' has no counterpart in '" + sr_dir + "'");
  }
  for (const auto& name : sr) {
    if (!gt_set.count(name)) throw IoError("missing pair: '" + name + "' has no counterpart in '" + gt_dir + "'");
  }
  MetricReport report;
  report.crop = crop_px;
  report.on_y = on_y;
  for (const auto& name : gt) {
    const Tensor a = load_png((fs::path(sr_dir) / name).string());
    const Tensor b = load_png((fs::path(gt_dir) / name).string());
    if (a.shape() != b.shape()) {
      throw DimensionError("'" + name + "': sizes differ (" + a.shape().str() + " vs " + b.shape().str() + ")");
    }
    const bool luma = on_y && a.channels() == 3;
    report.images.push_back({name, psnr(a, b, crop_px, luma), ssim(a, b, crop_px, luma)});
  }
  report.finalize();
  return report;
}

std::size_t degrade_dir(const std::string& hr_dir, const std::string& lr_dir, int factor) {
  const auto names = list_pngs(hr_dir);
  fs::create_directories(lr_dir);
  for (const auto& name : names) {
    const Tensor hr = load_png((fs::path(hr_dir) / name).string());
    save_png(bicubic_resize(hr, factor, ResizeDirection::down), (fs::path(lr_dir) / name).string());
  }
  return names.size();
}

Tensor augment(const Tensor& t, bool flip, int quarter_turns) {
  Tensor out = t;
  if (flip) {
    const Shape& s = t.shape();
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t y = 0; y < s.h; ++y)
          for (std::size_t x = 0; x < s.w; ++x) out(n, c, y, x) = t(n, c, y, s.w - 1 - x);
  }
  for (int k = 0; k < ((quarter_turns % 4) + 4) % 4; ++k) out = rot90(out);
  return out;
}

std::vector<Tensor> make_stripes(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double angle = std::numbers::pi * unit(rng);
    const double period = 3.0 + 5.0 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    double dark[3], light[3];
    for (int c = 0; c < 3; ++c) {
      dark[c] = 0.1 + 0.3 * unit(rng);
      light[c] = 0.6 + 0.3 * unit(rng);
    }
    Tensor img(Shape{1, 3, size, size});
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double t = static_cast<double>(x) * std::cos(angle) + static_cast<double>(y) * std::sin(angle);
        const double s = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * t / period + phase);
        for (std::size_t c = 0; c < 3; ++c) img(0, c, y, x) = dark[c] + (light[c] - dark[c]) * s;
      }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<std::string> write_stripes(const std::string& dir, std::size_t count, std::size_t size,
                                       std::uint64_t seed) {
  fs::create_directories(dir);
  std::vector<std::string> names;
  const auto images = make_stripes(count, size, seed);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "stripe_%03zu.png", i);
    save_png(images[i], (fs::path(dir) / name).string());
    names.emplace_back(name);
  }
  return names;
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  cached_filter(loss.filter_name);
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patch_size < 0) throw ConfigError("patch_size must be >= 0");
  if (patch_size > 0 && model.n_groups > 0 && patch_size % model.window != 0) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " must be a multiple of window " +
                      std::to_string(model.window));
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"data_dir", cfg.data_dir},
          {"lr_dir", cfg.lr_dir},
          {"output_dir", cfg.output_dir},
          {"model", to_json(cfg.model)},
          {"loss", to_json(cfg.loss)},
          {"optimizer", to_json(cfg.optimizer)},
          {"steps", cfg.steps},
          {"batch_size", cfg.batch_size},
          {"patch_size", cfg.patch_size},
          {"augment", cfg.augment},
          {"seed", cfg.seed},
          {"validation_image", cfg.validation_image}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  TrainConfig cfg;
  const std::string where = "run config";
  for (const auto& [key, value] : j.items()) {
    if (key == "data_dir") cfg.data_dir = get_key<std::string>(value, where, key);
    else if (key == "lr_dir") cfg.lr_dir = get_key<std::string>(value, where, key);
    else if (key == "output_dir") cfg.output_dir = get_key<std::string>(value, where, key);
    else if (key == "model") cfg.model = model_config_from_json(value);
    else if (key == "loss") cfg.loss = loss_config_from_json(value);
    else if (key == "optimizer") cfg.optimizer = adam_settings_from_json(value);
    else if (key == "steps") cfg.steps = get_key<int>(value, where, key);
    else if (key == "batch_size") cfg.batch_size = get_key<int>(value, where, key);
    else if (key == "patch_size") cfg.patch_size = get_key<int>(value, where, key);
    else if (key == "augment") cfg.augment = get_key<bool>(value, where, key);
    else if (key == "seed") cfg.seed = get_key<std::uint64_t>(value, where, key);
    else if (key == "validation_image") cfg.validation_image = get_key<std::string>(value, where, key);
    else throw ConfigError("unknown run config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

std::vector<Pair> load_training_pairs(const TrainConfig& cfg) {
  const auto names = list_pngs(cfg.data_dir);
  if (names.empty()) throw ConfigError("empty dataset: no PNG files in '" + cfg.data_dir + "'");
  const std::size_t scale = static_cast<std::size_t>(cfg.model.scale);
  const std::size_t align = scale * static_cast<std::size_t>(cfg.model.window);
  std::vector<Pair> pairs;
  for (const auto& name : names) {
    Tensor hr = to_rgb(load_png((fs::path(cfg.data_dir) / name).string()));
    const std::size_t h = hr.height() / align * align;
    const std::size_t w = hr.width() / align * align;
    if (h == 0 || w == 0) {
      throw DimensionError("'" + name + "' is smaller than " + std::to_string(align) + " pixels");
    }
    hr = crop(hr, 0, 0, h, w);
    Tensor lr;
    if (!cfg.lr_dir.empty()) {
      lr = to_rgb(load_png((fs::path(cfg.lr_dir) / name).string()));
      lr = crop(lr, 0, 0, std::min(lr.height(), h / scale), std::min(lr.width(), w / scale));
      if (lr.height() != h / scale || lr.width() != w / scale) {
        throw DimensionError("'" + name + "': LR image is smaller than HR / scale");
      }
    } else {
      lr = bicubic_resize(hr, static_cast<int>(scale), ResizeDirection::down);
    }
    pairs.push_back({std::move(lr), std::move(hr)});
  }
  return pairs;
}

TrainResult train_on_pairs(const TrainConfig& cfg, const std::vector<Pair>& pairs) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("empty dataset");
  const std::size_t scale = static_cast<std::size_t>(cfg.model.scale);
  TrainResult result{{}, build_model(cfg.model, cfg.seed)};
  OptimizerState opt = make_optimizer(result.model, cfg.optimizer);
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> lr_items;
    std::vector<Tensor> hr_items;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Pair& p = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
      Tensor lr = p.lr;
      Tensor hr = p.hr;
      const std::size_t patch = static_cast<std::size_t>(cfg.patch_size);
      if (patch > 0) {
        if (patch > lr.height() || patch > lr.width()) {
          throw DimensionError("patch_size " + std::to_string(patch) + " exceeds LR image " + lr.shape().str());
        }
        const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, lr.height() - patch)(rng);
        const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, lr.width() - patch)(rng);
        lr = crop(lr, y0, x0, patch, patch);
        hr = crop(hr, y0 * scale, x0 * scale, patch * scale, patch * scale);
      }
      if (cfg.augment) {
        const bool flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
        const int turns = std::uniform_int_distribution<int>(0, 3)(rng);
        lr = augment(lr, flip, turns);
        hr = augment(hr, flip, turns);
      }
      lr_items.push_back(std::move(lr));
      hr_items.push_back(std::move(hr));
    }
    result.losses.push_back(train_step(result.model, stack(lr_items), stack(hr_items), opt, cfg.loss));
  }
  return result;
}

TrainResult run_toy_train(const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.output_dir.empty()) throw ConfigError("output_dir is required");
  const std::vector<Pair> pairs = load_training_pairs(cfg);
  const auto names = list_pngs(cfg.data_dir);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  TrainResult result = train_on_pairs(cfg, pairs);
  OptimizerState schedule{cfg.optimizer, {}, {}, 0};
  std::string csv = "step,loss,learning_rate\n";
  char line[96];
  for (std::size_t i = 0; i < result.losses.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", i + 1, result.losses[i],
                  schedule.rate_at(static_cast<long>(i + 1)));
    csv += line;
  }
  write_text(out / "loss.csv", csv);
  save_checkpoint(result.model, (out / "checkpoint.bin").string());

  std::size_t val = 0;
  if (!cfg.validation_image.empty()) {
    const auto it = std::find(names.begin(), names.end(), cfg.validation_image);
    if (it == names.end()) throw ConfigError("validation image '" + cfg.validation_image + "' not in data_dir");
    val = static_cast<std::size_t>(it - names.begin());
  }
  save_png(forward(result.model, pairs[val].lr), (out / ("sr_" + names[val])).string());
  return result;
}

SubbandErrors subband_errors(const Tensor& sr, const Tensor& hr, const std::string& filter, int levels) {
  require_same_shape(sr, hr, "subband_errors");
  const FilterBank& bank = cached_filter(filter);
  const SubbandPyramid a = swt_forward(rgb_to_y(sr), bank, levels);
  const SubbandPyramid b = swt_forward(rgb_to_y(hr), bank, levels);
  SubbandErrors out;
  for (std::size_t j = 0; j < a.subbands.size(); ++j) {
    out.labels.push_back(SubbandPyramid::label(j, levels));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.subbands[j].size(); ++i) acc += std::abs(a.subbands[j][i] - b.subbands[j][i]);
    out.errors.push_back(acc / static_cast<double>(a.subbands[j].size()));
  }
  return out;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const AblationArm& arm : arms) {
    nlohmann::json errors;
    for (std::size_t k = 0; k < arm.errors.labels.size(); ++k) errors[arm.errors.labels[k]] = arm.errors.errors[k];
    j.push_back({{"name", arm.name},
                 {"lambda", arm.lambda},
                 {"first_loss", arm.losses.empty() ? 0.0 : arm.losses.front()},
                 {"final_loss", arm.losses.empty() ? 0.0 : arm.losses.back()},
                 {"psnr_y", arm.psnr},
                 {"subband_l1", errors}});
  }
  return {{"arms", j}};
}

std::string AblationReport::table() const {
  if (arms.empty()) return "";
  std::string out = "arm            lambda   PSNR-Y";
  for (const auto& label : arms.front().errors.labels) out += "        " + label;
  out += "\n";
  char cell[64];
  for (const AblationArm& arm : arms) {
    std::snprintf(cell, sizeof cell, "%-14s %6.3f %8.3f", arm.name.c_str(), arm.lambda, arm.psnr);
    out += cell;
    for (double e : arm.errors.errors) {
      std::snprintf(cell, sizeof cell, "  %.3e", e);
      out += cell;
    }
    out += "\n";
  }
  return out;
}

AblationReport run_ablation(const TrainConfig& base, const std::vector<double>& lambdas,
                            std::size_t train_images, std::size_t test_images, std::size_t hr_size) {
  const int scale = base.model.scale;
  auto make_pairs = [&](std::size_t count, std::uint64_t seed) {
    std::vector<Pair> pairs;
    for (Tensor& hr : make_stripes(count, hr_size, seed)) {
      Tensor lr = bicubic_resize(hr, scale, ResizeDirection::down);
      pairs.push_back({std::move(lr), std::move(hr)});
    }
    return pairs;
  };
  const auto train = make_pairs(train_images, base.seed);
  const auto test = make_pairs(test_images, base.seed + 1);
  AblationReport report;
  for (double lambda : lambdas) {
    TrainConfig cfg = base;
    const bool use_y = base.loss.use_y_channel;
    cfg.loss = LossConfig::uniform(base.loss.filter_name, base.loss.levels, lambda);
    cfg.loss.use_y_channel = use_y;
    TrainResult trained = train_on_pairs(cfg, train);
    AblationArm arm;
    char name[32];
    std::snprintf(name, sizeof name, "lambda=%g", lambda);
    arm.name = name;
    arm.lambda = lambda;
    arm.losses = trained.losses;
    for (const Pair& p : test) {
      const Tensor sr = forward(trained.model, p.lr);
      const SubbandErrors e = subband_errors(sr, p.hr, cfg.loss.filter_name, cfg.loss.levels);
      if (arm.errors.labels.empty()) {
        arm.errors.labels = e.labels;
        arm.errors.errors.assign(e.errors.size(), 0.0);
      }
      for (std::size_t k = 0; k < e.errors.size(); ++k) arm.errors.errors[k] += e.errors[k] / double(test.size());
      arm.psnr += psnr(sr, p.hr, scale, true) / double(test.size());
    }
    report.arms.push_back(std::move(arm));
  }
  return report;
}

}  // namespace swtsr
