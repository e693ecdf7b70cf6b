#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "swtsr/error.hpp"
#include "swtsr/harness.hpp"
#include "swtsr/image_io.hpp"
#include "swtsr/resize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace swtsr;

namespace {

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << j.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << text;
}

LossConfig resolve_loss(const std::string& config_path, const std::string& preset) {
  if (!config_path.empty()) return loss_config_from_json(read_json(config_path));
  if (preset == "swinir") return LossConfig::swinir_preset();
  return LossConfig::defaults();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationary-wavelet loss and toy super-resolution tools"};
  app.require_subcommand(1);

  std::string input, output, out_dir, filter = "sym19", sidecar, config, preset = "default";
  std::string sr_path, hr_path, sr_dir, gt_dir;
  int levels = 1, factor = 4, crop = 4, height = 64, width = 64, count = 16, size = 64, steps = -1;
  std::uint64_t seed = 0;
  bool rgb = false;

  auto* swt = app.add_subcommand("swt", "Decompose an image into subband PNGs plus a raw sidecar");
  swt->add_option("--input", input, "Input PNG")->required();
  swt->add_option("--out-dir", out_dir, "Output directory")->required();
  swt->add_option("--filter", filter, "Wavelet filter")->capture_default_str();
  swt->add_option("--levels", levels, "Decomposition levels")->capture_default_str();

  auto* iswt = app.add_subcommand("iswt", "Reconstruct an image from a subband sidecar");
  iswt->add_option("--sidecar", sidecar, "Sidecar written by swt")->required();
  iswt->add_option("--output", output, "Output PNG")->required();

  auto* loss = app.add_subcommand("loss", "Per-subband loss breakdown of an image pair");
  loss->add_option("--sr", sr_path, "Reconstructed PNG")->required();
  loss->add_option("--hr", hr_path, "Reference PNG")->required();
  loss->add_option("--config", config, "Loss config JSON");
  loss->add_option("--preset", preset, "default or swinir")->check(CLI::IsMember({"default", "swinir"}));

  auto* degrade = app.add_subcommand("degrade", "Bicubic downscaling of a PNG or a directory of PNGs");
  degrade->add_option("--input", input, "Input PNG or directory")->required();
  degrade->add_option("--output", output, "Output PNG or directory")->required();
  degrade->add_option("--factor", factor, "Downscaling factor")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of matching PNGs in two directories");
  eval->add_option("--sr-dir", sr_dir, "Reconstructions")->required();
  eval->add_option("--gt-dir", gt_dir, "Ground truth")->required();
  eval->add_option("--crop", crop, "Border pixels removed")->capture_default_str();
  eval->add_flag("--rgb", rgb, "Compare RGB instead of the Y channel");
  eval->add_option("--out-dir", out_dir, "Where report.json and report.txt go");

  auto* train = app.add_subcommand("train", "Toy training run from a JSON run config");
  train->add_option("--config", config, "Run config JSON")->required();
  train->add_option("--out-dir", out_dir, "Overrides output_dir");

  auto* cnt = app.add_subcommand("count", "Parameter and multiply-accumulate counts");
  cnt->add_option("--config", config, "Model config JSON (toy defaults otherwise)");
  cnt->add_option("--height", height, "LR height")->capture_default_str();
  cnt->add_option("--width", width, "LR width")->capture_default_str();

  auto* stripes = app.add_subcommand("stripes", "Write a synthetic oriented-grating dataset");
  stripes->add_option("--out-dir", out_dir, "Output directory")->required();
  stripes->add_option("--count", count, "Number of images")->capture_default_str();
  stripes->add_option("--size", size, "Image side")->capture_default_str();
  stripes->add_option("--seed", seed, "Generator seed")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train lambda = 0 and lambda = 0.05 arms on stripes and compare");
  ablate->add_option("--config", config, "Run config JSON (model, loss filter/levels, optimizer, seed)");
  ablate->add_option("--out-dir", out_dir, "Output directory")->required();
  ablate->add_option("--steps", steps, "Overrides steps");
  ablate->add_option("--count", count, "Training images")->capture_default_str();
  ablate->add_option("--size", size, "HR image side")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*swt) {
      const Tensor image = load_png(input);
      const SubbandPyramid p = decompose_image(image, filter, levels);
      fs::create_directories(out_dir);
      for (std::size_t j = 0; j < p.subbands.size(); ++j) {
        const Tensor& band = p.subbands[j];
        const Shape& s = band.shape();
        const Tensor shown = display_subband(band).reshaped(Shape{1, s.n, s.h, s.w});
        save_png(shown, (fs::path(out_dir) / (SubbandPyramid::label(j, levels) + ".png")).string());
      }
      write_sidecar((fs::path(out_dir) / "subbands.swt").string(), p);
      write_json(fs::path(out_dir) / "config.json",
                 {{"command", "swt"}, {"input", input}, {"filter", filter}, {"levels", levels}});
      std::cout << "wrote " << p.subbands.size() << " subbands to " << out_dir << "\n";
    } else if (*iswt) {
      save_png(reconstruct_image(read_sidecar(sidecar)), output);
    } else if (*loss) {
      const LossConfig cfg = resolve_loss(config, preset);
      const Tensor a = load_png(sr_path);
      const Tensor b = load_png(hr_path);
      const LossBreakdown br = loss_breakdown(a, b, cfg);
      json sub = json::object();
      for (std::size_t j = 0; j < br.labels.size(); ++j) {
        sub[br.labels[j]] = {{"l1", br.subband_l1[j]}, {"lambda", br.lambda[j]}};
      }
      std::cout << json{{"config", to_json(cfg)}, {"rgb_l1", br.rgb}, {"subbands", sub},
                        {"swt", br.swt}, {"total", br.total}, {"terms", br.labels.size() + 1}}
                       .dump(2)
                << "\n";
    } else if (*degrade) {
      if (fs::is_directory(input)) {
        std::cout << "degraded " << degrade_dir(input, output, factor) << " images\n";
        write_json(fs::path(output) / "config.json",
                   {{"command", "degrade"}, {"input", input}, {"output", output}, {"factor", factor}});
      } else {
        save_png(bicubic_resize(load_png(input), factor, ResizeDirection::down), output);
      }
    } else if (*eval) {
      const MetricReport r = evaluate_dirs(sr_dir, gt_dir, crop, !rgb);
      std::cout << r.table();
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json(fs::path(out_dir) / "report.json", r.to_json());
        write_text(fs::path(out_dir) / "report.txt", r.table());
      }
    } else if (*train) {
      json j = read_json(config);
      if (!out_dir.empty()) j["output_dir"] = out_dir;
      const TrainConfig cfg = train_config_from_json(j);
      const TrainResult r = run_toy_train(cfg);
      std::printf("steps %zu, first loss %.6f, final loss %.6f\n", r.losses.size(),
                  r.losses.empty() ? 0.0 : r.losses.front(), r.losses.empty() ? 0.0 : r.losses.back());
    } else if (*cnt) {
      const ModelConfig cfg = config.empty() ? ModelConfig{} : model_config_from_json(read_json(config));
      const Model m = build_model(cfg, 0);
      std::cout << json{{"config", to_json(cfg)},
                        {"input", {height, width}},
                        {"params", count_params(m)},
                        {"mult_adds", count_mult_adds(m, height, width)}}
                       .dump(2)
                << "\n";
    } else if (*stripes) {
      const auto names = write_stripes(out_dir, static_cast<std::size_t>(count), static_cast<std::size_t>(size), seed);
      std::cout << "wrote " << names.size() << " images to " << out_dir << "\n";
    } else if (*ablate) {
      json j = config.empty() ? json::object() : read_json(config);
      j["output_dir"] = out_dir;
      if (steps >= 0) j["steps"] = steps;
      const TrainConfig cfg = train_config_from_json(j);
      const AblationReport r = run_ablation(cfg, {0.0, 0.05}, static_cast<std::size_t>(count), 4,
                                            static_cast<std::size_t>(size));
      fs::create_directories(out_dir);
      json echo = to_json(cfg);
      echo["train_images"] = count;
      echo["test_images"] = 4;
      echo["hr_size"] = size;
      write_json(fs::path(out_dir) / "config.json", echo);
      write_json(fs::path(out_dir) / "ablation.json", r.to_json());
      write_text(fs::path(out_dir) / "ablation.txt", r.table());
      std::cout << r.table();
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
