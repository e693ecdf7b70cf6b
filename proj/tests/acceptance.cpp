// Acceptance run: one PASS/FAIL line per criterion 1-9, plus the report-only
// wavelet-loss comparison (10). Exit status is non-zero if any of 1-9 fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "helpers.hpp"
#include "oracles.hpp"
#include "swtsr/attention.hpp"
#include "swtsr/harness.hpp"
#include "swtsr/loss.hpp"
#include "swtsr/metrics.hpp"
#include "swtsr/model.hpp"
#include "swtsr/resize.hpp"
#include "swtsr/wavelet.hpp"

using namespace swtsr;
using testing::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void perfect_reconstruction() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0;
  int count = 0;
  for (const char* name : {"haar", "sym4", "sym19"})
    for (int levels : {1, 2})
      for (const auto& [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{8, 8}, {24, 40}, {64, 64}})
        for (int i = 0; i < 20; ++i, ++count) {
          const FilterBank& f = cached_filter(name);
          const Tensor x = random_tensor(Shape{1, 1, h, w}, rng);
          worst = std::max(worst, max_abs_diff(swt_inverse(swt_forward(x, f, levels), f), x));
        }
  const double t = seconds_since(t0);
  report(1, "perfect reconstruction", worst <= 1e-9 && t < 30.0,
         fmt("%.0f images, max abs error %.3g (bound 1e-9), %.2f s (bound 30 s)", count, worst, t));
}

void tight_frame() {
  std::mt19937_64 rng(202);
  double frame = 0, adjoint = 0;
  for (const char* name : {"haar", "sym2", "sym4", "sym8", "sym19"}) {
    const FilterBank& f = cached_filter(name);
    for (int i = 0; i < 4; ++i) {
      const Tensor x = random_tensor(Shape{1, 1, 16, 12}, rng);
      frame = std::max(frame, max_abs_diff(swt_adjoint(swt_forward(x, f, 1), f), x * 4.0));
    }
  }
  const char* names[] = {"haar", "sym4", "sym19"};
  for (int i = 0; i < 50; ++i) {
    const FilterBank& f = cached_filter(names[i % 3]);
    const int levels = 1 + i % 2;
    const Tensor x = random_tensor(Shape{1, 1, 12, 16}, rng);
    SubbandPyramid p = swt_forward(x, f, levels);
    for (Tensor& b : p.subbands) b = random_tensor(b.shape(), rng);
    double lhs = 0;
    const SubbandPyramid fx = swt_forward(x, f, levels);
    for (std::size_t j = 0; j < p.subbands.size(); ++j) lhs += dot(fx.subbands[j], p.subbands[j]);
    const double rhs = dot(x, swt_adjoint(p, f));
    adjoint = std::max(adjoint, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  report(2, "tight frame and adjoint", frame <= 1e-9 && adjoint <= 1e-9,
         fmt("max |S*S x - 4x| %.3g, max adjoint mismatch %.3g over 50 pairs (bounds 1e-9)", frame, adjoint));
}

void loss_gradient() {
  std::mt19937_64 rng(303);
  double worst_metric = 0, worst_scaled = 0;
  for (const LossConfig& cfg : {LossConfig::defaults(), LossConfig::swinir_preset()})
    for (int i = 0; i < 25; ++i) {
      const testing::LossPair pair = testing::sample_loss_pair(Shape{1, 3, 8, 8}, cfg, rng);
      const auto [metric, scaled] = testing::loss_gradient_errors(pair, cfg, 1e-5);
      worst_metric = std::max(worst_metric, metric);
      worst_scaled = std::max(worst_scaled, scaled);
    }
  report(3, "loss gradient check", worst_metric < 1e-4 && worst_scaled < 1e-4,
         fmt("50 pairs (default and SwinIR presets), max error per coordinate %.3g, relative to max |grad| %.3g "
             "(bound 1e-4)",
             worst_metric, worst_scaled));
}

void subband_count() {
  std::mt19937_64 rng(404);
  const Tensor x = random_tensor(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
  const Tensor y = random_tensor(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
  const std::size_t bands = swt_forward(rgb_to_y(x), cached_filter("haar"), 2).subbands.size();
  const LossBreakdown br = loss_breakdown(x, y, LossConfig::uniform("sym19", 2, 0.05));
  const std::size_t terms = br.subband_l1.size() + 1;
  report(4, "subband count", bands == 7 && terms == 8,
         "2-level pyramid has " + std::to_string(bands) + " subbands, loss has " + std::to_string(terms) +
             " pixel-wise terms (expected 7 and 8)");
}

void nlsa_degeneracy() {
  std::mt19937_64 rng(505);
  double worst = 0, row_error = 0, min_weight = 1;
  for (int i = 0; i < 10; ++i) {
    AttentionConfig cfg;
    cfg.dim = 8;
    cfg.chunk_size = 16;
    cfg.seed = std::uint64_t(i);
    ParameterSet p;
    add_nlsa_params(p, "n.", cfg);
    testing::randomize(p, rng, 0.5);
    const Tensor x = random_tensor(Shape{1, 8, 4, 4}, rng);
    AttentionStats stats;
    const Tensor y = nlsa(x, cfg, p, "n.", &stats).value;
    worst = std::max(worst, max_abs_diff(y, oracle::dense_nonlocal_oracle(x, p, "n.")));
    row_error = std::max(row_error, stats.max_row_sum_error);
    min_weight = std::min(min_weight, stats.min_weight);
  }
  report(5, "NLSA single-bucket degeneracy", worst <= 1e-6 && row_error <= 1e-12 && min_weight >= 0,
         fmt("10 instances of 16 tokens, max abs diff to dense attention %.3g (bound 1e-6), max row-sum error %.3g "
             "(bound 1e-12)",
             worst, row_error));
}

void oca_degeneracy() {
  std::mt19937_64 rng(606);
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    AttentionConfig cfg;
    cfg.dim = 8;
    cfg.heads = 1 + i % 2;
    cfg.window = i % 3 == 0 ? 2 : 4;
    cfg.overlap_ratio = 0.0;
    ParameterSet p;
    add_cross_attention_params(p, "a.", cfg);
    testing::randomize(p, rng, 0.5);
    const Tensor x = random_tensor(Shape{1, 8, 8, 8}, rng);
    worst = std::max(worst, max_abs_diff(overlapping_cross_attention(x, cfg, p, "a.").value,
                                         window_msa(x, cfg, p, "a.").value));
  }
  report(6, "OCA zero-overlap degeneracy", worst <= 1e-10,
         fmt("10 instances, max abs diff to window attention %.3g (bound 1e-10)", worst));
}

std::vector<double> overfit_run(const Pair& pair, double* final_loss) {
  Model m = build_model(ModelConfig{}, 2024);
  OptimizerState opt = make_optimizer(m, AdamSettings{});
  const LossConfig loss = LossConfig::defaults();
  std::vector<double> losses;
  for (int s = 0; s < 200; ++s) losses.push_back(train_step(m, pair.lr, pair.hr, opt, loss));
  *final_loss = total_loss(forward(m, pair.lr), pair.hr, loss);
  return losses;
}

void toy_overfit() {
  const auto t0 = Clock::now();
  const Tensor hr = make_stripes(1, 64, 77).front();
  const Pair pair{bicubic_resize(hr, 4, ResizeDirection::down), hr};
  double final_a = 0, final_b = 0;
  const std::vector<double> a = overfit_run(pair, &final_a);
  const std::vector<double> b = overfit_run(pair, &final_b);
  const double t = seconds_since(t0);
  const bool halved = final_a <= 0.5 * a.front();
  const bool same = a == b && final_a == final_b;
  report(7, "toy overfit", halved && same && t < 300.0,
         fmt("loss %.5f -> %.5f after 200 Adam steps (ratio %.3f, bound 0.5)", a.front(), final_a,
             final_a / a.front()) +
             (same ? ", two runs identical" : ", runs DIFFER") + fmt(", %.1f s for both runs (bound 300 s)", t));
}

void metric_oracles() {
  std::mt19937_64 rng(808);
  const Tensor x = random_tensor(Shape{1, 3, 24, 24}, rng, 0.0, 0.9);
  Tensor shifted = x;
  for (double& v : shifted.data()) v += 0.1;
  const double p20 = psnr(x, shifted, 0, false);
  const double s1 = ssim(x, x, 0, true);
  double worst = 0;
  for (int i = 0; i < 10; ++i) {
    const Tensor a = random_tensor(Shape{1, 3, 20, 24}, rng, 0.0, 1.0);
    Tensor b = a;
    for (double& v : b.data()) v = std::clamp(v + 0.1 * std::normal_distribution<double>(0, 1)(rng), 0.0, 1.0);
    const bool on_y = i % 2 == 0;
    const int crop = i % 3 == 0 ? 4 : 0;
    worst = std::max(worst, std::abs(psnr(a, b, crop, on_y) - oracle::psnr_oracle(a, b, crop, on_y)));
    worst = std::max(worst, std::abs(ssim(a, b, crop, on_y) - oracle::ssim_oracle(a, b, crop, on_y)));
  }
  // 0.1 is not a binary fraction, so "exactly 20 dB" is checked to 1e-12.
  report(8, "metric oracles", std::abs(p20 - 20.0) < 1e-12 && s1 == 1.0 && worst <= 1e-8,
         fmt("psnr(x, x + 0.1) = %.15f dB, ssim(x, x) = %.15f, max diff to brute-force oracles %.3g (bound 1e-8)",
             p20, s1, worst));
}

void accounting() {
  std::string detail;
  bool increasing = true;
  std::size_t last_params = 0;
  std::uint64_t last_macs = 0;
  for (int added : {0, 2, 4, 8}) {
    ModelConfig cfg;
    cfg.n_pre_nlsa = added / 2;
    cfg.n_post_nlsa = added / 2;
    const Model m = build_model(cfg, 0);
    const std::size_t params = count_params(m);
    const std::uint64_t macs = count_mult_adds(m, 64, 64);
    increasing = increasing && params > last_params && macs > last_macs;
    last_params = params;
    last_macs = macs;
    detail += (detail.empty() ? "" : ", ") + std::string("+") + std::to_string(added) + " NLSA: " +
              std::to_string(params) + " params / " + std::to_string(macs) + " MACs";
  }
  report(9, "accounting monotonicity", increasing, detail + " (64x64 input)");
}

void wavelet_loss_effect() {
  const auto t0 = Clock::now();
  TrainConfig base;
  base.steps = 150;
  base.seed = 9;
  base.patch_size = 8;
  const AblationReport r = run_ablation(base, {0.0, 0.05}, 8, 4, 32);
  std::printf("[REPORT] 10 wavelet-loss effect (report only, %.1f s):\n%s", seconds_since(t0), r.table().c_str());
}

}  // namespace

int main() {
  perfect_reconstruction();
  tight_frame();
  loss_gradient();
  subband_count();
  nlsa_degeneracy();
  oca_degeneracy();
  toy_overfit();
  metric_oracles();
  accounting();
  wavelet_loss_effect();
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
