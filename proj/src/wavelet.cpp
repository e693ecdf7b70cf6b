#include "swtsr/wavelet.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <sstream>

#include "swtsr/error.hpp"

namespace swtsr {
namespace {

struct EmbeddedTable {
  const char* name;
  const char* text;
};

// Generated at configure time from data/filters/*.txt.
constexpr EmbeddedTable kTables[] = {
#include "filter_tables.inc"
};

constexpr const char* kSupported[] = {"haar", "sym2", "sym4", "sym8", "sym19"};
constexpr double kTableTol = 1e-10;

std::string_view find_table(const std::string& key) {
  for (const auto& t : kTables) {
    if (key == t.name) return t.text;
  }
  throw IntegrityError("missing embedded filter table '" + key + "'");
}

std::vector<double> parse_table(const std::string& what, std::string_view text) {
  std::vector<double> coeffs;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    char* end = nullptr;
    const double v = std::strtod(line.c_str() + first, &end);
    if (end == line.c_str() + first || line.find_first_not_of(" \t\r", end - line.c_str()) != std::string::npos) {
      throw IntegrityError(what + ": line " + std::to_string(lineno) + " is not a number: '" +
                           line + "'");
    }
    coeffs.push_back(v);
  }
  return coeffs;
}

// Analysis along one line: out[n] = sum_k f[k] in[(n - d k) mod N].
void analyze_line(const double* in, double* out, std::size_t count, std::size_t stride,
                  const std::vector<double>& f, std::size_t dilation) {
  for (std::size_t n = 0; n < count; ++n) out[n * stride] = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const std::size_t off = (dilation * k) % count;
    const double c = f[k];
    for (std::size_t n = 0; n < count; ++n) {
      const std::size_t src = n >= off ? n - off : n + count - off;
      out[n * stride] += c * in[src * stride];
    }
  }
}

// Synthesis along one line with reversed filter r (r[k] = f[L-1-k]):
// out[n] += sum_k r[k] in[(n - d k + d (L-1)) mod N], the transpose of analyze_line.
void synthesize_line(const double* in, double* out, std::size_t count, std::size_t stride,
                     const std::vector<double>& rec, std::size_t dilation) {
  const std::size_t len = rec.size();
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t off = (dilation * (len - 1 - k)) % count;
    const double c = rec[k];
    for (std::size_t n = 0; n < count; ++n) {
      std::size_t src = n + off;
      if (src >= count) src -= count;
      out[n * stride] += c * in[src * stride];
    }
  }
}

void require_single_channel(const Tensor& image) {
  if (image.channels() != 1) {
    throw DimensionError("swt expects a single-channel image (extract Y first), got " +
                         image.shape().str());
  }
  if (image.height() == 0 || image.width() == 0) {
    throw DimensionError("swt: empty image " + image.shape().str());
  }
}

// One decomposition level of every plane of `src`: writes LL, LH, HL, HH.
void analyze_level(const Tensor& src, const FilterBank& bank, std::size_t dilation, Tensor& ll,
                   Tensor& lh, Tensor& hl, Tensor& hh) {
  const Shape& s = src.shape();
  Tensor row_lo(s);
  Tensor row_hi(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const double* in = src.plane(n, 0);
    double* lo = row_lo.plane(n, 0);
    double* hi = row_hi.plane(n, 0);
    for (std::size_t y = 0; y < s.h; ++y) {
      analyze_line(in + y * s.w, lo + y * s.w, s.w, 1, bank.dec_lo, dilation);
      analyze_line(in + y * s.w, hi + y * s.w, s.w, 1, bank.dec_hi, dilation);
    }
    for (std::size_t x = 0; x < s.w; ++x) {
      analyze_line(lo + x, ll.plane(n, 0) + x, s.h, s.w, bank.dec_lo, dilation);
      analyze_line(lo + x, lh.plane(n, 0) + x, s.h, s.w, bank.dec_hi, dilation);
      analyze_line(hi + x, hl.plane(n, 0) + x, s.h, s.w, bank.dec_lo, dilation);
      analyze_line(hi + x, hh.plane(n, 0) + x, s.h, s.w, bank.dec_hi, dilation);
    }
  }
}

// Transpose of analyze_level, accumulated into `out`.
void synthesize_level(const Tensor& ll, const Tensor& lh, const Tensor& hl, const Tensor& hh,
                      const FilterBank& bank, std::size_t dilation, Tensor& out) {
  const Shape& s = ll.shape();
  Tensor col_lo(s);
  Tensor col_hi(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    double* lo = col_lo.plane(n, 0);
    double* hi = col_hi.plane(n, 0);
    for (std::size_t x = 0; x < s.w; ++x) {
      synthesize_line(ll.plane(n, 0) + x, lo + x, s.h, s.w, bank.rec_lo, dilation);
      synthesize_line(lh.plane(n, 0) + x, lo + x, s.h, s.w, bank.rec_hi, dilation);
      synthesize_line(hl.plane(n, 0) + x, hi + x, s.h, s.w, bank.rec_lo, dilation);
      synthesize_line(hh.plane(n, 0) + x, hi + x, s.h, s.w, bank.rec_hi, dilation);
    }
    double* o = out.plane(n, 0);
    for (std::size_t y = 0; y < s.h; ++y) {
      synthesize_line(lo + y * s.w, o + y * s.w, s.w, 1, bank.rec_lo, dilation);
      synthesize_line(hi + y * s.w, o + y * s.w, s.w, 1, bank.rec_hi, dilation);
    }
  }
}

void check_pyramid(const SubbandPyramid& p, const FilterBank& bank) {
  if (p.levels < 1) throw DimensionError("subband pyramid has no levels");
  if (p.subbands.size() != SubbandPyramid::count_for(p.levels)) {
    throw DimensionError("subband pyramid with " + std::to_string(p.levels) + " levels needs " +
                         std::to_string(SubbandPyramid::count_for(p.levels)) +
                         " subbands, got " + std::to_string(p.subbands.size()));
  }
  if (!p.filter_name.empty() && p.filter_name != bank.name) {
    throw ConfigError("pyramid was built with filter '" + p.filter_name + "' but '" + bank.name +
                      "' was given");
  }
  const Shape& s = p.subbands.front().shape();
  if (s.c != 1) throw DimensionError("subbands must be single-channel, got " + s.str());
  for (std::size_t i = 1; i < p.subbands.size(); ++i) {
    if (p.subbands[i].shape() != s) {
      throw DimensionError("subband " + SubbandPyramid::label(i, p.levels) + " has shape " +
                           p.subbands[i].shape().str() + ", expected " + s.str());
    }
  }
}

Tensor synthesize(const SubbandPyramid& p, const FilterBank& bank, double level_scale) {
  check_pyramid(p, bank);
  Tensor approx = p.subbands[0];
  for (int level = p.levels; level >= 1; --level) {
    const std::size_t dilation = std::size_t{1} << (level - 1);
    Tensor out(approx.shape());
    synthesize_level(approx, p.subbands[SubbandPyramid::index_of(SubbandKind::LH, level, p.levels)],
                     p.subbands[SubbandPyramid::index_of(SubbandKind::HL, level, p.levels)],
                     p.subbands[SubbandPyramid::index_of(SubbandKind::HH, level, p.levels)], bank,
                     dilation, out);
    if (level_scale != 1.0) out *= level_scale;
    approx = std::move(out);
  }
  return approx;
}

}  // namespace

std::vector<std::string> supported_filters() {
  return {std::begin(kSupported), std::end(kSupported)};
}

FilterBank filter_from_tables(const std::string& name, std::string_view dec_lo_text,
                              std::string_view dec_hi_text) {
  FilterBank bank;
  bank.name = name;
  bank.dec_lo = parse_table(name + " dec_lo", dec_lo_text);
  bank.dec_hi = parse_table(name + " dec_hi", dec_hi_text);
  bank.rec_lo.assign(bank.dec_lo.rbegin(), bank.dec_lo.rend());
  bank.rec_hi.assign(bank.dec_hi.rbegin(), bank.dec_hi.rend());
  validate(bank);
  return bank;
}

FilterBank make_filter(const std::string& name) {
  bool known = false;
  for (const char* s : kSupported) known = known || name == s;
  if (!known) {
    std::string list;
    for (const char* s : kSupported) list += (list.empty() ? "" : ", ") + std::string(s);
    throw ConfigError("unknown filter '" + name + "'; supported filters: " + list);
  }
  return filter_from_tables(name, find_table(name + "_dec_lo"), find_table(name + "_dec_hi"));
}

const FilterBank& cached_filter(const std::string& name) {
  static std::mutex mutex;
  static std::map<std::string, FilterBank> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, make_filter(name)).first;
  return it->second;
}

void validate(const FilterBank& bank) {
  const std::size_t len = bank.dec_lo.size();
  auto fail = [&](const std::string& why) {
    throw IntegrityError("filter '" + bank.name + "' failed integrity check: " + why);
  };
  if (len < 2 || len % 2 != 0) fail("length must be even and >= 2, got " + std::to_string(len));
  if (bank.dec_hi.size() != len || bank.rec_lo.size() != len || bank.rec_hi.size() != len) {
    fail("filters have unequal lengths");
  }
  double total = 0.0;
  for (double c : bank.dec_lo) total += c;
  if (std::abs(total - std::sqrt(2.0)) > kTableTol) fail("low-pass sum is not sqrt(2)");
  for (std::size_t shift = 0; shift < len; shift += 2) {
    double acc = 0.0;
    for (std::size_t k = 0; k + shift < len; ++k) acc += bank.dec_lo[k] * bank.dec_lo[k + shift];
    const double expected = shift == 0 ? 1.0 : 0.0;
    if (std::abs(acc - expected) > kTableTol) {
      fail(shift == 0 ? "low-pass energy is not 1"
                      : "low-pass not orthogonal to its shift by " + std::to_string(shift));
    }
  }
  for (std::size_t k = 0; k < len; ++k) {
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    if (std::abs(bank.dec_hi[k] - sign * bank.dec_lo[len - 1 - k]) > kTableTol) {
      fail("QMF relation violated at tap " + std::to_string(k));
    }
    if (bank.rec_lo[k] != bank.dec_lo[len - 1 - k] || bank.rec_hi[k] != bank.dec_hi[len - 1 - k]) {
      fail("synthesis filters are not time reverses of analysis filters");
    }
  }
}

std::size_t SubbandPyramid::index_of(SubbandKind kind, int level, int levels) {
  if (level < 1 || level > levels) throw DimensionError("subband level out of range");
  if (kind == SubbandKind::LL) {
    if (level != levels) throw DimensionError("only the deepest level keeps an LL subband");
    return 0;
  }
  const std::size_t base = 1 + 3 * static_cast<std::size_t>(levels - level);
  return base + static_cast<std::size_t>(kind) - 1;
}

SubbandKind SubbandPyramid::kind_of(std::size_t index) {
  if (index == 0) return SubbandKind::LL;
  return static_cast<SubbandKind>((index - 1) % 3 + 1);
}

int SubbandPyramid::level_of(std::size_t index, int levels) {
  if (index == 0) return levels;
  return levels - static_cast<int>((index - 1) / 3);
}

std::string SubbandPyramid::label(std::size_t index, int levels) {
  static constexpr const char* kNames[] = {"LL", "LH", "HL", "HH"};
  return kNames[static_cast<int>(kind_of(index))] + std::to_string(level_of(index, levels));
}

SubbandPyramid swt_forward(const Tensor& image, const FilterBank& bank, int levels) {
  if (levels < 1) throw DimensionError("swt levels must be >= 1, got " + std::to_string(levels));
  require_single_channel(image);
  SubbandPyramid p;
  p.levels = levels;
  p.filter_name = bank.name;
  p.subbands.assign(SubbandPyramid::count_for(levels), Tensor(image.shape()));
  Tensor approx = image;
  for (int level = 1; level <= levels; ++level) {
    const std::size_t dilation = std::size_t{1} << (level - 1);
    Tensor ll(image.shape());
    analyze_level(approx, bank, dilation, ll,
                  p.subbands[SubbandPyramid::index_of(SubbandKind::LH, level, levels)],
                  p.subbands[SubbandPyramid::index_of(SubbandKind::HL, level, levels)],
                  p.subbands[SubbandPyramid::index_of(SubbandKind::HH, level, levels)]);
    approx = std::move(ll);
  }
  p.subbands[0] = std::move(approx);
  return p;
}

Tensor swt_inverse(const SubbandPyramid& pyramid, const FilterBank& bank) {
  return synthesize(pyramid, bank, 0.25);
}

Tensor swt_adjoint(const SubbandPyramid& pyramid, const FilterBank& bank) {
  return synthesize(pyramid, bank, 1.0);
}

}  // namespace swtsr
