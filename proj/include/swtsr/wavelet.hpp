#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "swtsr/tensor.hpp"

namespace swtsr {

/// Orthonormal two-channel filter bank. The high-pass filter follows
/// dec_hi[k] = (-1)^k dec_lo[L-1-k]; synthesis filters are time reverses of
/// the analysis filters.
struct FilterBank {
  std::string name;
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
  std::vector<double> rec_lo;
  std::vector<double> rec_hi;

  std::size_t length() const { return dec_lo.size(); }
};

/// Names with shipped coefficient tables, in ascending length.
std::vector<std::string> supported_filters();

/// Loads a shipped table and validates it. Throws ConfigError for unknown
/// names (listing the supported ones) and IntegrityError for a table that
/// fails the filter-bank checks.
FilterBank make_filter(const std::string& name);

/// make_filter, parsed once per name and kept for the life of the process.
const FilterBank& cached_filter(const std::string& name);

/// Builds a bank from table text (one coefficient per line, '#' comments)
/// and validates it.
FilterBank filter_from_tables(const std::string& name, std::string_view dec_lo_text,
                              std::string_view dec_hi_text);

/// Throws IntegrityError unless the bank has unit DC gain sqrt(2), unit
/// energy, double-shift orthogonality, the QMF relation and reversed
/// synthesis filters, each within 1e-10.
void validate(const FilterBank& bank);

enum class SubbandKind { LL, LH, HL, HH };

/// Undecimated decomposition. Subbands are ordered
///   [LL_L, LH_L, HL_L, HH_L, LH_{L-1}, HL_{L-1}, HH_{L-1}, ..., LH_1, HL_1, HH_1]
/// and all have the source's shape. In a two-letter name the first letter is
/// the filter applied along image rows (horizontal axis) and the second the
/// filter applied along columns.
struct SubbandPyramid {
  int levels = 0;
  std::string filter_name;
  std::vector<Tensor> subbands;

  static std::size_t count_for(int levels) { return 3 * static_cast<std::size_t>(levels) + 1; }
  /// Position of a subband in `subbands`; LL is only valid at level == levels.
  static std::size_t index_of(SubbandKind kind, int level, int levels);
  static SubbandKind kind_of(std::size_t index);
  static int level_of(std::size_t index, int levels);
  /// e.g. "LL1", "HH2".
  static std::string label(std::size_t index, int levels);
};

/// Stationary wavelet transform of single-channel images (any batch size),
/// periodic boundary, filters dilated by 2^(l-1) at level l.
SubbandPyramid swt_forward(const Tensor& image, const FilterBank& bank, int levels);

/// Perfect-reconstruction inverse: each level is synthesized with the rec
/// filters and scaled by 1/4, deepest level first.
Tensor swt_inverse(const SubbandPyramid& pyramid, const FilterBank& bank);

/// Transpose of swt_forward: <swt_forward(x), p> = <x, swt_adjoint(p)>.
Tensor swt_adjoint(const SubbandPyramid& pyramid, const FilterBank& bank);

}  // namespace swtsr
