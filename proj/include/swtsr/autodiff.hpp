#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "swtsr/tensor.hpp"

namespace swtsr {

/// Ordered collection of named tensors. Used both for model parameters and
/// for their accumulated gradients (same names, same shapes).
class ParameterSet {
 public:
  /// Adds a zero tensor; throws ConfigError on a duplicate name.
  Tensor& add(const std::string& name, Shape shape);
  Tensor& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }

  /// Total element count over all tensors.
  std::size_t total_elements() const;
  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Maps an output cotangent to the input cotangent, accumulating parameter
/// cotangents into `grads` (keyed by the same names as the parameters).
/// Every pullback is linear in the cotangent.
using Pullback = std::function<Tensor(const Tensor& cotangent, ParameterSet& grads)>;

struct GradientPair {
  Tensor value;
  Pullback pullback;
};

/// Composes `first` with `next`: value = next(first.value), pullback runs
/// next's pullback, then first's.
GradientPair chain(GradientPair first, const std::function<GradientPair(const Tensor&)>& next);

/// Identity map with identity pullback.
GradientPair identity(const Tensor& x);

/// a(x) + b(x) where both pairs were evaluated on the same input x.
GradientPair add_branches(GradientPair a, GradientPair b);

/// x + f(x) for a residual branch f evaluated on x.
GradientPair residual(const Tensor& x, GradientPair branch);

/// Scalar function of a tensor with its analytic gradient.
struct DifferentiableFn {
  std::function<double(const Tensor&)> value;
  std::function<Tensor(const Tensor&)> gradient;
};

/// Max over coordinates of |analytic - central difference| / max(1, |central difference|).
double grad_check(const DifferentiableFn& fn, const Tensor& x, double eps);

}  // namespace swtsr
