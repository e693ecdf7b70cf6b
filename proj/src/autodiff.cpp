#include "swtsr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "swtsr/error.hpp"

namespace swtsr {

Tensor& ParameterSet::add(const std::string& name, Shape shape) {
  return add(name, Tensor(shape));
}

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, values_.size());
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.back();
}

Tensor& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return values_[it->second];
}

const Tensor& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return values_[it->second];
}

std::size_t ParameterSet::total_elements() const {
  std::size_t total = 0;
  for (const Tensor& t : values_) total += t.size();
  return total;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < values_.size(); ++i) out.add(names_[i], values_[i].shape());
  return out;
}

GradientPair chain(GradientPair first, const std::function<GradientPair(const Tensor&)>& next) {
  GradientPair second = next(first.value);
  return {std::move(second.value),
          [p1 = std::move(first.pullback), p2 = std::move(second.pullback)](
              const Tensor& cot, ParameterSet& grads) { return p1(p2(cot, grads), grads); }};
}

GradientPair identity(const Tensor& x) {
  return {x, [](const Tensor& cot, ParameterSet&) { return cot; }};
}

GradientPair add_branches(GradientPair a, GradientPair b) {
  Tensor value = a.value + b.value;
  return {std::move(value), [pa = std::move(a.pullback), pb = std::move(b.pullback)](
                                const Tensor& cot, ParameterSet& grads) {
            Tensor g = pa(cot, grads);
            g += pb(cot, grads);
            return g;
          }};
}

GradientPair residual(const Tensor& x, GradientPair branch) {
  return {x + branch.value,
          [pb = std::move(branch.pullback)](const Tensor& cot, ParameterSet& grads) {
            Tensor g = pb(cot, grads);
            g += cot;
            return g;
          }};
}

double grad_check(const DifferentiableFn& fn, const Tensor& x, double eps) {
  const Tensor analytic = fn.gradient(x);
  require_same_shape(analytic, x, "grad_check gradient");
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = fn.value(probe);
    probe[i] = orig - eps;
    const double down = fn.value(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace swtsr
