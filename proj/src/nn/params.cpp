#include "aerialmpt/nn/params.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "aerialmpt/error.hpp"

namespace aerialmpt::nn {

Param& ParameterSet::add(std::string name, std::vector<int> shape) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  const auto n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                 [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  index_[name] = params_.size();
  params_.push_back(Param{std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  return params_.back();
}

Param& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return params_[it->second];
}

const Param& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return params_[it->second];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.count();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& p : params_) out.add(p.name, p.shape);
  return out;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].shape != other.params_[i].shape) return false;
  }
  return true;
}

void ParameterSet::set_zero() {
  for (auto& p : params_) std::fill(p.value.begin(), p.value.end(), 0.0);
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
  if (!same_layout(other)) throw ConfigError("parameter layout mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& dst = params_[i].value;
    const auto& src = other.params_[i].value;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].value != b.params_[i].value) return false;
  }
  return true;
}

}  // namespace aerialmpt::nn
