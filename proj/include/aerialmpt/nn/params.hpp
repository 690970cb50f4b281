#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace aerialmpt::nn {

/// Named, shape-tagged parameter array.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;

  std::size_t count() const { return value.size(); }
};

/// Ordered collection of named parameters. Also used to hold gradients and optimizer buffers
/// with an identical layout.
class ParameterSet {
 public:
  Param& add(std::string name, std::vector<int> shape);

  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::span<double> data(const std::string& name) { return at(name).value; }
  std::span<const double> data(const std::string& name) const { return at(name).value; }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  /// Same names, shapes and order; values zeroed.
  ParameterSet zeros_like() const;
  bool same_layout(const ParameterSet& other) const;
  void set_zero();
  /// this += scale * other (same layout required).
  void add_scaled(const ParameterSet& other, double scale);

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace aerialmpt::nn
