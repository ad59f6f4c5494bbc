#pragma once

#include "mdt/random.h"
#include "mdt/tensor.h"

#include <map>
#include <string>
#include <vector>

namespace mdt {

// Named trainable tensors in registration order. Names are unique.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor tensor);
  // Uniform in ±1/sqrt(fanIn), the usual linear-layer initialization.
  Tensor& addUniform(const std::string& name, Shape shape, int64_t fanIn, Rng& rng);
  Tensor& addNormal(const std::string& name, Shape shape, double stddev, Rng& rng);
  Tensor& addConstant(const std::string& name, Shape shape, double value);

  [[nodiscard]] const Tensor& get(const std::string& name) const;
  [[nodiscard]] bool contains(const std::string& name) const;
  [[nodiscard]] const std::vector<std::string>& names() const {
    return names_;
  }
  [[nodiscard]] std::vector<Tensor> tensors() const;
  [[nodiscard]] int64_t totalSize() const;
  [[nodiscard]] size_t count() const {
    return names_.size();
  }
  void zeroGrad();

 private:
  std::vector<std::string> names_;
  std::map<std::string, Tensor> byName_;
};

} // namespace mdt
