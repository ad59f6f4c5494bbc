#include "mdt/parameters.h"

#include "mdt/errors.h"

#include <cmath>

namespace mdt {

Tensor& ParameterStore::add(const std::string& name, Tensor tensor) {
  if (byName_.contains(name)) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  tensor.node().requiresGrad = true;
  names_.push_back(name);
  return byName_.emplace(name, std::move(tensor)).first->second;
}

Tensor& ParameterStore::addUniform(const std::string& name, Shape shape, int64_t fanIn, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fanIn));
  std::vector<double> data(static_cast<size_t>(shapeSize(shape)));
  for (auto& v : data) {
    v = uniformReal(rng, -bound, bound);
  }
  return add(name, Tensor::fromData(std::move(shape), std::move(data), true));
}

Tensor& ParameterStore::addNormal(const std::string& name, Shape shape, double stddev, Rng& rng) {
  std::vector<double> data(static_cast<size_t>(shapeSize(shape)));
  for (auto& v : data) {
    v = stddev * gaussian(rng);
  }
  return add(name, Tensor::fromData(std::move(shape), std::move(data), true));
}

Tensor& ParameterStore::addConstant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  const auto it = byName_.find(name);
  if (it == byName_.end()) {
    throw ContractError("unknown parameter '" + name + "'");
  }
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return byName_.contains(name);
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(names_.size());
  for (const auto& n : names_) {
    out.push_back(byName_.at(n));
  }
  return out;
}

int64_t ParameterStore::totalSize() const {
  int64_t n = 0;
  for (const auto& [name, t] : byName_) {
    n += t.size();
  }
  return n;
}

void ParameterStore::zeroGrad() {
  for (auto& [name, t] : byName_) {
    t.zeroGrad();
  }
}

} // namespace mdt
