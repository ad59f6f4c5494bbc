#include "mdt/adam.h"

#include "mdt/errors.h"

#include <cmath>

namespace mdt {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.size()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.size()), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    for (const auto g : p.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("adam: non-finite gradient, update rejected");
      }
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (size_t k = 0; k < params_.size(); ++k) {
    auto value = params_[k].mutableData();
    const auto grad = params_[k].grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (size_t i = 0; i < value.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * grad[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * grad[i] * grad[i];
      const double mHat = m[i] / c1;
      const double vHat = v[i] / c2;
      value[i] -= options_.lr * mHat / (std::sqrt(vHat) + options_.eps);
    }
  }
}

void Adam::zeroGrad() {
  for (auto& p : params_) {
    p.zeroGrad();
  }
}

} // namespace mdt
