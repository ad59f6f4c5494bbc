#pragma once

#include "mdt/tensor.h"

#include <cstdint>
#include <vector>

namespace mdt {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed list of parameter tensors.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  // Applies one update from the gradients currently stored on the parameters.
  // Throws NumericalError (leaving parameters and moments untouched) if any
  // gradient is NaN or infinite.
  void step();
  void zeroGrad();

  [[nodiscard]] int64_t stepCount() const {
    return step_;
  }
  [[nodiscard]] const AdamOptions& options() const {
    return options_;
  }
  [[nodiscard]] const std::vector<std::vector<double>>& firstMoments() const {
    return m_;
  }
  [[nodiscard]] const std::vector<std::vector<double>>& secondMoments() const {
    return v_;
  }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

} // namespace mdt
