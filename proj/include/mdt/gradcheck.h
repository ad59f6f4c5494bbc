#pragma once

#include "mdt/parameters.h"
#include "mdt/tensor.h"

#include <functional>
#include <string>
#include <vector>

namespace mdt {

struct GradCheckResult {
  double maxRelativeError = 0.0;
  std::string worstParameter;
  int64_t worstIndex = -1;
  int64_t checkedEntries = 0;
};

// Compares the analytic gradient of `loss` with central differences for
// every entry of the given tensors. The relative error of one entry is
// |a − n| / max(|a|, |n|, floor).
GradCheckResult checkGradients(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const std::function<Tensor()>& loss,
    double step = 1e-5,
    double floor = 1e-4);

GradCheckResult checkGradients(const ParameterStore& store, const std::function<Tensor()>& loss, double step = 1e-5, double floor = 1e-4);

} // namespace mdt
