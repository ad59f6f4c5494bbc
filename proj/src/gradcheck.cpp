#include "mdt/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace mdt {

GradCheckResult checkGradients(
    const std::vector<std::pair<std::string, Tensor>>& params,
    const std::function<Tensor()>& loss,
    double step,
    double floor) {
  for (const auto& entry : params) {
    Tensor t = entry.second;
    t.zeroGrad();
  }
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : params) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckResult result;
  NoGradGuard noGrad;
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor t = params[p].second;
    auto data = t.mutableData();
    for (size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = loss().item();
      data[i] = saved - step;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > result.maxRelativeError || result.worstIndex < 0) {
        result.maxRelativeError = rel;
        result.worstParameter = params[p].first;
        result.worstIndex = static_cast<int64_t>(i);
      }
      ++result.checkedEntries;
    }
  }
  return result;
}

GradCheckResult checkGradients(const ParameterStore& store, const std::function<Tensor()>& loss, double step, double floor) {
  std::vector<std::pair<std::string, Tensor>> params;
  for (const auto& name : store.names()) {
    params.emplace_back(name, store.get(name));
  }
  return checkGradients(params, loss, step, floor);
}

} // namespace mdt
