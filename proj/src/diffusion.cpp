#include "mdt/diffusion.h"

#include "mdt/errors.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdt {

DiffusionSchedule::DiffusionSchedule(int steps, double betaStart, double betaEnd)
    : betaStart_(betaStart), betaEnd_(betaEnd) {
  if (steps < 1) {
    throw ContractError("schedule: T must be at least 1");
  }
  if (!(betaStart > 0.0 && betaStart <= betaEnd && betaEnd < 1.0)) {
    throw ContractError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  const auto n = static_cast<size_t>(steps);
  beta_.resize(n);
  alpha_.resize(n);
  alphaBar_.resize(n);
  coef1_.resize(n);
  coef2_.resize(n);
  variance_.resize(n);
  double cumulative = 1.0;
  for (size_t i = 0; i < n; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    beta_[i] = betaStart + frac * (betaEnd - betaStart);
    alpha_[i] = 1.0 - beta_[i];
    const double prev = cumulative;
    cumulative *= alpha_[i];
    alphaBar_[i] = cumulative;
    coef1_[i] = beta_[i] * std::sqrt(prev) / (1.0 - cumulative);
    coef2_[i] = (1.0 - prev) * std::sqrt(alpha_[i]) / (1.0 - cumulative);
    variance_[i] = beta_[i] * (1.0 - prev) / (1.0 - cumulative);
  }
  if (n >= 2) {
    variance_[0] = variance_[1];
  }
}

size_t DiffusionSchedule::index(int t) const {
  if (t < 1 || t > steps()) {
    throw ContractError("schedule: step " + std::to_string(t) + " outside [1," + std::to_string(steps()) + "]");
  }
  return static_cast<size_t>(t - 1);
}

DiffusionSchedule makeSchedule(int steps, double betaStart, double betaEnd) {
  return DiffusionSchedule(steps, betaStart, betaEnd);
}

DiffusionSchedule makeScaledSchedule(int steps) {
  if (steps < 1) {
    throw ContractError("schedule: T must be at least 1");
  }
  const double factor = 1000.0 / static_cast<double>(steps);
  // Very short chains would push beta past 1.
  const double end = std::min(0.02 * factor, 0.999);
  const double start = std::min(1e-4 * factor, end);
  return DiffusionSchedule(steps, start, end);
}

NoisedSample qSample(const RowMatrix& x0, int t, const RowMatrix& eps, const DiffusionSchedule& schedule) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
    throw DimensionError("qSample: noise shape differs from x0");
  }
  const double ab = schedule.alphaBar(t);
  NoisedSample out;
  out.xt = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
  out.t = t;
  out.eps = eps;
  return out;
}

RowMatrix pSampleStep(
    const RowMatrix& xt,
    int t,
    const RowMatrix& x0Pred,
    const DiffusionSchedule& schedule,
    const RowMatrix& noise) {
  if (xt.rows() != x0Pred.rows() || xt.cols() != x0Pred.cols()) {
    throw DimensionError("pSampleStep: prediction shape differs from x_t");
  }
  RowMatrix mean = schedule.posteriorMeanCoef1(t) * x0Pred + schedule.posteriorMeanCoef2(t) * xt;
  if (t == 1) {
    return mean;
  }
  if (noise.rows() != xt.rows() || noise.cols() != xt.cols()) {
    throw DimensionError("pSampleStep: noise shape differs from x_t");
  }
  return mean + std::sqrt(schedule.posteriorVariance(t)) * noise;
}

RowMatrix sampleChain(const DenoiseFn& denoise, const DiffusionSchedule& schedule, int frames, int dim, Rng& rng) {
  RowMatrix x = gaussianMatrix(frames, dim, rng);
  for (int t = schedule.steps(); t >= 1; --t) {
    const RowMatrix x0Pred = denoise(x, t);
    const RowMatrix noise = t > 1 ? gaussianMatrix(frames, dim, rng) : RowMatrix();
    x = pSampleStep(x, t, x0Pred, schedule, noise);
    if (!x.allFinite()) {
      throw NumericalError("sampling produced non-finite values at step " + std::to_string(t));
    }
  }
  return x;
}

double diffusionLoss(const RowMatrix& x0, const RowMatrix& x0Pred) {
  if (x0.rows() != x0Pred.rows() || x0.cols() != x0Pred.cols()) {
    throw DimensionError("diffusionLoss: shape mismatch");
  }
  if (x0.size() == 0) {
    throw ContractError("diffusionLoss: empty sequence");
  }
  return (x0 - x0Pred).squaredNorm() / static_cast<double>(x0.size());
}

double firstFrameLoss(const RowMatrix& x0, const RowMatrix& x0Pred) {
  if (x0.rows() == 0 || x0Pred.rows() == 0) {
    throw ContractError("firstFrameLoss: empty sequence");
  }
  if (x0.cols() != x0Pred.cols()) {
    throw DimensionError("firstFrameLoss: shape mismatch");
  }
  return diffusionLoss(x0.topRows(1), x0Pred.topRows(1));
}

} // namespace mdt
