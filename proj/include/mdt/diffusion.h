#pragma once

#include "mdt/motion.h"
#include "mdt/random.h"

#include <functional>
#include <vector>

namespace mdt {

// Per-step DDPM coefficients for steps t = 1..T (accessors take 1-based t).
//
// posteriorVariance(1) follows the clipped convention of the reference DDPM
// code: the exact value beta_1·(1-1)/(1-alpha_bar_1) is 0, so it is replaced
// by posteriorVariance(2) when T >= 2. Sampling never injects noise at t = 1
// either way.
class DiffusionSchedule {
 public:
  DiffusionSchedule(int steps, double betaStart, double betaEnd);

  [[nodiscard]] int steps() const {
    return static_cast<int>(beta_.size());
  }
  [[nodiscard]] double beta(int t) const {
    return beta_[index(t)];
  }
  [[nodiscard]] double alpha(int t) const {
    return alpha_[index(t)];
  }
  [[nodiscard]] double alphaBar(int t) const {
    return alphaBar_[index(t)];
  }
  // alpha_bar_{t-1}, with alpha_bar_0 = 1.
  [[nodiscard]] double alphaBarPrev(int t) const {
    return t == 1 ? 1.0 : alphaBar(t - 1);
  }
  [[nodiscard]] double posteriorMeanCoef1(int t) const {
    return coef1_[index(t)];
  }
  [[nodiscard]] double posteriorMeanCoef2(int t) const {
    return coef2_[index(t)];
  }
  [[nodiscard]] double posteriorVariance(int t) const {
    return variance_[index(t)];
  }
  [[nodiscard]] double betaStart() const {
    return betaStart_;
  }
  [[nodiscard]] double betaEnd() const {
    return betaEnd_;
  }

 private:
  [[nodiscard]] size_t index(int t) const;

  double betaStart_;
  double betaEnd_;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alphaBar_;
  std::vector<double> coef1_;
  std::vector<double> coef2_;
  std::vector<double> variance_;
};

// Linear schedule between betaStart and betaEnd over T steps.
DiffusionSchedule makeSchedule(int steps, double betaStart = 1e-4, double betaEnd = 0.02);

// The 1e-4..0.02 schedule defined at 1000 steps, with betas multiplied by
// 1000/T so that a short chain reaches a comparable terminal noise level.
DiffusionSchedule makeScaledSchedule(int steps);

struct NoisedSample {
  RowMatrix xt;
  int t = 0;
  RowMatrix eps;
};

NoisedSample qSample(const RowMatrix& x0, int t, const RowMatrix& eps, const DiffusionSchedule& schedule);

// One ancestral step from x_t given the denoiser's estimate of x_0. At t = 1
// the posterior mean is returned without noise.
RowMatrix pSampleStep(
    const RowMatrix& xt,
    int t,
    const RowMatrix& x0Pred,
    const DiffusionSchedule& schedule,
    const RowMatrix& noise);

// Predicts x_0 from (x_t, t).
using DenoiseFn = std::function<RowMatrix(const RowMatrix& xt, int t)>;

// Full reverse chain t = T..1 from standard Gaussian noise of shape frames×dim.
RowMatrix sampleChain(const DenoiseFn& denoise, const DiffusionSchedule& schedule, int frames, int dim, Rng& rng);

// Mean squared error over all frames and dimensions.
double diffusionLoss(const RowMatrix& x0, const RowMatrix& x0Pred);
// Mean squared error of the first frame only.
double firstFrameLoss(const RowMatrix& x0, const RowMatrix& x0Pred);

} // namespace mdt
