#pragma once

#include "mdt/denoiser.h"
#include "mdt/gradcheck.h"
#include "mdt/trainer.h"

namespace testing {

inline mdt::DenoiserConfig tinyConfig(mdt::MotionKind kind) {
  auto c = mdt::DenoiserConfig::desk(kind);
  c.width = 16;
  c.layers = 2;
  c.heads = 4;
  c.encoderLayers = 1;
  c.audioDim = 8;
  c.textDim = 8;
  c.maxFrames = 16;
  return c;
}

inline mdt::NormalizationStats unitStats(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

inline mdt::ConditionBundle randomBundle(int frames, const mdt::DenoiserConfig& c, mdt::Rng& rng) {
  mdt::ConditionBundle b;
  b.audio = mdt::gaussianMatrix(frames, c.audioDim, rng);
  for (int i = 0; i < frames; ++i) {
    b.phonemes.push_back(static_cast<int32_t>(mdt::uniformInt(rng, 1, c.vocab - 1)));
  }
  b.text = mdt::gaussianMatrix(c.textDim, 1, rng).col(0);
  b.firstFrame = mdt::gaussianMatrix(c.motionDim, 1, rng).col(0);
  return b;
}

// Moves every parameter away from its initialization (the output projection
// starts at zero, which would hide most of the network's gradients).
inline void perturbParameters(mdt::DenoiserModel& model, mdt::Rng& rng, double amount = 0.3) {
  for (auto t : model.parameters().tensors()) {
    for (auto& v : t.mutableData()) {
      v += mdt::uniformReal(rng, -amount, amount);
    }
  }
}

// Finite-difference check of the full training loss (λ·L_diff, plus L_first
// for pose) over every parameter of a tiny randomized model with N=4.
inline mdt::GradCheckResult fullModelGradCheck(mdt::MotionKind kind, uint64_t seed) {
  const auto config = tinyConfig(kind);
  mdt::DenoiserModel model(config, unitStats(config.motionDim), seed);
  mdt::Rng rng = mdt::makeRng(seed, 77);
  perturbParameters(model, rng);
  const auto bundle = randomBundle(4, config, rng);
  const mdt::RowMatrix x0 = mdt::gaussianMatrix(4, config.motionDim, rng);
  const mdt::RowMatrix eps = mdt::gaussianMatrix(4, config.motionDim, rng);
  const int t = 17;
  const auto xt = mdt::qSample(x0, t, eps, config.schedule()).xt;
  const auto loss = [&] {
    const auto pred = mdt::denoiserForward(mdt::toTensor(xt), t, bundle, model);
    return mdt::composeLoss(kind, mdt::toTensor(x0), pred, mdt::kLossWeight).total;
  };
  return mdt::checkGradients(model.parameters(), loss);
}

} // namespace testing
