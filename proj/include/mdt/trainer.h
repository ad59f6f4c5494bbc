#pragma once

#include "mdt/dataset.h"
#include "mdt/denoiser.h"
#include "mdt/diffusion.h"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mdt {

inline constexpr double kLossWeight = 6.0;

struct TrainConfig {
  MotionKind kind = MotionKind::Lips;
  double lambda = kLossWeight;
  double learningRate = 1e-3;
  int batchSize = 8;
  int steps = 2000;
  int window = 32;
  uint64_t seed = 1;
  // 0 disables intermediate checkpoints.
  int checkpointEvery = 0;
  std::filesystem::path checkpointDir;
  DenoiserConfig model;

  // Desk model config, window 32, batch 8, 2000 steps, lr 1e-3.
  static TrainConfig desk(MotionKind kind);
  // Paper-scale model config, window 64, batch 32, lr 1e-4.
  static TrainConfig paper(MotionKind kind);

  void validate() const;
  [[nodiscard]] DiffusionSchedule schedule() const {
    return model.schedule();
  }
};

struct TrainStepRecord {
  int step = 0;
  double loss = 0.0;
  double diffusionTerm = 0.0;  // λ·L_diff
  double firstFrameTerm = 0.0; // L_first (pose only, else 0)
  double wallMs = 0.0;
};

struct TrainReport {
  std::vector<TrainStepRecord> steps;
  double initialAverage = 0.0;
  double finalAverage = 0.0;
  double wallSeconds = 0.0;
  std::vector<std::filesystem::path> checkpoints;
};

struct LossTerms {
  double total = 0.0;
  double diffusion = 0.0;
  double firstFrame = 0.0;
};

// λ·L_diff for lips and expression; λ·L_diff + L_first for pose.
LossTerms composeLoss(MotionKind kind, const RowMatrix& x0, const RowMatrix& x0Pred, double lambda);

struct LossTensors {
  Tensor total;
  Tensor diffusion;
  Tensor firstFrame; // undefined unless kind is pose
};
LossTensors composeLoss(MotionKind kind, const Tensor& x0, const Tensor& x0Pred, double lambda);

// A uniformly random contiguous window of a clip, in raw units.
struct TrainingWindow {
  int begin = 0;
  RowMatrix motion;            // N×70
  ConditionBundle conditions;  // firstFrame is the raw 70-dim frame at `begin`
};
TrainingWindow sampleTrainingWindow(const Clip& clip, int frames, Rng& rng);

// Slices a window to one kind and moves motion and first frame into the
// model's normalized units.
struct KindWindow {
  RowMatrix x0;
  ConditionBundle conditions;
};
KindWindow prepareWindow(const TrainingWindow& window, MotionKind kind, const ParameterLayout& layout, const NormalizationStats& stats);

struct TrainResult {
  DenoiserModel model;
  TrainReport report;
};

using StepCallback = std::function<void(const TrainStepRecord&)>;

// Trains one kind model on the given clips. `stats` are the 70-dim statistics
// of the training split. Deterministic for a fixed config.
TrainResult trainModel(
    const std::vector<const Clip*>& clips,
    const ParameterLayout& layout,
    const NormalizationStats& stats,
    const TrainConfig& config,
    const StepCallback& onStep = {});

} // namespace mdt
