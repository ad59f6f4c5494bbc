#include "mdt/trainer.h"

#include "mdt/adam.h"
#include "mdt/errors.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace mdt {

TrainConfig TrainConfig::desk(MotionKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.model = DenoiserConfig::desk(kind);
  return c;
}

TrainConfig TrainConfig::paper(MotionKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.model = DenoiserConfig::paper(kind);
  c.learningRate = 1e-4;
  c.batchSize = 32;
  c.window = 64;
  c.steps = 200000;
  return c;
}

void TrainConfig::validate() const {
  if (!(lambda > 0.0)) {
    throw ContractError("train: lambda must be positive");
  }
  if (steps < 1 || batchSize < 1) {
    throw ContractError("train: steps and batch size must be at least 1");
  }
  if (window < 2) {
    throw ContractError("train: window length must be at least 2");
  }
  if (!(learningRate > 0.0)) {
    throw ContractError("train: learning rate must be positive");
  }
  if (model.kind != kind) {
    throw ContractError("train: model config kind differs from training kind");
  }
  if (window > model.maxFrames) {
    throw ContractError("train: window exceeds the model's max_frames");
  }
  model.validate();
}

LossTerms composeLoss(MotionKind kind, const RowMatrix& x0, const RowMatrix& x0Pred, double lambda) {
  LossTerms terms;
  terms.diffusion = lambda * diffusionLoss(x0, x0Pred);
  if (kind == MotionKind::Pose) {
    terms.firstFrame = firstFrameLoss(x0, x0Pred);
  }
  terms.total = terms.diffusion + terms.firstFrame;
  return terms;
}

LossTensors composeLoss(MotionKind kind, const Tensor& x0, const Tensor& x0Pred, double lambda) {
  LossTensors out;
  out.diffusion = scale(mse(x0Pred, x0), lambda);
  if (kind == MotionKind::Pose) {
    out.firstFrame = mse(sliceRows(x0Pred, 0, 1), sliceRows(x0, 0, 1));
    out.total = add(out.diffusion, out.firstFrame);
  } else {
    out.total = out.diffusion;
  }
  return out;
}

TrainingWindow sampleTrainingWindow(const Clip& clip, int frames, Rng& rng) {
  if (frames < 1 || clip.frames() < frames) {
    throw ContractError(
        "clip '" + clip.id + "' has " + std::to_string(clip.frames()) + " frames, window needs " +
        std::to_string(frames));
  }
  TrainingWindow w;
  w.begin = static_cast<int>(uniformInt(rng, 0, clip.frames() - frames));
  w.motion = clip.motion.values.middleRows(w.begin, frames);
  w.conditions = clip.conditions(w.begin, frames);
  return w;
}

KindWindow prepareWindow(const TrainingWindow& window, MotionKind kind, const ParameterLayout& layout, const NormalizationStats& stats) {
  const auto kindStats = stats.dim() == kMotionDim ? stats.slice(kind, layout) : stats;
  const auto sliced = sliceMotion(MotionSequence(window.motion), kind, layout);
  KindWindow out;
  out.x0 = normalize(sliced, kindStats).values;
  out.conditions = window.conditions;
  const auto& cols = layout.columns(kind);
  Eigen::VectorXd first(static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    first[static_cast<Eigen::Index>(j)] = window.conditions.firstFrame[cols[j]];
  }
  out.conditions.firstFrame = normalizeFrame(first, kindStats);
  return out;
}

TrainResult trainModel(
    const std::vector<const Clip*>& clips,
    const ParameterLayout& layout,
    const NormalizationStats& stats,
    const TrainConfig& config,
    const StepCallback& onStep) {
  config.validate();
  if (clips.empty()) {
    throw ContractError("train: empty dataset");
  }
  for (const auto* c : clips) {
    if (c->frames() < config.window) {
      throw ContractError("train: clip '" + c->id + "' is shorter than the window");
    }
  }
  const auto kindStats = stats.slice(config.kind, layout);
  DenoiserModel model(config.model, kindStats, config.seed);
  const auto schedule = config.schedule();
  Adam adam(model.parameters().tensors(), AdamOptions{.lr = config.learningRate});
  Rng rng = makeRng(config.seed, 0x747261696eULL);

  TrainReport report;
  const auto start = std::chrono::steady_clock::now();
  for (int step = 1; step <= config.steps; ++step) {
    const auto stepStart = std::chrono::steady_clock::now();
    adam.zeroGrad();
    Tensor total;
    double diffusionSum = 0.0;
    double firstSum = 0.0;
    for (int b = 0; b < config.batchSize; ++b) {
      const Clip& clip = *clips[static_cast<size_t>(uniformInt(rng, 0, static_cast<int64_t>(clips.size()) - 1))];
      const auto window = prepareWindow(sampleTrainingWindow(clip, config.window, rng), config.kind, layout, stats);
      const int t = static_cast<int>(uniformInt(rng, 1, schedule.steps()));
      const RowMatrix eps = gaussianMatrix(window.x0.rows(), window.x0.cols(), rng);
      const auto noised = qSample(window.x0, t, eps, schedule);
      const Tensor pred = denoiserForward(toTensor(noised.xt), t, window.conditions, model);
      const auto loss = composeLoss(config.kind, toTensor(window.x0), pred, config.lambda);
      diffusionSum += loss.diffusion.item();
      if (loss.firstFrame.defined()) {
        firstSum += loss.firstFrame.item();
      }
      total = total.defined() ? add(total, loss.total) : loss.total;
    }
    total = scale(total, 1.0 / config.batchSize);
    const double value = total.item();
    if (!std::isfinite(value)) {
      throw NumericalError("training loss became non-finite at step " + std::to_string(step));
    }
    backward(total);
    adam.step();

    TrainStepRecord rec;
    rec.step = step;
    rec.loss = value;
    rec.diffusionTerm = diffusionSum / config.batchSize;
    rec.firstFrameTerm = firstSum / config.batchSize;
    rec.wallMs = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - stepStart).count();
    report.steps.push_back(rec);
    if (onStep) {
      onStep(rec);
    }
    if (config.checkpointEvery > 0 && step % config.checkpointEvery == 0 && !config.checkpointDir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_step%06d.mdtm", std::string(kindName(config.kind)).c_str(), step);
      const auto path = config.checkpointDir / name;
      saveModel(model, path);
      report.checkpoints.push_back(path);
    }
  }
  report.wallSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto span = std::min<size_t>(100, report.steps.size());
  for (size_t i = 0; i < span; ++i) {
    report.initialAverage += report.steps[i].loss / static_cast<double>(span);
    report.finalAverage += report.steps[report.steps.size() - span + i].loss / static_cast<double>(span);
  }
  return TrainResult{std::move(model), std::move(report)};
}

} // namespace mdt
