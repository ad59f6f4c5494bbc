#pragma once

#include "mdt/conditioning.h"
#include "mdt/diffusion.h"
#include "mdt/motion.h"
#include "mdt/parameters.h"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>

namespace mdt {

struct DenoiserConfig {
  MotionKind kind = MotionKind::Lips;
  int motionDim = kMouthDim;
  int width = 32;
  int layers = 2;
  int heads = 4;
  int encoderLayers = 2;
  int maxFrames = 256;
  int vocab = kPhonemeVocab;
  int audioDim = 32;
  int textDim = 64;
  // Trains and samples with every condition blanked out (a baseline).
  bool unconditional = false;
  // Diffusion chain the model is trained and sampled with.
  int diffusionSteps = 50;
  double betaStart = 2e-3;
  double betaEnd = 0.4;

  // layers=2, width=32, T=50 with betas scaled by 1000/50.
  static DenoiserConfig desk(MotionKind kind);
  // layers=8, width=256, heads=4, T=1000 with betas 1e-4..0.02.
  static DenoiserConfig paper(MotionKind kind);

  void validate() const;
  [[nodiscard]] DiffusionSchedule schedule() const;
  [[nodiscard]] ConditionConfig conditionConfig() const;
  [[nodiscard]] nlohmann::json toJson() const;
  static DenoiserConfig fromJson(const nlohmann::json& j);

  bool operator==(const DenoiserConfig&) const = default;
};

// One conditional motion transformer (lips, expression or pose) together
// with the normalization statistics of the columns it generates.
class DenoiserModel {
 public:
  DenoiserModel(DenoiserConfig config, NormalizationStats stats, uint64_t seed);

  [[nodiscard]] const DenoiserConfig& config() const {
    return config_;
  }
  [[nodiscard]] const NormalizationStats& stats() const {
    return stats_;
  }
  void setStats(NormalizationStats stats);
  [[nodiscard]] const ParameterStore& parameters() const {
    return params_;
  }
  [[nodiscard]] ParameterStore& parameters() {
    return params_;
  }

 private:
  DenoiserConfig config_;
  NormalizationStats stats_;
  ParameterStore params_;
};

// Predicts x_0 (N×d) from the noised sequence x_t (N×d) and the condition
// memory, which already carries the timestep token.
Tensor denoiserForward(const Tensor& xt, const ConditionMemory& memory, const DenoiserModel& model);

// Builds the memory for `bundle` at step t and runs the forward pass.
Tensor denoiserForward(const Tensor& xt, int t, const ConditionBundle& bundle, const DenoiserModel& model);

// Reverse chain from Gaussian noise, in the model's normalized units. The
// bundle's firstFrame must be normalized as well.
MotionSequence sampleSequence(
    const DenoiserModel& model,
    const ConditionBundle& bundle,
    const DiffusionSchedule& schedule,
    int frames,
    Rng& rng);

// Binary checkpoint: magic "MDTM", version, JSON config block, named float64
// tensors (little-endian) and a trailing CRC-32 of everything before it.
void saveModel(const DenoiserModel& model, const std::filesystem::path& path);
DenoiserModel loadModel(const std::filesystem::path& path);

} // namespace mdt
