#pragma once

#include "mdt/motion.h"
#include "mdt/parameters.h"
#include "mdt/tensor.h"

#include <cstdint>
#include <vector>

namespace mdt {

// Phoneme vocabulary: id 0 pads, id 1 is silence, 2..40 are the 39 ARPAbet phonemes.
inline constexpr int kPhonemeVocab = 41;
inline constexpr int32_t kPadToken = 0;
inline constexpr int32_t kSilenceToken = 1;

// Per-clip conditioning signals, all precomputed by external tools:
// speech features per frame, phoneme token per frame, a transcript
// embedding, and the first motion frame of the kind being generated
// (in the model's normalized units).
struct ConditionBundle {
  RowMatrix audio;
  std::vector<int32_t> phonemes;
  Eigen::VectorXd text;
  Eigen::VectorXd firstFrame;

  [[nodiscard]] int frames() const {
    return static_cast<int>(phonemes.size());
  }
  // Frames [begin, begin + count) of the per-frame signals; text and first
  // frame are copied unchanged.
  [[nodiscard]] ConditionBundle window(int begin, int count) const;
};

// Same shapes, every signal replaced by zeros (phonemes by the pad token).
ConditionBundle blankConditions(const ConditionBundle& bundle);

struct ConditionConfig {
  int motionDim = kMouthDim;
  int width = 32;
  int heads = 4;
  int encoderLayers = 2;
  int vocab = kPhonemeVocab;
  int audioDim = 32;
  int textDim = 64;
};

// Throws when the bundle's shapes or token ids disagree with the config.
void validateBundle(const ConditionBundle& bundle, const ConditionConfig& config);

enum class Segment { Audio, Phoneme, Text, FirstFrame, Timestep };

// Encoded condition tokens for cross-attention, M×H with one label per row.
// Row order: audio (N), phonemes (N), text (1), first frame (1), timestep (1).
struct ConditionMemory {
  Tensor tokens;
  std::vector<Segment> labels;

  [[nodiscard]] int64_t size() const {
    return static_cast<int64_t>(labels.size());
  }
};

void registerConditionParameters(ParameterStore& store, const ConditionConfig& config, Rng& rng);

Tensor encodePhonemes(const std::vector<int32_t>& phonemes, const ParameterStore& store, const ConditionConfig& config);
Tensor encodeAudioFeatures(const RowMatrix& audio, const ParameterStore& store, const ConditionConfig& config);
Tensor encodeTextEmbedding(const Eigen::VectorXd& text, const ParameterStore& store, const ConditionConfig& config);
Tensor encodeFirstFrame(const Eigen::VectorXd& firstFrame, const ParameterStore& store, const ConditionConfig& config);
Tensor encodeTimestep(int step, const ParameterStore& store, const ConditionConfig& config);

// Everything except the timestep token; constant across a sampling chain.
ConditionMemory encodeStaticConditions(const ConditionBundle& bundle, const ParameterStore& store, const ConditionConfig& config);
ConditionMemory appendTimestep(const ConditionMemory& staticMemory, int step, const ParameterStore& store, const ConditionConfig& config);

ConditionMemory assembleMemory(const ConditionBundle& bundle, int step, const ParameterStore& store, const ConditionConfig& config);

Tensor toTensor(const RowMatrix& m, bool requiresGrad = false);
Tensor rowTensor(const Eigen::VectorXd& v);
RowMatrix toMatrix(const Tensor& t);

} // namespace mdt
