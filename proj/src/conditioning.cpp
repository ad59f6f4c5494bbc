#include "mdt/conditioning.h"

#include "mdt/errors.h"
#include "mdt/layers.h"

#include <array>
#include <string>

namespace mdt {

ConditionBundle ConditionBundle::window(int begin, int count) const {
  if (begin < 0 || count < 1 || begin + count > frames()) {
    throw ContractError("condition window out of range");
  }
  ConditionBundle out;
  out.audio = audio.middleRows(begin, count);
  out.phonemes.assign(phonemes.begin() + begin, phonemes.begin() + begin + count);
  out.text = text;
  out.firstFrame = firstFrame;
  return out;
}

ConditionBundle blankConditions(const ConditionBundle& bundle) {
  ConditionBundle out;
  out.audio = RowMatrix::Zero(bundle.audio.rows(), bundle.audio.cols());
  out.phonemes.assign(bundle.phonemes.size(), kPadToken);
  out.text = Eigen::VectorXd::Zero(bundle.text.size());
  out.firstFrame = Eigen::VectorXd::Zero(bundle.firstFrame.size());
  return out;
}

void validateBundle(const ConditionBundle& bundle, const ConditionConfig& config) {
  const auto n = bundle.frames();
  if (n < 1) {
    throw ContractError("conditions: empty phoneme sequence");
  }
  if (bundle.audio.rows() != n) {
    throw DimensionError(
        "conditions: audio has " + std::to_string(bundle.audio.rows()) + " frames, phonemes " +
        std::to_string(n));
  }
  if (bundle.audio.cols() != config.audioDim) {
    throw DimensionError(
        "conditions: audio width " + std::to_string(bundle.audio.cols()) + ", expected " +
        std::to_string(config.audioDim));
  }
  if (bundle.text.size() != config.textDim) {
    throw DimensionError("conditions: text embedding length " + std::to_string(bundle.text.size()));
  }
  if (bundle.firstFrame.size() != config.motionDim) {
    throw DimensionError("conditions: first frame length " + std::to_string(bundle.firstFrame.size()));
  }
  for (const auto id : bundle.phonemes) {
    if (id < 0 || id >= config.vocab) {
      throw ContractError("conditions: phoneme id " + std::to_string(id) + " outside vocabulary");
    }
  }
}

Tensor toTensor(const RowMatrix& m, bool requiresGrad) {
  return Tensor::fromData(
      {m.rows(), m.cols()}, std::vector<double>(m.data(), m.data() + m.size()), requiresGrad);
}

Tensor rowTensor(const Eigen::VectorXd& v) {
  return Tensor::fromData({1, v.size()}, std::vector<double>(v.data(), v.data() + v.size()));
}

RowMatrix toMatrix(const Tensor& t) {
  RowMatrix m(t.rows(), t.cols());
  std::copy(t.data().begin(), t.data().end(), m.data());
  return m;
}

void registerConditionParameters(ParameterStore& store, const ConditionConfig& config, Rng& rng) {
  const int64_t h = config.width;
  registerLinear(store, "cond.audio.proj", config.audioDim, h, rng);
  for (int i = 0; i < config.encoderLayers; ++i) {
    registerEncoderBlock(store, "cond.audio.block" + std::to_string(i), h, rng);
  }
  store.addNormal("cond.phoneme.embed", {config.vocab, h}, 1.0, rng);
  for (int i = 0; i < config.encoderLayers; ++i) {
    registerEncoderBlock(store, "cond.phoneme.block" + std::to_string(i), h, rng);
  }
  registerLinear(store, "cond.text.proj", config.textDim, h, rng);
  registerLinear(store, "cond.first.fc1", config.motionDim, h, rng);
  registerLinear(store, "cond.first.fc2", h, h, rng);
  registerLinear(store, "cond.time.proj", h, h, rng);
}

Tensor encodePhonemes(const std::vector<int32_t>& phonemes, const ParameterStore& store, const ConditionConfig& config) {
  for (const auto id : phonemes) {
    if (id < 0 || id >= config.vocab) {
      throw ContractError("phoneme id " + std::to_string(id) + " outside vocabulary of " + std::to_string(config.vocab));
    }
  }
  const auto n = static_cast<int64_t>(phonemes.size());
  Tensor x = add(embedding(store.get("cond.phoneme.embed"), phonemes), sinusoidalPositions(n, config.width));
  for (int i = 0; i < config.encoderLayers; ++i) {
    x = encoderBlock(x, store, "cond.phoneme.block" + std::to_string(i), config.heads);
  }
  return x;
}

Tensor encodeAudioFeatures(const RowMatrix& audio, const ParameterStore& store, const ConditionConfig& config) {
  if (audio.cols() != config.audioDim) {
    throw DimensionError(
        "audio features have width " + std::to_string(audio.cols()) + ", expected " +
        std::to_string(config.audioDim));
  }
  if (!audio.allFinite()) {
    throw NumericalError("audio features contain non-finite values");
  }
  Tensor x = add(linear(toTensor(audio), store, "cond.audio.proj"), sinusoidalPositions(audio.rows(), config.width));
  for (int i = 0; i < config.encoderLayers; ++i) {
    x = encoderBlock(x, store, "cond.audio.block" + std::to_string(i), config.heads);
  }
  return x;
}

Tensor encodeTextEmbedding(const Eigen::VectorXd& text, const ParameterStore& store, const ConditionConfig& config) {
  if (text.size() != config.textDim) {
    throw DimensionError(
        "text embedding has length " + std::to_string(text.size()) + ", expected " +
        std::to_string(config.textDim));
  }
  return linear(rowTensor(text), store, "cond.text.proj");
}

Tensor encodeFirstFrame(const Eigen::VectorXd& firstFrame, const ParameterStore& store, const ConditionConfig& config) {
  if (firstFrame.size() != config.motionDim) {
    throw DimensionError(
        "first frame has length " + std::to_string(firstFrame.size()) + ", expected " +
        std::to_string(config.motionDim));
  }
  return linear(tanh(linear(rowTensor(firstFrame), store, "cond.first.fc1")), store, "cond.first.fc2");
}

Tensor encodeTimestep(int step, const ParameterStore& store, const ConditionConfig& config) {
  return linear(timestepEncoding(step, config.width), store, "cond.time.proj");
}

ConditionMemory encodeStaticConditions(const ConditionBundle& bundle, const ParameterStore& store, const ConditionConfig& config) {
  validateBundle(bundle, config);
  const std::array<Tensor, 4> parts = {
      encodeAudioFeatures(bundle.audio, store, config),
      encodePhonemes(bundle.phonemes, store, config),
      encodeTextEmbedding(bundle.text, store, config),
      encodeFirstFrame(bundle.firstFrame, store, config)};
  ConditionMemory memory;
  memory.tokens = concatRows(parts);
  const auto n = static_cast<size_t>(bundle.frames());
  memory.labels.assign(n, Segment::Audio);
  memory.labels.insert(memory.labels.end(), n, Segment::Phoneme);
  memory.labels.push_back(Segment::Text);
  memory.labels.push_back(Segment::FirstFrame);
  return memory;
}

ConditionMemory appendTimestep(const ConditionMemory& staticMemory, int step, const ParameterStore& store, const ConditionConfig& config) {
  const std::array<Tensor, 2> parts = {staticMemory.tokens, encodeTimestep(step, store, config)};
  ConditionMemory memory;
  memory.tokens = concatRows(parts);
  memory.labels = staticMemory.labels;
  memory.labels.push_back(Segment::Timestep);
  return memory;
}

ConditionMemory assembleMemory(const ConditionBundle& bundle, int step, const ParameterStore& store, const ConditionConfig& config) {
  return appendTimestep(encodeStaticConditions(bundle, store, config), step, store, config);
}

} // namespace mdt
