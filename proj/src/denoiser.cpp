#include "mdt/denoiser.h"

#include "mdt/binary_io.h"
#include "mdt/errors.h"
#include "mdt/layers.h"

#include <array>
#include <cmath>
#include <string>

namespace mdt {

namespace {

constexpr std::array<char, 4> kModelMagic = {'M', 'D', 'T', 'M'};
constexpr uint32_t kModelVersion = 1;

} // namespace

DenoiserConfig DenoiserConfig::desk(MotionKind kind) {
  DenoiserConfig c;
  c.kind = kind;
  c.motionDim = kindDim(kind);
  return c;
}

DenoiserConfig DenoiserConfig::paper(MotionKind kind) {
  DenoiserConfig c = desk(kind);
  c.width = 256;
  c.layers = 8;
  c.heads = 4;
  c.audioDim = 768;
  c.textDim = 512;
  c.diffusionSteps = 1000;
  c.betaStart = 1e-4;
  c.betaEnd = 0.02;
  return c;
}

void DenoiserConfig::validate() const {
  if (motionDim != kindDim(kind)) {
    throw ContractError(
        "config: " + std::string(kindName(kind)) + " model needs d=" + std::to_string(kindDim(kind)) +
        ", got " + std::to_string(motionDim));
  }
  if (width < 2 || width % 2 != 0) {
    throw ContractError("config: width must be a positive even number");
  }
  if (heads < 1 || width % heads != 0) {
    throw ContractError("config: width must be divisible by heads");
  }
  if (diffusionSteps < 1 || !(betaStart > 0.0 && betaStart <= betaEnd && betaEnd < 1.0)) {
    throw ContractError("config: invalid diffusion schedule");
  }
  if (layers < 1 || encoderLayers < 0 || maxFrames < 1 || vocab < 2 || audioDim < 1 || textDim < 1) {
    throw ContractError("config: sizes must be positive");
  }
}

DiffusionSchedule DenoiserConfig::schedule() const {
  return makeSchedule(diffusionSteps, betaStart, betaEnd);
}

ConditionConfig DenoiserConfig::conditionConfig() const {
  return ConditionConfig{
      .motionDim = motionDim,
      .width = width,
      .heads = heads,
      .encoderLayers = encoderLayers,
      .vocab = vocab,
      .audioDim = audioDim,
      .textDim = textDim};
}

nlohmann::json DenoiserConfig::toJson() const {
  return {
      {"kind", std::string(kindName(kind))},
      {"motion_dim", motionDim},
      {"width", width},
      {"layers", layers},
      {"heads", heads},
      {"encoder_layers", encoderLayers},
      {"max_frames", maxFrames},
      {"vocab", vocab},
      {"audio_dim", audioDim},
      {"text_dim", textDim},
      {"unconditional", unconditional},
      {"diffusion_steps", diffusionSteps},
      {"beta_start", betaStart},
      {"beta_end", betaEnd}};
}

DenoiserConfig DenoiserConfig::fromJson(const nlohmann::json& j) {
  DenoiserConfig c;
  c.kind = parseKind(j.at("kind").get<std::string>());
  c.motionDim = j.at("motion_dim").get<int>();
  c.width = j.at("width").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.encoderLayers = j.at("encoder_layers").get<int>();
  c.maxFrames = j.at("max_frames").get<int>();
  c.vocab = j.at("vocab").get<int>();
  c.audioDim = j.at("audio_dim").get<int>();
  c.textDim = j.at("text_dim").get<int>();
  c.unconditional = j.at("unconditional").get<bool>();
  c.diffusionSteps = j.at("diffusion_steps").get<int>();
  c.betaStart = j.at("beta_start").get<double>();
  c.betaEnd = j.at("beta_end").get<double>();
  return c;
}

void DenoiserModel::setStats(NormalizationStats stats) {
  stats.validate();
  if (stats.dim() != config_.motionDim) {
    throw DimensionError("model: normalization stats do not match the motion dimension");
  }
  stats_ = std::move(stats);
}

DenoiserModel::DenoiserModel(DenoiserConfig config, NormalizationStats stats, uint64_t seed)
    : config_(config), stats_(std::move(stats)) {
  config_.validate();
  stats_.validate();
  if (stats_.dim() != config_.motionDim) {
    throw DimensionError("model: normalization stats do not match the motion dimension");
  }
  Rng rng = makeRng(seed, 0x6d6f64656cULL);
  const auto cond = config_.conditionConfig();
  registerConditionParameters(params_, cond, rng);
  registerLinear(params_, "dec.in", config_.motionDim, config_.width, rng);
  for (int i = 0; i < config_.layers; ++i) {
    registerDecoderBlock(params_, "dec.block" + std::to_string(i), config_.width, rng);
  }
  registerLayerNorm(params_, "dec.ln", config_.width);
  // Zero output projection: the initial prediction is the normalized mean.
  registerLinear(params_, "dec.out", config_.width, config_.motionDim, rng, true);
}

Tensor denoiserForward(const Tensor& xt, const ConditionMemory& memory, const DenoiserModel& model) {
  const auto& cfg = model.config();
  if (xt.shape().size() != 2 || xt.cols() != cfg.motionDim) {
    throw DimensionError(
        "denoiser: x_t must be N×" + std::to_string(cfg.motionDim) + ", got " + shapeString(xt.shape()));
  }
  if (xt.rows() > cfg.maxFrames) {
    throw DimensionError("denoiser: sequence longer than max_frames");
  }
  if (memory.tokens.cols() != cfg.width) {
    throw DimensionError("denoiser: memory width does not match the model width");
  }
  const auto& p = model.parameters();
  Tensor x = add(linear(xt, p, "dec.in"), sinusoidalPositions(xt.rows(), cfg.width));
  for (int i = 0; i < cfg.layers; ++i) {
    x = decoderBlock(x, memory.tokens, p, "dec.block" + std::to_string(i), cfg.heads);
  }
  return linear(layerNorm(x, p, "dec.ln"), p, "dec.out");
}

Tensor denoiserForward(const Tensor& xt, int t, const ConditionBundle& bundle, const DenoiserModel& model) {
  const auto cond = model.config().conditionConfig();
  const auto memory = model.config().unconditional
      ? assembleMemory(blankConditions(bundle), t, model.parameters(), cond)
      : assembleMemory(bundle, t, model.parameters(), cond);
  return denoiserForward(xt, memory, model);
}

MotionSequence sampleSequence(
    const DenoiserModel& model,
    const ConditionBundle& bundle,
    const DiffusionSchedule& schedule,
    int frames,
    Rng& rng) {
  const auto& cfg = model.config();
  if (bundle.frames() != frames) {
    throw ContractError(
        "sampleSequence: conditions cover " + std::to_string(bundle.frames()) + " frames, requested " +
        std::to_string(frames));
  }
  if (frames > cfg.maxFrames) {
    throw ContractError("sampleSequence: more frames than the model's max_frames");
  }
  NoGradGuard noGrad;
  const auto cond = cfg.conditionConfig();
  const ConditionMemory staticMemory = encodeStaticConditions(
      cfg.unconditional ? blankConditions(bundle) : bundle, model.parameters(), cond);
  const DenoiseFn denoise = [&](const RowMatrix& xt, int t) {
    const auto memory = appendTimestep(staticMemory, t, model.parameters(), cond);
    return toMatrix(denoiserForward(toTensor(xt), memory, model));
  };
  return MotionSequence(sampleChain(denoise, schedule, frames, cfg.motionDim, rng));
}

void saveModel(const DenoiserModel& model, const std::filesystem::path& path) {
  ByteWriter w;
  for (const char c : kModelMagic) {
    w.put(static_cast<uint8_t>(c));
  }
  w.put(kModelVersion);
  const std::string config = model.config().toJson().dump();
  w.put(static_cast<uint64_t>(config.size()));
  w.putBytes({reinterpret_cast<const uint8_t*>(config.data()), config.size()});

  const auto& params = model.parameters();
  const auto& stats = model.stats();
  w.put(static_cast<uint32_t>(params.count() + 2));
  const auto putTensor = [&w](const std::string& name, const Shape& shape, std::span<const double> data) {
    w.putString(name);
    w.put(static_cast<uint32_t>(shape.size()));
    for (const auto d : shape) {
      w.put(static_cast<int64_t>(d));
    }
    w.putBytes({reinterpret_cast<const uint8_t*>(data.data()), data.size() * sizeof(double)});
  };
  for (const auto& name : params.names()) {
    const auto& t = params.get(name);
    putTensor(name, t.shape(), t.data());
  }
  putTensor("stats.mean", {stats.mean.size()}, {stats.mean.data(), static_cast<size_t>(stats.mean.size())});
  putTensor("stats.std", {stats.std.size()}, {stats.std.data(), static_cast<size_t>(stats.std.size())});
  w.put(crc32Of(w.bytes()));
  writeFileAtomic(path, w.bytes());
}

DenoiserModel loadModel(const std::filesystem::path& path) {
  const auto bytes = readFile(path);
  if (bytes.size() < kModelMagic.size() + 4 + 4) {
    throw FormatError("'" + path.string() + "' is too short to be a model file");
  }
  for (size_t i = 0; i < kModelMagic.size(); ++i) {
    if (bytes[i] != static_cast<uint8_t>(kModelMagic[i])) {
      throw FormatError("'" + path.string() + "' is not a model file (bad magic)");
    }
  }
  const std::span<const uint8_t> body(bytes.data(), bytes.size() - 4);
  uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 4);

  ByteReader r(body);
  r.take(kModelMagic.size());
  const auto version = r.get<uint32_t>();
  if (version != kModelVersion) {
    throw FormatError("model file version " + std::to_string(version) + " is not supported");
  }
  if (crc32Of(body) != stored) {
    throw IntegrityError("model file checksum mismatch in '" + path.string() + "'");
  }
  const auto configLength = r.get<uint64_t>();
  if (configLength > r.remaining()) {
    throw IntegrityError("model config block truncated");
  }
  const auto configBytes = r.take(static_cast<size_t>(configLength));
  DenoiserConfig config;
  try {
    config = DenoiserConfig::fromJson(nlohmann::json::parse(configBytes.begin(), configBytes.end()));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("model config block unreadable: ") + e.what());
  }

  NormalizationStats placeholder;
  placeholder.mean = Eigen::VectorXd::Zero(config.motionDim);
  placeholder.std = Eigen::VectorXd::Ones(config.motionDim);
  DenoiserModel model(config, placeholder, 0);

  const auto count = r.get<uint32_t>();
  if (count != model.parameters().count() + 2) {
    throw IntegrityError("model file tensor count disagrees with its config");
  }
  NormalizationStats stats;
  for (uint32_t k = 0; k < count; ++k) {
    const auto name = r.getString();
    const auto rank = r.get<uint32_t>();
    if (rank == 0 || rank > 8) {
      throw IntegrityError("tensor '" + name + "' has invalid rank");
    }
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.get<int64_t>();
      if (d <= 0) {
        throw IntegrityError("tensor '" + name + "' has a non-positive dimension");
      }
    }
    const auto n = static_cast<size_t>(shapeSize(shape));
    const auto raw = r.take(n * sizeof(double));
    std::vector<double> values(n);
    std::memcpy(values.data(), raw.data(), raw.size());
    if (name == "stats.mean" || name == "stats.std") {
      if (shape != Shape{config.motionDim}) {
        throw IntegrityError("normalization stats shape disagrees with config");
      }
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(n));
      (name == "stats.mean" ? stats.mean : stats.std) = v;
      continue;
    }
    if (!model.parameters().contains(name)) {
      throw IntegrityError("model file contains unknown tensor '" + name + "'");
    }
    Tensor target = model.parameters().get(name);
    if (target.shape() != shape) {
      throw IntegrityError(
          "tensor '" + name + "' has shape " + shapeString(shape) + " but the config implies " +
          shapeString(target.shape()));
    }
    std::copy(values.begin(), values.end(), target.mutableData().begin());
  }
  if (r.remaining() != 0) {
    throw IntegrityError("trailing bytes after model tensors");
  }
  if (stats.mean.size() == 0 || stats.std.size() == 0) {
    throw IntegrityError("model file lacks normalization stats");
  }
  model.setStats(std::move(stats));
  return model;
}

} // namespace mdt
