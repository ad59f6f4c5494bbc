#include "mdt/dataset.h"

#include "mdt/binary_io.h"
#include "mdt/errors.h"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace mdt {

namespace fs = std::filesystem;

std::string_view splitName(Split split) {
  return split == Split::Train ? "train" : "test";
}

Split parseSplit(std::string_view name) {
  if (name == "train") {
    return Split::Train;
  }
  if (name == "test") {
    return Split::Test;
  }
  throw FormatError("unknown split tag '" + std::string(name) + "'");
}

ConditionBundle Clip::conditions(int begin, int count) const {
  if (begin < 0 || count < 1 || begin + count > frames()) {
    throw ContractError("clip '" + id + "': window out of range");
  }
  ConditionBundle b;
  b.audio = audio.middleRows(begin, count);
  b.phonemes.assign(phonemes.begin() + begin, phonemes.begin() + begin + count);
  b.text = text;
  b.firstFrame = motion.values.row(begin).transpose();
  return b;
}

std::vector<const Clip*> Dataset::split(Split which) const {
  std::vector<const Clip*> out;
  for (const auto& c : clips) {
    if (c.split == which) {
      out.push_back(&c);
    }
  }
  return out;
}

void Dataset::validate() const {
  std::set<std::string> seen;
  for (const auto& c : clips) {
    if (!seen.insert(c.id).second) {
      throw ContractError("dataset: duplicate clip id '" + c.id + "'");
    }
    const auto n = c.frames();
    if (c.motion.dim() != kMotionDim) {
      throw DimensionError("clip '" + c.id + "': motion must have 70 columns");
    }
    if (c.audio.rows() != n || static_cast<int>(c.phonemes.size()) != n) {
      throw DimensionError("clip '" + c.id + "': per-frame arrays disagree on frame count");
    }
    if (c.audio.cols() != dims.audio || c.text.size() != dims.text) {
      throw DimensionError("clip '" + c.id + "': feature widths disagree with dataset dims");
    }
    for (const auto id : c.phonemes) {
      if (id < 0 || id >= dims.vocab) {
        throw ContractError("clip '" + c.id + "': phoneme id outside vocabulary");
      }
    }
  }
}

namespace {

std::vector<uint8_t> floatBytes(const RowMatrix& m) {
  std::vector<uint8_t> bytes(static_cast<size_t>(m.size()) * sizeof(float));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const auto f = static_cast<float>(m.data()[i]);
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  return bytes;
}

RowMatrix floatsFrom(std::span<const uint8_t> bytes, Eigen::Index rows, Eigen::Index cols) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    float f = 0.0F;
    std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
    m.data()[i] = static_cast<double>(f);
  }
  return m;
}

std::vector<uint8_t> intBytes(const std::vector<int32_t>& v) {
  std::vector<uint8_t> bytes(v.size() * sizeof(int32_t));
  std::memcpy(bytes.data(), v.data(), bytes.size());
  return bytes;
}

std::vector<uint8_t> readVerified(const fs::path& path, size_t expectedSize, uint32_t expectedCrc) {
  if (!fs::exists(path)) {
    throw NotFoundError("missing array file '" + path.string() + "'");
  }
  auto bytes = readFile(path);
  if (bytes.size() != expectedSize) {
    throw IntegrityError(
        "'" + path.string() + "' holds " + std::to_string(bytes.size()) + " bytes, expected " +
        std::to_string(expectedSize));
  }
  if (crc32Of(bytes) != expectedCrc) {
    throw IntegrityError("checksum mismatch in '" + path.string() + "'");
  }
  return bytes;
}

RowMatrix textRow(const Eigen::VectorXd& v) {
  return RowMatrix(v.transpose());
}

double toFloatPrecision(double x) {
  return static_cast<double>(static_cast<float>(x));
}

} // namespace

void writeFloatArray(const fs::path& path, const RowMatrix& m) {
  writeFileAtomic(path, floatBytes(m));
}

RowMatrix readFloatArray(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  const auto bytes = readFile(path);
  if (bytes.size() != static_cast<size_t>(rows * cols) * sizeof(float)) {
    throw IntegrityError("'" + path.string() + "' does not hold a " + std::to_string(rows) + "x" + std::to_string(cols) + " float32 array");
  }
  return floatsFrom(bytes, rows, cols);
}

ClipManifest writeClip(const Clip& clip, const fs::path& dir) {
  ClipManifest e;
  e.id = clip.id;
  e.frames = clip.frames();
  e.split = clip.split;
  e.motionFile = clip.id + ".motion.f32";
  e.audioFile = clip.id + ".audio.f32";
  e.phonemeFile = clip.id + ".phonemes.i32";
  e.textFile = clip.id + ".text.f32";
  const auto motion = floatBytes(clip.motion.values);
  const auto audio = floatBytes(clip.audio);
  const auto phonemes = intBytes(clip.phonemes);
  const auto text = floatBytes(textRow(clip.text));
  e.motionCrc = crc32Of(motion);
  e.audioCrc = crc32Of(audio);
  e.phonemeCrc = crc32Of(phonemes);
  e.textCrc = crc32Of(text);
  writeFileAtomic(dir / e.motionFile, motion);
  writeFileAtomic(dir / e.audioFile, audio);
  writeFileAtomic(dir / e.phonemeFile, phonemes);
  writeFileAtomic(dir / e.textFile, text);
  return e;
}

Clip readClip(const ClipManifest& entry, const DatasetDims& dims, double fps, const fs::path& dir) {
  const auto n = static_cast<size_t>(entry.frames);
  Clip c;
  c.id = entry.id;
  c.split = entry.split;
  const auto motion = readVerified(dir / entry.motionFile, n * kMotionDim * sizeof(float), entry.motionCrc);
  const auto audio = readVerified(dir / entry.audioFile, n * static_cast<size_t>(dims.audio) * sizeof(float), entry.audioCrc);
  const auto phonemes = readVerified(dir / entry.phonemeFile, n * sizeof(int32_t), entry.phonemeCrc);
  const auto text = readVerified(dir / entry.textFile, static_cast<size_t>(dims.text) * sizeof(float), entry.textCrc);
  c.motion = MotionSequence(floatsFrom(motion, entry.frames, kMotionDim), fps);
  c.audio = floatsFrom(audio, entry.frames, dims.audio);
  c.phonemes.resize(n);
  std::memcpy(c.phonemes.data(), phonemes.data(), phonemes.size());
  c.text = floatsFrom(text, 1, dims.text).row(0).transpose();
  return c;
}

void writeManifest(const DatasetManifest& manifest, const fs::path& dir) {
  nlohmann::json clips = nlohmann::json::array();
  for (const auto& e : manifest.clips) {
    clips.push_back({
        {"id", e.id},
        {"frames", e.frames},
        {"split", std::string(splitName(e.split))},
        {"files",
         {{"motion", e.motionFile}, {"audio", e.audioFile}, {"phonemes", e.phonemeFile}, {"text", e.textFile}}},
        {"crc32", {{"motion", e.motionCrc}, {"audio", e.audioCrc}, {"phonemes", e.phonemeCrc}, {"text", e.textCrc}}},
    });
  }
  const nlohmann::json doc = {
      {"format", "mdt-dataset"},
      {"version", 1},
      {"fps", manifest.fps},
      {"dims", {{"audio", manifest.dims.audio}, {"text", manifest.dims.text}, {"vocab", manifest.dims.vocab}, {"motion", kMotionDim}}},
      {"layout", {{"mouth_indices", manifest.layout.mouthIndices()}}},
      {"clips", clips},
  };
  const auto text = doc.dump(2) + "\n";
  writeFileAtomic(dir / kManifestName, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
}

DatasetManifest readManifest(const fs::path& dir) {
  const auto path = dir / kManifestName;
  if (!fs::exists(path)) {
    throw NotFoundError("no manifest at '" + path.string() + "'");
  }
  const auto bytes = readFile(path);
  DatasetManifest m;
  try {
    const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (doc.at("format") != "mdt-dataset" || doc.at("version") != 1) {
      throw FormatError("'" + path.string() + "' is not a version-1 dataset manifest");
    }
    m.fps = doc.at("fps").get<double>();
    const auto& dims = doc.at("dims");
    m.dims = DatasetDims{dims.at("audio").get<int>(), dims.at("text").get<int>(), dims.at("vocab").get<int>()};
    if (dims.at("motion").get<int>() != kMotionDim) {
      throw FormatError("manifest declares a motion width other than 70");
    }
    m.layout = ParameterLayout(doc.at("layout").at("mouth_indices").get<std::vector<int>>());
    for (const auto& c : doc.at("clips")) {
      ClipManifest e;
      e.id = c.at("id").get<std::string>();
      e.frames = c.at("frames").get<int>();
      e.split = parseSplit(c.at("split").get<std::string>());
      const auto& files = c.at("files");
      e.motionFile = files.at("motion").get<std::string>();
      e.audioFile = files.at("audio").get<std::string>();
      e.phonemeFile = files.at("phonemes").get<std::string>();
      e.textFile = files.at("text").get<std::string>();
      const auto& crc = c.at("crc32");
      e.motionCrc = crc.at("motion").get<uint32_t>();
      e.audioCrc = crc.at("audio").get<uint32_t>();
      e.phonemeCrc = crc.at("phonemes").get<uint32_t>();
      e.textCrc = crc.at("text").get<uint32_t>();
      if (e.frames < 1) {
        throw FormatError("clip '" + e.id + "' declares no frames");
      }
      m.clips.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
  }
  return m;
}

DatasetManifest writeDataset(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  fs::create_directories(dir);
  DatasetManifest m;
  m.dims = dataset.dims;
  m.fps = dataset.fps;
  m.layout = dataset.layout;
  for (const auto& c : dataset.clips) {
    m.clips.push_back(writeClip(c, dir));
  }
  writeManifest(m, dir);
  return m;
}

Dataset readDataset(const fs::path& dir) {
  const auto m = readManifest(dir);
  Dataset d;
  d.dims = m.dims;
  d.fps = m.fps;
  d.layout = m.layout;
  for (const auto& e : m.clips) {
    d.clips.push_back(readClip(e, m.dims, m.fps, dir));
  }
  d.validate();
  return d;
}

void SyntheticSpec::validate() const {
  if (clips < 2) {
    throw ContractError("synthetic: need at least 2 clips");
  }
  if (frames < 2) {
    throw ContractError("synthetic: need at least 2 frames per clip");
  }
  if (dwellMin < 1 || dwellMax < dwellMin) {
    throw ContractError("synthetic: dwell range must satisfy 1 <= min <= max");
  }
  if (!(lipsStiffness > 0 && expressionScale > 0 && poseScale > 0 && poseInitScale > 0 && audioNoise >= 0)) {
    throw ContractError("synthetic: scales must be positive");
  }
  if (expressionModes < 1 || expressionModes > kExpressionDim) {
    throw ContractError("synthetic: expression modes must lie in [1, 51]");
  }
  if (dims.audio < 1 || dims.text < 1 || dims.vocab < 3) {
    throw ContractError("synthetic: feature dims must be positive and vocab >= 3");
  }
  if (!(trainRatio > 0.0 && trainRatio < 1.0)) {
    throw ContractError("synthetic: train ratio must lie in (0, 1)");
  }
}

SyntheticWorld makeSyntheticWorld(const SyntheticSpec& spec, Rng& rng) {
  SyntheticWorld w;
  w.lipTargets = gaussianMatrix(spec.dims.vocab, kMouthDim, rng);
  w.audioProjection = gaussianMatrix(spec.dims.vocab, spec.dims.audio, rng);
  const int modes = spec.expressionModes;
  w.baseFrequency.resize(modes);
  for (int k = 0; k < modes; ++k) {
    w.baseFrequency[k] = uniformReal(rng, 0.01, 0.04);
  }
  const double textNorm = 1.0 / std::sqrt(static_cast<double>(spec.dims.text));
  w.frequencyMap = 0.005 * textNorm * gaussianMatrix(modes, spec.dims.text, rng);
  w.phaseMap = std::numbers::pi * textNorm * gaussianMatrix(modes, spec.dims.text, rng);
  w.columnMode.resize(kExpressionDim);
  w.columnPhase.resize(kExpressionDim);
  for (int j = 0; j < kExpressionDim; ++j) {
    w.columnMode[j] = j % modes;
    w.columnPhase[j] = uniformReal(rng, -std::numbers::pi, std::numbers::pi);
  }
  return w;
}

std::vector<int32_t> samplePhonemeTrack(const SyntheticSpec& spec, int frames, Rng& rng) {
  std::vector<int32_t> track;
  track.reserve(static_cast<size_t>(frames));
  while (static_cast<int>(track.size()) < frames) {
    const auto id = static_cast<int32_t>(uniformInt(rng, 1, spec.dims.vocab - 1));
    const auto dwell = uniformInt(rng, spec.dwellMin, spec.dwellMax);
    for (int64_t k = 0; k < dwell && static_cast<int>(track.size()) < frames; ++k) {
      track.push_back(id);
    }
  }
  return track;
}

Clip synthesizeClip(
    const SyntheticSpec& spec,
    const SyntheticWorld& world,
    const ParameterLayout& layout,
    std::string id,
    std::vector<int32_t> phonemes,
    Eigen::VectorXd text,
    Rng& rng) {
  const auto n = static_cast<int>(phonemes.size());
  RowMatrix motion = RowMatrix::Zero(n, kMotionDim);

  // Lips: critically damped second-order response toward each phoneme's
  // target, integrated exactly over one-frame steps.
  const double w = spec.lipsStiffness;
  const double decay = std::exp(-w);
  Eigen::VectorXd y = world.lipTargets.row(phonemes[0]).transpose();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(kMouthDim);
  const auto& mouth = layout.mouthIndices();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd target = world.lipTargets.row(phonemes[i]).transpose();
    const Eigen::VectorXd e0 = y - target;
    const Eigen::VectorXd b = v + w * e0;
    y = target + (e0 + b) * decay;
    v = (v - w * b) * decay;
    for (int j = 0; j < kMouthDim; ++j) {
      motion(i, mouth[j]) = y[j];
    }
  }

  // Expression: oscillator frequency and phase are linear in the text embedding.
  const Eigen::VectorXd freq = world.baseFrequency + world.frequencyMap * text;
  const Eigen::VectorXd phase = world.phaseMap * text;
  const auto& expression = layout.expressionIndices();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kExpressionDim; ++j) {
      const int k = world.columnMode[j];
      motion(i, expression[j]) =
          spec.expressionScale * std::sin(2.0 * std::numbers::pi * freq[k] * i + phase[k] + world.columnPhase[j]);
    }
  }

  // Pose: random walk driven by an AR(1) velocity.
  Eigen::VectorXd pose(kPoseDim);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(kPoseDim);
  for (int j = 0; j < kPoseDim; ++j) {
    pose[j] = spec.poseInitScale * gaussian(rng);
  }
  const auto& poseCols = layout.poseIndices();
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      for (int j = 0; j < kPoseDim; ++j) {
        velocity[j] = 0.9 * velocity[j] + spec.poseScale * gaussian(rng);
      }
      pose += velocity;
    }
    for (int j = 0; j < kPoseDim; ++j) {
      motion(i, poseCols[j]) = pose[j];
    }
  }

  RowMatrix audio(n, spec.dims.audio);
  for (int i = 0; i < n; ++i) {
    audio.row(i) = world.audioProjection.row(phonemes[i]);
    for (int j = 0; j < spec.dims.audio; ++j) {
      audio(i, j) += spec.audioNoise * gaussian(rng);
    }
  }

  // Stored on disk as float32; keep the in-memory copy identical.
  motion = motion.unaryExpr(&toFloatPrecision);
  audio = audio.unaryExpr(&toFloatPrecision);
  text = text.unaryExpr(&toFloatPrecision);

  Clip c;
  c.id = std::move(id);
  c.motion = MotionSequence(std::move(motion), spec.fps);
  c.audio = std::move(audio);
  c.phonemes = std::move(phonemes);
  c.text = std::move(text);
  return c;
}

Dataset generateSyntheticDataset(const SyntheticSpec& spec, const ParameterLayout& layout) {
  spec.validate();
  Rng worldRng = makeRng(spec.seed, 1);
  const auto world = makeSyntheticWorld(spec, worldRng);
  Dataset d;
  d.dims = spec.dims;
  d.fps = spec.fps;
  d.layout = layout;
  for (int k = 0; k < spec.clips; ++k) {
    Rng rng = makeRng(spec.seed, 1000 + static_cast<uint64_t>(k));
    char id[32];
    std::snprintf(id, sizeof(id), "clip_%04d", k);
    auto phonemes = samplePhonemeTrack(spec, spec.frames, rng);
    Eigen::VectorXd text(spec.dims.text);
    for (int j = 0; j < spec.dims.text; ++j) {
      text[j] = gaussian(rng);
    }
    d.clips.push_back(synthesizeClip(spec, world, layout, id, std::move(phonemes), std::move(text), rng));
  }
  applySplit(d, spec.trainRatio, spec.seed);
  return d;
}

SplitResult splitDataset(const std::vector<std::string>& ids, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ContractError("split: ratio must lie in (0, 1)");
  }
  const auto trainCount = static_cast<size_t>(std::lround(ratio * static_cast<double>(ids.size())));
  if (trainCount == 0 || trainCount >= ids.size()) {
    throw ContractError("split: ratio leaves one side empty");
  }
  std::vector<std::string> shuffled = ids;
  std::sort(shuffled.begin(), shuffled.end());
  Rng rng = makeRng(seed, 2);
  // Fisher-Yates with our own index draws, so the split does not depend on
  // the standard library's shuffle implementation.
  for (size_t i = shuffled.size(); i > 1; --i) {
    const auto j = static_cast<size_t>(uniformInt(rng, 0, static_cast<int64_t>(i) - 1));
    std::swap(shuffled[i - 1], shuffled[j]);
  }
  SplitResult r;
  r.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(trainCount));
  r.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(trainCount), shuffled.end());
  std::sort(r.train.begin(), r.train.end());
  std::sort(r.test.begin(), r.test.end());
  return r;
}

void applySplit(Dataset& dataset, double ratio, uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& c : dataset.clips) {
    ids.push_back(c.id);
  }
  const auto result = splitDataset(ids, ratio, seed);
  const std::set<std::string> train(result.train.begin(), result.train.end());
  for (auto& c : dataset.clips) {
    c.split = train.contains(c.id) ? Split::Train : Split::Test;
  }
}

} // namespace mdt
