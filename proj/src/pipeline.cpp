#include "mdt/pipeline.h"

#include "mdt/binary_io.h"
#include "mdt/errors.h"

#include <array>
#include <cmath>

namespace mdt {

namespace {

constexpr std::array<char, 4> kExportMagic = {'M', 'D', 'T', 'X'};
constexpr uint32_t kExportVersion = 1;

double groupJump(const Eigen::RowVectorXd& delta, const std::vector<int>& cols) {
  double sq = 0.0;
  for (const int c : cols) {
    sq += delta[c] * delta[c];
  }
  return std::sqrt(sq);
}

Eigen::VectorXd selectColumns(const Eigen::VectorXd& frame, const std::vector<int>& cols) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = frame[cols[j]];
  }
  return out;
}

} // namespace

const DenoiserModel& KindModels::get(MotionKind kind) const {
  const DenoiserModel* m = kind == MotionKind::Lips ? lips : kind == MotionKind::Expression ? expression : pose;
  if (m == nullptr) {
    throw ContractError("generation: missing " + std::string(kindName(kind)) + " model");
  }
  if (m->config().kind != kind) {
    throw ContractError("generation: model given for " + std::string(kindName(kind)) + " was trained for another kind");
  }
  return *m;
}

GenerationResult generateTalkingMotion(const KindModels& models, const GenerationRequest& request, const ParameterLayout& layout) {
  if (request.totalFrames < 1) {
    throw ContractError("generation: total frames must be at least 1");
  }
  if (request.chunkFrames < 2) {
    throw ContractError("generation: chunk length must be at least 2");
  }
  if (request.conditions.frames() < request.totalFrames) {
    throw ContractError(
        "generation: conditions cover " + std::to_string(request.conditions.frames()) + " frames, " +
        std::to_string(request.totalFrames) + " requested");
  }
  if (request.conditions.firstFrame.size() != kMotionDim) {
    throw DimensionError("generation: identity frame must have 70 entries");
  }
  for (const auto kind : kAllKinds) {
    (void)models.get(kind);
  }

  GenerationResult result;
  RowMatrix motion(request.totalFrames, kMotionDim);
  Eigen::VectorXd previous = request.conditions.firstFrame;
  int chunkIndex = 0;
  for (int begin = 0; begin < request.totalFrames; begin += request.chunkFrames, ++chunkIndex) {
    const int count = std::min(request.chunkFrames, request.totalFrames - begin);
    const ConditionBundle window = request.conditions.window(begin, count);
    std::array<MotionSequence, 3> parts;
    for (size_t k = 0; k < kAllKinds.size(); ++k) {
      const auto kind = kAllKinds[k];
      const auto& model = models.get(kind);
      ConditionBundle bundle = window;
      bundle.firstFrame = normalizeFrame(selectColumns(previous, layout.columns(kind)), model.stats());
      Rng rng = makeRng(request.seed, static_cast<uint64_t>(chunkIndex) * kAllKinds.size() + k);
      const auto normalized = sampleSequence(model, bundle, model.config().schedule(), count, rng);
      parts[k] = denormalize(normalized, model.stats());
    }
    const auto merged = mergeMotion(parts[0], parts[1], parts[2], layout);
    motion.middleRows(begin, count) = merged.values;
    result.chunks.emplace_back(begin, count);
    result.chunkFirstFrames.push_back(previous);
    previous = merged.values.row(count - 1).transpose();
  }
  result.motion = MotionSequence(std::move(motion));
  if (request.headPose == HeadPoseMode::Frozen) {
    result.motion = freezeHeadPose(result.motion, layout);
  }
  for (size_t c = 1; c < result.chunks.size(); ++c) {
    const int boundary = result.chunks[c].first;
    const Eigen::RowVectorXd delta = result.motion.values.row(boundary) - result.motion.values.row(boundary - 1);
    result.seams.push_back(SeamDeviation{
        groupJump(delta, layout.mouthIndices()),
        groupJump(delta, layout.expressionIndices()),
        groupJump(delta, layout.poseIndices())});
  }
  return result;
}

MotionSequence freezeHeadPose(const MotionSequence& motion, const ParameterLayout& layout) {
  if (motion.dim() != kMotionDim) {
    throw DimensionError("freezeHeadPose: expected 70 columns, got " + std::to_string(motion.dim()));
  }
  MotionSequence out = motion;
  for (const int c : layout.poseIndices()) {
    out.values.col(c).setConstant(motion.values(0, c));
  }
  return out;
}

void exportForRenderer(const MotionSequence& motion, const ParameterLayout& layout, const std::filesystem::path& path) {
  if (motion.dim() != kMotionDim) {
    throw DimensionError("export: expected 70 columns, got " + std::to_string(motion.dim()));
  }
  if (motion.frames() < 1) {
    throw ContractError("export: empty motion sequence");
  }
  ByteWriter w;
  for (const char c : kExportMagic) {
    w.put(static_cast<uint8_t>(c));
  }
  w.put(kExportVersion);
  w.put(static_cast<float>(motion.fps));
  w.put(static_cast<uint32_t>(motion.frames()));
  w.put(static_cast<uint32_t>(kMotionDim));
  for (const int idx : layout.mouthIndices()) {
    w.put(static_cast<uint32_t>(idx));
  }
  for (Eigen::Index i = 0; i < motion.values.size(); ++i) {
    w.put(static_cast<float>(motion.values.data()[i]));
  }
  writeFileAtomic(path, w.bytes());
}

ExportedMotion readExport(const std::filesystem::path& path) {
  const auto bytes = readFile(path);
  ByteReader r(bytes);
  try {
    for (const char c : kExportMagic) {
      if (r.get<uint8_t>() != static_cast<uint8_t>(c)) {
        throw FormatError("'" + path.string() + "' is not a motion export (bad magic)");
      }
    }
  } catch (const IntegrityError&) {
    throw FormatError("'" + path.string() + "' is too short to be a motion export");
  }
  if (r.get<uint32_t>() != kExportVersion) {
    throw FormatError("unsupported motion export version in '" + path.string() + "'");
  }
  const auto fps = static_cast<double>(r.get<float>());
  const auto frames = r.get<uint32_t>();
  const auto cols = r.get<uint32_t>();
  if (cols != kMotionDim || frames == 0) {
    throw IntegrityError("motion export header declares " + std::to_string(frames) + "x" + std::to_string(cols));
  }
  std::vector<int> mouth(kMouthDim);
  for (auto& m : mouth) {
    m = static_cast<int>(r.get<uint32_t>());
  }
  if (r.remaining() != static_cast<size_t>(frames) * kMotionDim * sizeof(float)) {
    throw IntegrityError("motion export body does not match its header in '" + path.string() + "'");
  }
  RowMatrix values(frames, kMotionDim);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values.data()[i] = static_cast<double>(r.get<float>());
  }
  return ExportedMotion{MotionSequence(std::move(values), fps), ParameterLayout(std::move(mouth))};
}

} // namespace mdt
