#pragma once

#include "mdt/conditioning.h"
#include "mdt/denoiser.h"
#include "mdt/motion.h"

#include <filesystem>
#include <utility>
#include <vector>

namespace mdt {

inline constexpr const char* kExportExtension = ".mdtx";

enum class HeadPoseMode { Generated, Frozen };

struct KindModels {
  const DenoiserModel* lips = nullptr;
  const DenoiserModel* expression = nullptr;
  const DenoiserModel* pose = nullptr;

  [[nodiscard]] const DenoiserModel& get(MotionKind kind) const;
};

// `conditions.firstFrame` is the raw 70-dim identity frame the clip starts
// from; the per-frame signals must cover at least totalFrames.
struct GenerationRequest {
  ConditionBundle conditions;
  int chunkFrames = 32;
  int totalFrames = 32;
  uint64_t seed = 1;
  HeadPoseMode headPose = HeadPoseMode::Generated;
};

// Norm of the jump across a chunk boundary, per parameter group.
struct SeamDeviation {
  double lips = 0.0;
  double expression = 0.0;
  double pose = 0.0;
};

struct GenerationResult {
  MotionSequence motion;
  std::vector<std::pair<int, int>> chunks;       // (begin, count), tiling [0, totalFrames)
  std::vector<Eigen::VectorXd> chunkFirstFrames; // raw 70-dim first-frame condition of each chunk
  std::vector<SeamDeviation> seams;              // one per boundary between consecutive chunks
};

// Recursive generation: each chunk is sampled by the three models from
// noise, conditioned on the previous chunk's last frame (the identity frame
// for the first chunk). Chunks do not overlap; the last one may be shorter.
GenerationResult generateTalkingMotion(const KindModels& models, const GenerationRequest& request, const ParameterLayout& layout);

// Pose columns of every frame replaced by those of frame 1.
MotionSequence freezeHeadPose(const MotionSequence& motion, const ParameterLayout& layout);

struct ExportedMotion {
  MotionSequence motion;
  ParameterLayout layout;
};

// Renderer input: magic "MDTX", version, fps, frame count, column count,
// the 13 mouth indices, then frames×70 float32 values (little-endian).
void exportForRenderer(const MotionSequence& motion, const ParameterLayout& layout, const std::filesystem::path& path);
ExportedMotion readExport(const std::filesystem::path& path);

} // namespace mdt
