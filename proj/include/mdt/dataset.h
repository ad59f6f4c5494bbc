#pragma once

#include "mdt/conditioning.h"
#include "mdt/motion.h"
#include "mdt/random.h"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mdt {

enum class Split { Train, Test };

std::string_view splitName(Split split);
Split parseSplit(std::string_view name);

// One talking clip: 70-dim motion plus its conditioning signals.
struct Clip {
  std::string id;
  MotionSequence motion;
  RowMatrix audio;
  std::vector<int32_t> phonemes;
  Eigen::VectorXd text;
  Split split = Split::Train;

  [[nodiscard]] int frames() const {
    return motion.frames();
  }
  // Conditions for frames [begin, begin + count); the first frame is the raw
  // 70-dim motion frame at `begin`.
  [[nodiscard]] ConditionBundle conditions(int begin, int count) const;
};

struct DatasetDims {
  int audio = 32;
  int text = 64;
  int vocab = kPhonemeVocab;

  bool operator==(const DatasetDims&) const = default;
};

struct Dataset {
  DatasetDims dims;
  double fps = kDefaultFps;
  ParameterLayout layout;
  std::vector<Clip> clips;

  [[nodiscard]] std::vector<const Clip*> split(Split which) const;
  // Throws if any clip violates the shared dims or per-frame length contract.
  void validate() const;
};

// Manifest entry as stored on disk.
struct ClipManifest {
  std::string id;
  int frames = 0;
  Split split = Split::Train;
  std::string motionFile;
  std::string audioFile;
  std::string phonemeFile;
  std::string textFile;
  uint32_t motionCrc = 0;
  uint32_t audioCrc = 0;
  uint32_t phonemeCrc = 0;
  uint32_t textCrc = 0;
};

struct DatasetManifest {
  DatasetDims dims;
  double fps = kDefaultFps;
  ParameterLayout layout;
  std::vector<ClipManifest> clips;
};

inline constexpr const char* kManifestName = "manifest.json";

// Raw arrays: row-major little-endian float32 (phonemes: int32).
void writeFloatArray(const std::filesystem::path& path, const RowMatrix& m);
RowMatrix readFloatArray(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);

// Writes the clip's four array files into `dir` and returns its manifest entry.
ClipManifest writeClip(const Clip& clip, const std::filesystem::path& dir);
// Reads and verifies one clip. Missing files raise NotFoundError; size or
// checksum disagreements raise IntegrityError.
Clip readClip(const ClipManifest& entry, const DatasetDims& dims, double fps, const std::filesystem::path& dir);

DatasetManifest readManifest(const std::filesystem::path& dir);
void writeManifest(const DatasetManifest& manifest, const std::filesystem::path& dir);

// Whole-dataset helpers over `dir/manifest.json`.
DatasetManifest writeDataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset readDataset(const std::filesystem::path& dir);

// Parameters of the synthetic corpus. Phonemes drive the lips through a
// critically damped response; the text embedding sets the frequencies and
// phases of a few slow oscillators, and every expression column is a
// sinusoid following one of them at a fixed phase offset; pose is a
// smoothed random walk.
struct SyntheticSpec {
  int clips = 200;
  int frames = 96;
  uint64_t seed = 1;
  int dwellMin = 3;
  int dwellMax = 10;
  // Natural frequency of the lip response, per frame.
  double lipsStiffness = 1.0;
  double expressionScale = 0.5;
  // Expression columns share this many underlying oscillators.
  int expressionModes = 6;
  double poseScale = 0.02;
  double poseInitScale = 1.0;
  double audioNoise = 0.1;
  DatasetDims dims;
  double fps = kDefaultFps;
  double trainRatio = 0.8;

  void validate() const;
};

// Fixed per-dataset random structure shared by every clip.
struct SyntheticWorld {
  RowMatrix lipTargets;       // vocab × 13
  RowMatrix audioProjection;  // vocab × audio
  Eigen::VectorXd baseFrequency;  // modes
  RowMatrix frequencyMap;         // modes × text
  RowMatrix phaseMap;             // modes × text
  std::vector<int> columnMode;    // 51, oscillator driving each expression column
  Eigen::VectorXd columnPhase;    // 51, fixed offset of each column from its oscillator
};

SyntheticWorld makeSyntheticWorld(const SyntheticSpec& spec, Rng& rng);

// Random phoneme string (ids in [1, vocab)) expanded to per-frame tokens with
// dwell times drawn from [dwellMin, dwellMax].
std::vector<int32_t> samplePhonemeTrack(const SyntheticSpec& spec, int frames, Rng& rng);

// Builds one clip from given phonemes and text embedding; pose and audio
// noise come from `rng`.
Clip synthesizeClip(
    const SyntheticSpec& spec,
    const SyntheticWorld& world,
    const ParameterLayout& layout,
    std::string id,
    std::vector<int32_t> phonemes,
    Eigen::VectorXd text,
    Rng& rng);

Dataset generateSyntheticDataset(const SyntheticSpec& spec, const ParameterLayout& layout = ParameterLayout());

// Seeded shuffle of clip ids; round(ratio·count) go to train. Both sides must
// be non-empty.
struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> test;
};
SplitResult splitDataset(const std::vector<std::string>& ids, double ratio, uint64_t seed);
// Applies the split in place to the clips' split tags.
void applySplit(Dataset& dataset, double ratio, uint64_t seed);

} // namespace mdt
