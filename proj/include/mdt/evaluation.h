#pragma once

#include "mdt/dataset.h"
#include "mdt/motion.h"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace mdt {

inline constexpr int kFaceLandmarks = 68;
inline constexpr int kMouthLandmarks = 20;
inline constexpr int kFirstMouthLandmark = 48;

// x ↦ scale·R·x + translation, with R a proper rotation.
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;

  // Applies the transform to each row of an L×D point set.
  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
};

// Least-squares similarity transform mapping `source` onto `target` (both
// L×D, any D ≥ 1). Uses the SVD of the centered cross-covariance with
// Umeyama's sign correction, so det(R) = +1 even when the best orthogonal
// fit is a reflection. Throws DegeneracyError if the source has no spread.
SimilarityTransform kabschUmeyama(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target);

// N frames of L×2 landmark coordinates.
struct LandmarkSequence {
  std::vector<Eigen::MatrixXd> frames;

  [[nodiscard]] int frameCount() const {
    return static_cast<int>(frames.size());
  }
  [[nodiscard]] int points() const {
    return frames.empty() ? 0 : static_cast<int>(frames.front().rows());
  }
  // Keeps only the given landmark rows in every frame.
  [[nodiscard]] LandmarkSequence subset(const std::vector<int>& rows) const;
};

struct LmdResult {
  double value = 0.0;
  int usedFrames = 0;
  int skippedFrames = 0;
};

// Mean landmark distance. Each generated frame is aligned to its ground
// truth frame with kabschUmeyama, then Euclidean distances are averaged over
// landmarks and frames. Frames whose generated landmarks are degenerate are
// skipped; if all are, DegeneracyError is thrown.
LmdResult lmd(const LandmarkSequence& generated, const LandmarkSequence& groundTruth);

// Stand-in for rendering plus landmark detection: facial parameters move
// landmarks linearly around a template face, and the head pose acts as a
// 2-D similarity transform of the whole face (roll → rotation, tx/ty →
// translation, tz → log-scale). Yaw and pitch have no 2-D similarity
// equivalent and do not move the landmarks.
struct LandmarkBasis {
  Eigen::MatrixXd offset;     // 68×2 template face
  Eigen::MatrixXd facialMap;  // (68·2)×64, row 2k+c is coordinate c of landmark k
  std::vector<int> mouthLandmarks;
  double rollGain = 0.2;
  double translationGain = 0.1;
  double scaleGain = 0.05;
  ParameterLayout layout;

  [[nodiscard]] LandmarkSequence project(const MotionSequence& motion) const;
  // Column rank of facialMap (64 when every facial parameter is observable).
  [[nodiscard]] int facialRank() const;
};

// Mouth parameters load only on the 20 mouth landmarks and the remaining
// facial parameters only on the other 48, so expression changes leave M-LMD
// untouched.
LandmarkBasis makeLandmarkBasis(uint64_t seed, const ParameterLayout& layout = ParameterLayout());

LmdResult fLmd(const MotionSequence& generated, const MotionSequence& groundTruth, const LandmarkBasis& basis);
LmdResult mLmd(const MotionSequence& generated, const MotionSequence& groundTruth, const LandmarkBasis& basis);

struct ClipMetrics {
  std::string id;
  int frames = 0;
  double fLmd = 0.0;
  double mLmd = 0.0;
  int skippedFrames = 0;
};

struct EvaluationReport {
  std::vector<ClipMetrics> clips; // sorted by id
  double meanFLmd = 0.0;
  double meanMLmd = 0.0;
  std::vector<std::string> unmatched;
};

// Scores each exported motion file in `generatedDir` (named <clip id>.mdtx)
// against the dataset clip of the same id over the generated frame range.
EvaluationReport evaluateRun(const std::filesystem::path& generatedDir, const Dataset& groundTruth, const LandmarkBasis& basis);

EvaluationReport summarize(std::vector<ClipMetrics> clips);

// report.json (per-clip rows plus summary) and report.tsv (plot-ready table).
void writeEvaluationReport(const EvaluationReport& report, const std::filesystem::path& dir);

// Mean lip vector of every phoneme seen in the given clips.
struct PhonemeCentroids {
  RowMatrix centroids;          // vocab × 13
  std::vector<int> frameCounts; // frames per phoneme; 0 means unseen
};

PhonemeCentroids fitPhonemeCentroids(const std::vector<const Clip*>& clips, const ParameterLayout& layout, int vocab);

// Fraction of frames whose 13-dim lip vector lies nearest the centroid of
// the phoneme it was conditioned on. Unseen phonemes are never predicted.
double centroidAccuracy(const PhonemeCentroids& centroids, const RowMatrix& lips, const std::vector<int32_t>& phonemes);

} // namespace mdt
