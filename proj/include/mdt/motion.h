#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mdt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kFacialDim = 64;
inline constexpr int kPoseDim = 6;
inline constexpr int kMotionDim = kFacialDim + kPoseDim;
inline constexpr int kMouthDim = 13;
inline constexpr int kExpressionDim = kFacialDim - kMouthDim;
inline constexpr double kDefaultFps = 25.0;

// The three separately trained parameter groups.
enum class MotionKind { Lips, Expression, Pose };

inline constexpr std::array<MotionKind, 3> kAllKinds = {
    MotionKind::Lips,
    MotionKind::Expression,
    MotionKind::Pose};

std::string_view kindName(MotionKind kind);
MotionKind parseKind(std::string_view name);
int kindDim(MotionKind kind);

// Which of the 70 per-frame parameters belong to the mouth, the rest of the
// face, and the rigid head pose. Mouth and expression indices partition
// [0, 64); pose is always [64, 70).
class ParameterLayout {
 public:
  // Default mouth block is [0, 13).
  ParameterLayout();
  explicit ParameterLayout(std::vector<int> mouthIndices);

  [[nodiscard]] const std::vector<int>& mouthIndices() const {
    return mouth_;
  }
  [[nodiscard]] const std::vector<int>& expressionIndices() const {
    return expression_;
  }
  [[nodiscard]] const std::vector<int>& poseIndices() const {
    return pose_;
  }
  [[nodiscard]] const std::vector<int>& columns(MotionKind kind) const;

  bool operator==(const ParameterLayout&) const = default;

 private:
  std::vector<int> mouth_;
  std::vector<int> expression_;
  std::vector<int> pose_;
};

// N×d motion parameters, one row per frame. fps is carried along but never
// enters any computation.
struct MotionSequence {
  RowMatrix values;
  double fps = kDefaultFps;

  MotionSequence() = default;
  explicit MotionSequence(RowMatrix v, double framesPerSecond = kDefaultFps);

  [[nodiscard]] int frames() const {
    return static_cast<int>(values.rows());
  }
  [[nodiscard]] int dim() const {
    return static_cast<int>(values.cols());
  }
};

MotionSequence sliceMotion(const MotionSequence& full, MotionKind kind, const ParameterLayout& layout);

MotionSequence mergeMotion(
    const MotionSequence& lips,
    const MotionSequence& expression,
    const MotionSequence& pose,
    const ParameterLayout& layout);

// Per-column z-scoring statistics. Entries of `std` are at least kStdFloor.
struct NormalizationStats {
  static constexpr double kStdFloor = 1e-8;

  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  [[nodiscard]] int dim() const {
    return static_cast<int>(mean.size());
  }
  [[nodiscard]] NormalizationStats slice(MotionKind kind, const ParameterLayout& layout) const;
  void validate() const;
};

// Column statistics over every frame of the given 70-dim sequences. Columns
// with smaller spread than the floor get the floor as their std.
NormalizationStats computeStats(std::span<const MotionSequence> sequences);

MotionSequence normalize(const MotionSequence& x, const NormalizationStats& stats);
MotionSequence denormalize(const MotionSequence& x, const NormalizationStats& stats);
Eigen::VectorXd normalizeFrame(const Eigen::VectorXd& frame, const NormalizationStats& stats);

} // namespace mdt
