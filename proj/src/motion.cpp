#include "mdt/motion.h"

#include "mdt/errors.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mdt {

std::string_view kindName(MotionKind kind) {
  switch (kind) {
    case MotionKind::Lips:
      return "lips";
    case MotionKind::Expression:
      return "expression";
    case MotionKind::Pose:
      return "pose";
  }
  return "unknown";
}

MotionKind parseKind(std::string_view name) {
  for (const auto kind : kAllKinds) {
    if (kindName(kind) == name) {
      return kind;
    }
  }
  throw ContractError("unknown motion kind '" + std::string(name) + "'");
}

int kindDim(MotionKind kind) {
  switch (kind) {
    case MotionKind::Lips:
      return kMouthDim;
    case MotionKind::Expression:
      return kExpressionDim;
    case MotionKind::Pose:
      return kPoseDim;
  }
  return 0;
}

ParameterLayout::ParameterLayout() : ParameterLayout([] {
  std::vector<int> m(kMouthDim);
  std::iota(m.begin(), m.end(), 0);
  return m;
}()) {}

ParameterLayout::ParameterLayout(std::vector<int> mouthIndices) : mouth_(std::move(mouthIndices)) {
  if (mouth_.size() != kMouthDim) {
    throw ContractError("layout: expected 13 mouth indices, got " + std::to_string(mouth_.size()));
  }
  std::vector<bool> used(kFacialDim, false);
  for (const int idx : mouth_) {
    if (idx < 0 || idx >= kFacialDim) {
      throw ContractError("layout: mouth index " + std::to_string(idx) + " outside [0,64)");
    }
    if (used[idx]) {
      throw ContractError("layout: duplicate mouth index " + std::to_string(idx));
    }
    used[idx] = true;
  }
  for (int i = 0; i < kFacialDim; ++i) {
    if (!used[i]) {
      expression_.push_back(i);
    }
  }
  for (int i = kFacialDim; i < kMotionDim; ++i) {
    pose_.push_back(i);
  }
}

const std::vector<int>& ParameterLayout::columns(MotionKind kind) const {
  switch (kind) {
    case MotionKind::Lips:
      return mouth_;
    case MotionKind::Expression:
      return expression_;
    case MotionKind::Pose:
      return pose_;
  }
  return pose_;
}

MotionSequence::MotionSequence(RowMatrix v, double framesPerSecond)
    : values(std::move(v)), fps(framesPerSecond) {
  const auto d = values.cols();
  if (d != kMouthDim && d != kExpressionDim && d != kPoseDim && d != kMotionDim) {
    throw DimensionError("motion dimension must be one of 6/13/51/70, got " + std::to_string(d));
  }
  if (!values.allFinite()) {
    throw NumericalError("motion sequence contains non-finite values");
  }
}

MotionSequence sliceMotion(const MotionSequence& full, MotionKind kind, const ParameterLayout& layout) {
  if (full.dim() != kMotionDim) {
    throw DimensionError("sliceMotion: expected 70 columns, got " + std::to_string(full.dim()));
  }
  const auto& cols = layout.columns(kind);
  RowMatrix out(full.frames(), static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = full.values.col(cols[j]);
  }
  return MotionSequence(std::move(out), full.fps);
}

MotionSequence mergeMotion(
    const MotionSequence& lips,
    const MotionSequence& expression,
    const MotionSequence& pose,
    const ParameterLayout& layout) {
  if (lips.frames() != expression.frames() || lips.frames() != pose.frames()) {
    throw ContractError("mergeMotion: frame counts differ");
  }
  RowMatrix out(lips.frames(), kMotionDim);
  const std::array<const MotionSequence*, 3> parts = {&lips, &expression, &pose};
  for (size_t k = 0; k < kAllKinds.size(); ++k) {
    const auto& cols = layout.columns(kAllKinds[k]);
    if (parts[k]->dim() != static_cast<int>(cols.size())) {
      throw DimensionError(
          "mergeMotion: " + std::string(kindName(kAllKinds[k])) + " part has " +
          std::to_string(parts[k]->dim()) + " columns");
    }
    for (size_t j = 0; j < cols.size(); ++j) {
      out.col(cols[j]) = parts[k]->values.col(static_cast<Eigen::Index>(j));
    }
  }
  return MotionSequence(std::move(out), lips.fps);
}

NormalizationStats NormalizationStats::slice(MotionKind kind, const ParameterLayout& layout) const {
  if (dim() != kMotionDim) {
    throw DimensionError("stats slice requires 70-dim statistics");
  }
  const auto& cols = layout.columns(kind);
  NormalizationStats out;
  out.mean.resize(static_cast<Eigen::Index>(cols.size()));
  out.std.resize(static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    out.mean[static_cast<Eigen::Index>(j)] = mean[cols[j]];
    out.std[static_cast<Eigen::Index>(j)] = std[cols[j]];
  }
  return out;
}

void NormalizationStats::validate() const {
  if (mean.size() != std.size() || mean.size() == 0) {
    throw DimensionError("normalization stats: mean/std sizes differ");
  }
  for (Eigen::Index i = 0; i < std.size(); ++i) {
    if (!(std[i] >= kStdFloor)) {
      throw ContractError("normalization stats: std below floor at column " + std::to_string(i));
    }
  }
}

NormalizationStats computeStats(std::span<const MotionSequence> sequences) {
  if (sequences.empty()) {
    throw ContractError("computeStats: no sequences");
  }
  const auto d = sequences.front().values.cols();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  double count = 0.0;
  for (const auto& s : sequences) {
    if (s.values.cols() != d) {
      throw DimensionError("computeStats: inconsistent dimensions");
    }
    total += s.values.colwise().sum().transpose();
    count += static_cast<double>(s.frames());
  }
  NormalizationStats stats;
  stats.mean = total / count;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
  for (const auto& s : sequences) {
    sq += (s.values.rowwise() - stats.mean.transpose()).array().square().matrix().colwise().sum().transpose();
  }
  stats.std = (sq / count).array().sqrt().max(NormalizationStats::kStdFloor).matrix();
  return stats;
}

namespace {

void requireStatsMatch(const MotionSequence& x, const NormalizationStats& stats) {
  stats.validate();
  if (x.dim() != stats.dim()) {
    throw DimensionError(
        "normalization: sequence has " + std::to_string(x.dim()) + " columns, stats have " +
        std::to_string(stats.dim()));
  }
}

} // namespace

MotionSequence normalize(const MotionSequence& x, const NormalizationStats& stats) {
  requireStatsMatch(x, stats);
  RowMatrix out = (x.values.rowwise() - stats.mean.transpose()).array().rowwise() /
      stats.std.transpose().array();
  return MotionSequence(std::move(out), x.fps);
}

MotionSequence denormalize(const MotionSequence& x, const NormalizationStats& stats) {
  requireStatsMatch(x, stats);
  RowMatrix out = (x.values.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() +
      stats.mean.transpose();
  return MotionSequence(std::move(out), x.fps);
}

Eigen::VectorXd normalizeFrame(const Eigen::VectorXd& frame, const NormalizationStats& stats) {
  stats.validate();
  if (frame.size() != stats.mean.size()) {
    throw DimensionError("normalizeFrame: dimension mismatch");
  }
  return ((frame - stats.mean).array() / stats.std.array()).matrix();
}

} // namespace mdt
