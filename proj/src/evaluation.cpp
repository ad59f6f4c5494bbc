#include "mdt/evaluation.h"

#include "mdt/errors.h"
#include "mdt/pipeline.h"
#include "mdt/random.h"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace mdt {

namespace fs = std::filesystem;

Eigen::MatrixXd SimilarityTransform::apply(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out = scale * points * rotation.transpose();
  out.rowwise() += translation.transpose();
  return out;
}

SimilarityTransform kabschUmeyama(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    throw DimensionError("kabschUmeyama: point sets differ in shape");
  }
  if (source.rows() < 2 || source.cols() < 1) {
    throw ContractError("kabschUmeyama: need at least two points");
  }
  const auto count = static_cast<double>(source.rows());
  const Eigen::VectorXd muSource = source.colwise().mean().transpose();
  const Eigen::VectorXd muTarget = target.colwise().mean().transpose();
  const Eigen::MatrixXd p = source.rowwise() - muSource.transpose();
  const Eigen::MatrixXd q = target.rowwise() - muTarget.transpose();
  const double varSource = p.squaredNorm() / count;
  if (!(varSource > 1e-14 * (1.0 + muSource.squaredNorm()))) {
    throw DegeneracyError("kabschUmeyama: source points are coincident");
  }
  const Eigen::MatrixXd covariance = q.transpose() * p / count;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto dims = source.cols();
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(dims);
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
    signs[dims - 1] = -1.0;
  }
  SimilarityTransform out;
  out.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(signs) / varSource;
  out.translation = muTarget - out.scale * out.rotation * muSource;
  return out;
}

LandmarkSequence LandmarkSequence::subset(const std::vector<int>& rows) const {
  LandmarkSequence out;
  out.frames.reserve(frames.size());
  for (const auto& f : frames) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), f.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
      s.row(static_cast<Eigen::Index>(i)) = f.row(rows[i]);
    }
    out.frames.push_back(std::move(s));
  }
  return out;
}

LmdResult lmd(const LandmarkSequence& generated, const LandmarkSequence& groundTruth) {
  if (generated.frameCount() != groundTruth.frameCount()) {
    throw DimensionError("lmd: frame counts differ");
  }
  if (generated.frameCount() == 0) {
    throw ContractError("lmd: empty sequences");
  }
  LmdResult result;
  double total = 0.0;
  for (int f = 0; f < generated.frameCount(); ++f) {
    const auto& gen = generated.frames[f];
    const auto& gt = groundTruth.frames[f];
    if (gen.rows() != gt.rows() || gen.cols() != gt.cols()) {
      throw DimensionError("lmd: landmark counts differ at frame " + std::to_string(f));
    }
    if (gen == gt) {
      ++result.usedFrames;
      continue;
    }
    SimilarityTransform transform;
    try {
      transform = kabschUmeyama(gen, gt);
    } catch (const DegeneracyError&) {
      ++result.skippedFrames;
      continue;
    }
    const Eigen::MatrixXd aligned = transform.apply(gen);
    total += (aligned - gt).rowwise().norm().mean();
    ++result.usedFrames;
  }
  if (result.usedFrames == 0) {
    throw DegeneracyError("lmd: every frame is degenerate");
  }
  result.value = total / result.usedFrames;
  return result;
}

LandmarkSequence LandmarkBasis::project(const MotionSequence& motion) const {
  if (motion.dim() != kMotionDim) {
    throw DimensionError("landmark projection needs 70-dim motion");
  }
  const auto& pose = layout.poseIndices();
  LandmarkSequence out;
  out.frames.reserve(static_cast<size_t>(motion.frames()));
  for (int i = 0; i < motion.frames(); ++i) {
    const Eigen::VectorXd facial = motion.values.row(i).head(kFacialDim).transpose();
    const Eigen::VectorXd flat = facialMap * facial;
    Eigen::MatrixXd points = offset;
    for (int k = 0; k < kFaceLandmarks; ++k) {
      points(k, 0) += flat[2 * k];
      points(k, 1) += flat[2 * k + 1];
    }
    const double angle = rollGain * motion.values(i, pose[2]);
    SimilarityTransform head;
    head.rotation.resize(2, 2);
    head.rotation << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    head.scale = std::exp(scaleGain * motion.values(i, pose[5]));
    head.translation = translationGain * Eigen::Vector2d(motion.values(i, pose[3]), motion.values(i, pose[4]));
    out.frames.push_back(head.apply(points));
  }
  return out;
}

int LandmarkBasis::facialRank() const {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(facialMap);
  return static_cast<int>(qr.rank());
}

LandmarkBasis makeLandmarkBasis(uint64_t seed, const ParameterLayout& layout) {
  Rng rng = makeRng(seed, 0x6c6d64ULL);
  LandmarkBasis basis;
  basis.layout = layout;
  basis.offset.resize(kFaceLandmarks, 2);
  // Outer face points on an ellipse, mouth points on a small inner ellipse.
  for (int k = 0; k < kFirstMouthLandmark; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kFirstMouthLandmark;
    basis.offset(k, 0) = std::cos(a) + 0.05 * gaussian(rng);
    basis.offset(k, 1) = 1.3 * std::sin(a) + 0.05 * gaussian(rng);
  }
  for (int k = 0; k < kMouthLandmarks; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kMouthLandmarks;
    basis.offset(kFirstMouthLandmark + k, 0) = 0.35 * std::cos(a);
    basis.offset(kFirstMouthLandmark + k, 1) = -0.6 + 0.12 * std::sin(a);
  }
  basis.facialMap = Eigen::MatrixXd::Zero(2 * kFaceLandmarks, kFacialDim);
  for (const int col : layout.mouthIndices()) {
    for (int k = kFirstMouthLandmark; k < kFaceLandmarks; ++k) {
      basis.facialMap(2 * k, col) = 0.05 * gaussian(rng);
      basis.facialMap(2 * k + 1, col) = 0.05 * gaussian(rng);
    }
  }
  for (const int col : layout.expressionIndices()) {
    for (int k = 0; k < kFirstMouthLandmark; ++k) {
      basis.facialMap(2 * k, col) = 0.02 * gaussian(rng);
      basis.facialMap(2 * k + 1, col) = 0.02 * gaussian(rng);
    }
  }
  for (int k = kFirstMouthLandmark; k < kFaceLandmarks; ++k) {
    basis.mouthLandmarks.push_back(k);
  }
  return basis;
}

namespace {

void requireComparable(const MotionSequence& a, const MotionSequence& b) {
  if (a.frames() != b.frames() || a.dim() != b.dim()) {
    throw DimensionError("landmark metrics: generated and ground-truth motion differ in shape");
  }
}

} // namespace

LmdResult fLmd(const MotionSequence& generated, const MotionSequence& groundTruth, const LandmarkBasis& basis) {
  requireComparable(generated, groundTruth);
  return lmd(basis.project(generated), basis.project(groundTruth));
}

LmdResult mLmd(const MotionSequence& generated, const MotionSequence& groundTruth, const LandmarkBasis& basis) {
  requireComparable(generated, groundTruth);
  return lmd(
      basis.project(generated).subset(basis.mouthLandmarks), basis.project(groundTruth).subset(basis.mouthLandmarks));
}

EvaluationReport summarize(std::vector<ClipMetrics> clips) {
  std::sort(clips.begin(), clips.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  EvaluationReport report;
  if (clips.empty()) {
    return report;
  }
  for (const auto& c : clips) {
    report.meanFLmd += c.fLmd;
    report.meanMLmd += c.mLmd;
  }
  report.meanFLmd /= static_cast<double>(clips.size());
  report.meanMLmd /= static_cast<double>(clips.size());
  report.clips = std::move(clips);
  return report;
}

EvaluationReport evaluateRun(const fs::path& generatedDir, const Dataset& groundTruth, const LandmarkBasis& basis) {
  if (!fs::is_directory(generatedDir)) {
    throw NotFoundError("no generated-motion directory at '" + generatedDir.string() + "'");
  }
  std::map<std::string, const Clip*> byId;
  for (const auto& c : groundTruth.clips) {
    byId.emplace(c.id, &c);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(generatedDir)) {
    if (entry.is_regular_file() && entry.path().extension() == kExportExtension) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ClipMetrics> rows;
  std::vector<std::string> unmatched;
  for (const auto& path : files) {
    const auto id = path.stem().string();
    const auto it = byId.find(id);
    if (it == byId.end()) {
      unmatched.push_back(id);
      continue;
    }
    const auto exported = readExport(path);
    const auto& gt = it->second->motion;
    if (exported.motion.frames() > gt.frames()) {
      throw DimensionError("generated clip '" + id + "' is longer than its ground truth");
    }
    const MotionSequence gtPrefix(gt.values.topRows(exported.motion.frames()), gt.fps);
    const auto f = fLmd(exported.motion, gtPrefix, basis);
    const auto m = mLmd(exported.motion, gtPrefix, basis);
    rows.push_back(ClipMetrics{id, exported.motion.frames(), f.value, m.value, f.skippedFrames + m.skippedFrames});
  }
  if (rows.empty()) {
    throw NotFoundError("no generated clips match the ground-truth dataset");
  }
  auto report = summarize(std::move(rows));
  report.unmatched = std::move(unmatched);
  return report;
}

void writeEvaluationReport(const EvaluationReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json rows = nlohmann::json::array();
  std::ostringstream tsv;
  tsv << std::setprecision(17);
  tsv << "id\tframes\tf_lmd\tm_lmd\n";
  for (const auto& c : report.clips) {
    rows.push_back({{"id", c.id}, {"frames", c.frames}, {"f_lmd", c.fLmd}, {"m_lmd", c.mLmd}, {"skipped_frames", c.skippedFrames}});
    tsv << c.id << '\t' << c.frames << '\t' << c.fLmd << '\t' << c.mLmd << '\n';
  }
  const nlohmann::json doc = {
      {"clips", rows},
      {"summary", {{"clips", report.clips.size()}, {"f_lmd", report.meanFLmd}, {"m_lmd", report.meanMLmd}}},
      {"unmatched", report.unmatched},
  };
  std::ofstream(dir / "report.json") << doc.dump(2) << '\n';
  std::ofstream(dir / "report.tsv") << tsv.str();
}

PhonemeCentroids fitPhonemeCentroids(const std::vector<const Clip*>& clips, const ParameterLayout& layout, int vocab) {
  PhonemeCentroids out;
  out.centroids = RowMatrix::Zero(vocab, kMouthDim);
  out.frameCounts.assign(static_cast<size_t>(vocab), 0);
  const auto& mouth = layout.mouthIndices();
  for (const auto* clip : clips) {
    for (int i = 0; i < clip->frames(); ++i) {
      const auto p = clip->phonemes[static_cast<size_t>(i)];
      if (p < 0 || p >= vocab) {
        throw ContractError("centroids: phoneme id outside the vocabulary in clip '" + clip->id + "'");
      }
      for (int j = 0; j < kMouthDim; ++j) {
        out.centroids(p, j) += clip->motion.values(i, mouth[j]);
      }
      ++out.frameCounts[static_cast<size_t>(p)];
    }
  }
  for (int p = 0; p < vocab; ++p) {
    if (out.frameCounts[static_cast<size_t>(p)] > 0) {
      out.centroids.row(p) /= out.frameCounts[static_cast<size_t>(p)];
    }
  }
  return out;
}

double centroidAccuracy(const PhonemeCentroids& centroids, const RowMatrix& lips, const std::vector<int32_t>& phonemes) {
  if (lips.cols() != kMouthDim || lips.rows() != static_cast<Eigen::Index>(phonemes.size())) {
    throw DimensionError("centroid accuracy: need one 13-dim lip row per phoneme");
  }
  if (phonemes.empty()) {
    throw ContractError("centroid accuracy: no frames");
  }
  int correct = 0;
  for (Eigen::Index i = 0; i < lips.rows(); ++i) {
    int best = -1;
    double bestDistance = 0.0;
    for (int p = 0; p < centroids.centroids.rows(); ++p) {
      if (centroids.frameCounts[static_cast<size_t>(p)] == 0) {
        continue;
      }
      const double d = (lips.row(i) - centroids.centroids.row(p)).squaredNorm();
      if (best < 0 || d < bestDistance) {
        best = p;
        bestDistance = d;
      }
    }
    correct += best == phonemes[static_cast<size_t>(i)] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(lips.rows());
}

} // namespace mdt
