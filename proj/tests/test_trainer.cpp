#include "model_checks.h"
#include "support.h"

#include "mdt/binary_io.h"
#include "mdt/dataset.h"
#include "mdt/errors.h"

#include <doctest.h>

using namespace mdt;
using namespace testing;

namespace {

Dataset smallDataset() {
  SyntheticSpec spec;
  spec.clips = 6;
  spec.frames = 24;
  spec.seed = 3;
  spec.dims.audio = 8;
  spec.dims.text = 8;
  return generateSyntheticDataset(spec);
}

NormalizationStats statsOf(const std::vector<const Clip*>& clips) {
  std::vector<MotionSequence> seqs;
  for (const auto* c : clips) seqs.push_back(c->motion);
  return computeStats(seqs);
}

TrainConfig quickConfig(MotionKind kind) {
  TrainConfig c = TrainConfig::desk(kind);
  c.model = tinyConfig(kind);
  c.model.maxFrames = 32;
  c.steps = 4;
  c.batchSize = 2;
  c.window = 8;
  return c;
}

} // namespace

TEST_CASE("loss composition examples") {
  Rng rng = makeRng(1);
  for (const auto kind : kAllKinds) {
    const RowMatrix x0 = gaussianMatrix(5, kindDim(kind), rng);
    const auto terms = composeLoss(kind, x0, x0, kLossWeight);
    CHECK(terms.total == 0.0);
  }

  const RowMatrix lips = gaussianMatrix(7, 13, rng);
  CHECK(composeLoss(MotionKind::Lips, lips, RowMatrix(lips.array() + 1.0), kLossWeight).total == doctest::Approx(6.0).epsilon(1e-15));

  // Pose prediction exact on frame 1: L_first vanishes, leaving 6·MSE.
  const RowMatrix pose = gaussianMatrix(6, 6, rng);
  RowMatrix pred = pose;
  pred.bottomRows(5) += gaussianMatrix(5, 6, rng);
  const double m = diffusionLoss(pose, pred);
  const auto terms = composeLoss(MotionKind::Pose, pose, pred, kLossWeight);
  CHECK(terms.firstFrame == 0.0);
  CHECK(std::abs(terms.total - 6.0 * m) < 1e-12);
}

TEST_CASE("tensor and matrix loss compositions agree") {
  Rng rng = makeRng(2);
  for (const auto kind : kAllKinds) {
    const RowMatrix x0 = gaussianMatrix(6, kindDim(kind), rng);
    const RowMatrix pred = gaussianMatrix(6, kindDim(kind), rng);
    const auto a = composeLoss(kind, x0, pred, kLossWeight);
    const auto b = composeLoss(kind, toTensor(x0), toTensor(pred), kLossWeight);
    CHECK(std::abs(a.total - b.total.item()) < 1e-12);
    CHECK(b.firstFrame.defined() == (kind == MotionKind::Pose));
  }
}

TEST_CASE("training windows") {
  const auto data = smallDataset();
  const Clip& clip = data.clips[0];
  Rng rng = makeRng(3);

  const auto full = sampleTrainingWindow(clip, clip.frames(), rng);
  CHECK(full.begin == 0);
  CHECK((full.motion.array() == clip.motion.values.array()).all());
  CHECK(full.conditions.firstFrame == clip.motion.values.row(0).transpose());

  const auto w = sampleTrainingWindow(clip, 10, rng);
  CHECK(w.motion.rows() == 10);
  CHECK(w.conditions.audio.rows() == 10);
  CHECK(w.conditions.frames() == 10);
  CHECK(w.conditions.firstFrame == clip.motion.values.row(w.begin).transpose());
  CHECK_THROWS_AS(sampleTrainingWindow(clip, clip.frames() + 1, rng), ContractError);

  // Window starts are uniform over the 15 valid offsets.
  const int starts = clip.frames() - 10 + 1;
  const int draws = 10000;
  std::vector<int> counts(static_cast<size_t>(starts), 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<size_t>(sampleTrainingWindow(clip, 10, rng).begin)];
  const double expected = static_cast<double>(draws) / starts;
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 14 degrees of freedom: mean 14, sd sqrt(28).
  CHECK(chi2 < 14.0 + 3.0 * std::sqrt(28.0));
}

TEST_CASE("prepared windows are sliced and normalized") {
  const auto data = smallDataset();
  const auto stats = statsOf(data.split(Split::Train));
  Rng rng = makeRng(4);
  const auto w = sampleTrainingWindow(data.clips[1], 8, rng);
  const auto pose = prepareWindow(w, MotionKind::Pose, data.layout, stats);
  CHECK(pose.x0.cols() == 6);
  const auto poseStats = stats.slice(MotionKind::Pose, data.layout);
  for (int j = 0; j < 6; ++j) {
    CHECK(pose.x0(0, j) == doctest::Approx((w.motion(0, 64 + j) - poseStats.mean[j]) / poseStats.std[j]));
    CHECK(pose.conditions.firstFrame[j] == pose.x0(0, j));
  }
}

TEST_CASE("identical seeds give bit-identical checkpoints") {
  const auto data = smallDataset();
  const auto train = data.split(Split::Train);
  const auto stats = statsOf(train);
  TempDir dir("train");
  for (const auto kind : kAllKinds) {
    const auto config = quickConfig(kind);
    const auto a = trainModel(train, data.layout, stats, config);
    const auto b = trainModel(train, data.layout, stats, config);
    saveModel(a.model, dir.path() / "a.mdtm");
    saveModel(b.model, dir.path() / "b.mdtm");
    CHECK(readFile(dir.path() / "a.mdtm") == readFile(dir.path() / "b.mdtm"));
    CHECK(a.report.steps.size() == 4);
    CHECK(a.model.config().motionDim == kindDim(kind));
  }
}

TEST_CASE("pose loss includes the first-frame term") {
  const auto data = smallDataset();
  const auto train = data.split(Split::Train);
  auto config = quickConfig(MotionKind::Pose);
  config.steps = 6;
  const auto r = trainModel(train, data.layout, statsOf(train), config);
  for (const auto& s : r.report.steps) {
    CHECK(s.loss >= s.diffusionTerm);
    CHECK(s.firstFrameTerm > 0.0);
    CHECK(std::abs(s.loss - s.diffusionTerm - s.firstFrameTerm) < 1e-12);
  }
  const auto lips = trainModel(train, data.layout, statsOf(train), quickConfig(MotionKind::Lips));
  for (const auto& s : lips.report.steps) CHECK(s.firstFrameTerm == 0.0);
}

TEST_CASE("checkpoints are written on schedule") {
  const auto data = smallDataset();
  const auto train = data.split(Split::Train);
  TempDir dir("ckpt");
  auto config = quickConfig(MotionKind::Lips);
  config.checkpointEvery = 2;
  config.checkpointDir = dir.path();
  const auto r = trainModel(train, data.layout, statsOf(train), config);
  REQUIRE(r.report.checkpoints.size() == 2);
  CHECK(loadModel(r.report.checkpoints[1]).config() == config.model);
}

TEST_CASE("training errors") {
  const auto data = smallDataset();
  const auto train = data.split(Split::Train);
  const auto stats = statsOf(train);
  CHECK_THROWS_AS(trainModel({}, data.layout, stats, quickConfig(MotionKind::Lips)), ContractError);

  auto tooLong = quickConfig(MotionKind::Lips);
  tooLong.window = 30;
  CHECK_THROWS_AS(trainModel(train, data.layout, stats, tooLong), ContractError);

  Clip blowup = *train[0];
  blowup.motion.values.leftCols(13).array() = 1e300;
  const std::vector<const Clip*> bad{&blowup};
  try {
    trainModel(bad, data.layout, stats, quickConfig(MotionKind::Lips));
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}
