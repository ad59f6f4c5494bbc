#include "support.h"

#include "mdt/binary_io.h"
#include "mdt/dataset.h"
#include "mdt/errors.h"
#include "mdt/evaluation.h"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

using namespace mdt;
using testing::TempDir;

namespace {

SyntheticSpec smallSpec() {
  SyntheticSpec spec;
  spec.clips = 10;
  spec.frames = 40;
  spec.seed = 5;
  return spec;
}

bool sameClip(const Clip& a, const Clip& b) {
  return a.id == b.id && a.split == b.split && (a.motion.values.array() == b.motion.values.array()).all() &&
         (a.audio.array() == b.audio.array()).all() && a.phonemes == b.phonemes && a.text == b.text;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.array() - a.mean();
  const Eigen::VectorXd y = b.array() - b.mean();
  return x.dot(y) / std::sqrt(x.squaredNorm() * y.squaredNorm());
}

} // namespace

TEST_CASE("dataset write/read round trip is bit-exact") {
  TempDir dir("ds");
  const auto data = generateSyntheticDataset(smallSpec());
  data.validate();
  writeDataset(data, dir.path());
  const auto back = readDataset(dir.path());
  CHECK(back.dims == data.dims);
  CHECK(back.fps == data.fps);
  CHECK(back.layout == data.layout);
  REQUIRE(back.clips.size() == data.clips.size());
  for (size_t i = 0; i < data.clips.size(); ++i) CHECK(sameClip(back.clips[i], data.clips[i]));
}

TEST_CASE("custom layouts survive the manifest") {
  TempDir dir("layout");
  std::vector<int> mouth;
  for (int i = 0; i < 13; ++i) mouth.push_back(63 - i);
  const ParameterLayout layout(mouth);
  const auto data = generateSyntheticDataset(smallSpec(), layout);
  writeDataset(data, dir.path());
  CHECK(readDataset(dir.path()).layout == layout);
}

TEST_CASE("damaged datasets are rejected") {
  TempDir dir("bad");
  const auto data = generateSyntheticDataset(smallSpec());
  const auto manifest = writeDataset(data, dir.path());
  const auto motionFile = dir.path() / manifest.clips[0].motionFile;

  SUBCASE("truncated array") {
    auto bytes = readFile(motionFile);
    bytes.resize(bytes.size() - 4);
    writeFileAtomic(motionFile, bytes);
    CHECK_THROWS_AS(readDataset(dir.path()), IntegrityError);
  }
  SUBCASE("flipped bit") {
    auto bytes = readFile(motionFile);
    bytes[17] ^= 0x04;
    writeFileAtomic(motionFile, bytes);
    CHECK_THROWS_AS(readDataset(dir.path()), IntegrityError);
  }
  SUBCASE("absent array file") {
    std::filesystem::remove(dir.path() / manifest.clips[3].phonemeFile);
    CHECK_THROWS_AS(readDataset(dir.path()), NotFoundError);
  }
  SUBCASE("absent manifest") {
    std::filesystem::remove(dir.path() / kManifestName);
    CHECK_THROWS_AS(readDataset(dir.path()), NotFoundError);
  }
  SUBCASE("garbled manifest") {
    std::ofstream(dir.path() / kManifestName) << "{ not json";
    CHECK_THROWS_AS(readDataset(dir.path()), FormatError);
  }
}

TEST_CASE("same seed gives identical files") {
  TempDir a("seed_a");
  TempDir b("seed_b");
  writeDataset(generateSyntheticDataset(smallSpec()), a.path());
  writeDataset(generateSyntheticDataset(smallSpec()), b.path());
  for (const auto& entry : std::filesystem::directory_iterator(a.path())) {
    CHECK(readFile(entry.path()) == readFile(b.path() / entry.path().filename()));
  }
  auto other = smallSpec();
  other.seed = 6;
  CHECK_FALSE(sameClip(generateSyntheticDataset(other).clips[0], generateSyntheticDataset(smallSpec()).clips[0]));
}

TEST_CASE("per-frame arrays share their length and ids stay in the vocabulary") {
  const auto data = generateSyntheticDataset(smallSpec());
  for (const auto& c : data.clips) {
    CHECK(c.frames() == 40);
    CHECK(c.audio.rows() == 40);
    CHECK(c.phonemes.size() == 40);
    for (const auto p : c.phonemes) CHECK((p >= 1 && p < kPhonemeVocab));
  }
}

TEST_CASE("lips settle within held phonemes") {
  const auto spec = SyntheticSpec();
  const auto data = generateSyntheticDataset(spec);
  // Frames after a phoneme has been held for dwellMin frames, grouped per run.
  double within = 0.0;
  std::vector<Eigen::RowVectorXd> means;
  for (const auto& c : data.clips) {
    for (int i = 0; i < c.frames();) {
      int j = i;
      while (j < c.frames() && c.phonemes[j] == c.phonemes[i]) ++j;
      const int settled = j - i - spec.dwellMin;
      if (settled >= 2) {
        const RowMatrix seg = c.motion.values.block(i + spec.dwellMin, 0, settled, kMouthDim);
        const Eigen::RowVectorXd m = seg.colwise().mean();
        within += (seg.rowwise() - m).squaredNorm() / settled;
        means.push_back(m);
      }
      i = j;
    }
  }
  REQUIRE(means.size() > 100);
  within /= static_cast<double>(means.size());
  Eigen::RowVectorXd grand = Eigen::RowVectorXd::Zero(kMouthDim);
  for (const auto& m : means) grand += m / static_cast<double>(means.size());
  double across = 0.0;
  for (const auto& m : means) across += (m - grand).squaredNorm() / static_cast<double>(means.size());
  CHECK(within < 0.1 * across);
}

TEST_CASE("ground-truth lips identify their phonemes") {
  const auto data = generateSyntheticDataset(SyntheticSpec());
  const auto centroids = fitPhonemeCentroids(data.split(Split::Train), data.layout, data.dims.vocab);
  int correct = 0;
  int total = 0;
  for (const auto* c : data.split(Split::Test)) {
    const auto lips = sliceMotion(c->motion, MotionKind::Lips, data.layout).values;
    correct += static_cast<int>(std::lround(centroidAccuracy(centroids, lips, c->phonemes) * c->frames()));
    total += c->frames();
  }
  CHECK(static_cast<double>(correct) / total > 0.8);
}

TEST_CASE("phonemes drive lips, text drives expression") {
  const SyntheticSpec spec;
  const ParameterLayout layout;
  Rng worldRng = makeRng(spec.seed, 1);
  const auto world = makeSyntheticWorld(spec, worldRng);
  Rng rng = makeRng(42);
  const auto phonemes = samplePhonemeTrack(spec, spec.frames, rng);
  const Eigen::VectorXd textA = gaussianMatrix(spec.dims.text, 1, rng).col(0);
  const Eigen::VectorXd textB = gaussianMatrix(spec.dims.text, 1, rng).col(0);
  Rng ra = makeRng(1);
  Rng rb = makeRng(2);
  const auto a = synthesizeClip(spec, world, layout, "a", phonemes, textA, ra);
  const auto b = synthesizeClip(spec, world, layout, "b", phonemes, textB, rb);
  const auto lipsA = sliceMotion(a.motion, MotionKind::Lips, layout).values;
  const auto lipsB = sliceMotion(b.motion, MotionKind::Lips, layout).values;
  const Eigen::Map<const Eigen::VectorXd> flatA(lipsA.data(), lipsA.size());
  const Eigen::Map<const Eigen::VectorXd> flatB(lipsB.data(), lipsB.size());
  CHECK(correlation(flatA, flatB) > 0.95);
  const auto exprA = sliceMotion(a.motion, MotionKind::Expression, layout).values;
  const auto exprB = sliceMotion(b.motion, MotionKind::Expression, layout).values;
  CHECK((exprA - exprB).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("splits") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("c" + std::to_string(i));
  const auto s = splitDataset(ids, 0.5, 3);
  CHECK(s.train.size() == 5);
  CHECK(s.test.size() == 5);
  std::set<std::string> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
  const auto again = splitDataset(ids, 0.5, 3);
  CHECK(again.train == s.train);
  CHECK(splitDataset(ids, 0.5, 4).train != s.train);
  CHECK_THROWS_AS(splitDataset(ids, 0.01, 3), ContractError);
  CHECK_THROWS_AS(splitDataset(ids, 1.0, 3), ContractError);
}

TEST_CASE("synthetic spec validation") {
  auto spec = smallSpec();
  spec.clips = 0;
  CHECK_THROWS_AS(spec.validate(), ContractError);
  spec = smallSpec();
  spec.dwellMin = 5;
  spec.dwellMax = 4;
  CHECK_THROWS_AS(spec.validate(), ContractError);
}
