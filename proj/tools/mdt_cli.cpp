#include "mdt/dataset.h"
#include "mdt/denoiser.h"
#include "mdt/errors.h"
#include "mdt/evaluation.h"
#include "mdt/pipeline.h"
#include "mdt/trainer.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag combinations that parse but make no sense; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path defaultOut(const std::string& leaf) {
  const char* env = std::getenv("MDT_OUT_DIR");
  return fs::path(env != nullptr && *env != '\0' ? env : "mdt_out") / leaf;
}

struct GenDataArgs {
  mdt::SyntheticSpec spec;
  fs::path out;
};

struct TrainArgs {
  std::string kind;
  fs::path data;
  fs::path out;
  fs::path log;
  std::string preset = "desk";
  std::optional<int> steps;
  std::optional<int> batch;
  std::optional<int> window;
  std::optional<double> lr;
  std::optional<int> diffusionSteps;
  uint64_t seed = 1;
  bool unconditional = false;
  int checkpointEvery = 0;
  bool quiet = false;
};

struct GenerateArgs {
  fs::path data;
  fs::path lips;
  fs::path expression;
  fs::path pose;
  fs::path out;
  std::string split = "test";
  int chunk = 32;
  std::optional<int> totalFrames;
  uint64_t seed = 1;
  bool noHeadPose = false;
};

struct EvalArgs {
  fs::path data;
  fs::path gen;
  fs::path out;
  std::string split = "test";
  uint64_t basisSeed = 1;
};

int runGenData(const GenDataArgs& a) {
  a.spec.validate();
  const auto dataset = mdt::generateSyntheticDataset(a.spec);
  mdt::writeDataset(dataset, a.out);
  std::cout << (a.out / mdt::kManifestName).string() << '\n';
  return 0;
}

int runTrain(const TrainArgs& a) {
  const auto kind = mdt::parseKind(a.kind);
  auto config = a.preset == "paper" ? mdt::TrainConfig::paper(kind) : mdt::TrainConfig::desk(kind);
  if (a.steps) config.steps = *a.steps;
  if (a.batch) config.batchSize = *a.batch;
  if (a.window) config.window = *a.window;
  if (a.lr) config.learningRate = *a.lr;
  if (a.diffusionSteps) {
    config.model.diffusionSteps = *a.diffusionSteps;
    const auto scaled = mdt::makeScaledSchedule(*a.diffusionSteps);
    config.model.betaStart = scaled.betaStart();
    config.model.betaEnd = scaled.betaEnd();
  }
  config.seed = a.seed;
  config.model.unconditional = a.unconditional;
  config.checkpointEvery = a.checkpointEvery;
  try {
    config.validate();
  } catch (const mdt::ContractError& e) {
    throw UsageError(e.what());
  }

  const auto dataset = mdt::readDataset(a.data);
  const auto train = dataset.split(mdt::Split::Train);
  if (train.empty()) {
    throw mdt::ContractError("dataset has no training clips");
  }
  std::vector<mdt::MotionSequence> seqs;
  for (const auto* c : train) {
    seqs.push_back(c->motion);
  }
  const auto stats = mdt::computeStats(seqs);
  config.model.audioDim = dataset.dims.audio;
  config.model.textDim = dataset.dims.text;
  config.model.vocab = dataset.dims.vocab;

  if (a.out.has_parent_path()) {
    fs::create_directories(a.out.parent_path());
  }
  config.checkpointDir = a.out.has_parent_path() ? a.out.parent_path() : fs::path(".");
  const auto logPath = a.log.empty() ? fs::path(a.out.string() + ".log.jsonl") : a.log;
  std::ofstream log(logPath);
  if (!log) {
    throw mdt::NotFoundError("cannot open training log '" + logPath.string() + "'");
  }
  const auto result = mdt::trainModel(train, dataset.layout, stats, config, [&](const mdt::TrainStepRecord& r) {
    log << json{{"step", r.step}, {"loss", r.loss}, {"l_diff", r.diffusionTerm}, {"l_first", r.firstFrameTerm}, {"wall_ms", r.wallMs}}.dump()
        << '\n';
    if (!a.quiet && (r.step % 100 == 0 || r.step == config.steps)) {
      std::cerr << "step " << r.step << " loss " << r.loss << '\n';
    }
  });
  mdt::saveModel(result.model, a.out);
  std::cout << json{
                   {"checkpoint", a.out.string()},
                   {"kind", std::string(mdt::kindName(kind))},
                   {"d", config.model.motionDim},
                   {"steps", config.steps},
                   {"initial_loss", result.report.initialAverage},
                   {"final_loss", result.report.finalAverage},
                   {"wall_seconds", result.report.wallSeconds}}
                   .dump()
            << '\n';
  return 0;
}

int runGenerate(const GenerateArgs& a) {
  if (a.chunk < 2) {
    throw UsageError("--chunk must be at least 2");
  }
  const auto dataset = mdt::readDataset(a.data);
  const auto clips = dataset.split(mdt::parseSplit(a.split));
  if (clips.empty()) {
    throw mdt::ContractError("no clips in the '" + a.split + "' split");
  }
  for (const auto* c : clips) {
    if (a.totalFrames && *a.totalFrames > c->frames()) {
      throw UsageError(
          "--total-frames " + std::to_string(*a.totalFrames) + " exceeds the " + std::to_string(c->frames()) +
          " condition frames of clip '" + c->id + "'");
    }
  }
  const auto lips = mdt::loadModel(a.lips);
  const auto expression = mdt::loadModel(a.expression);
  const auto pose = mdt::loadModel(a.pose);
  const mdt::KindModels models{&lips, &expression, &pose};
  fs::create_directories(a.out);
  for (const auto* c : clips) {
    mdt::GenerationRequest req;
    req.conditions = c->conditions(0, c->frames());
    req.chunkFrames = a.chunk;
    req.totalFrames = a.totalFrames.value_or(c->frames());
    req.seed = a.seed;
    req.headPose = a.noHeadPose ? mdt::HeadPoseMode::Frozen : mdt::HeadPoseMode::Generated;
    auto result = mdt::generateTalkingMotion(models, req, dataset.layout);
    result.motion.fps = dataset.fps;
    mdt::exportForRenderer(result.motion, dataset.layout, a.out / (c->id + mdt::kExportExtension));
  }
  std::cout << "wrote " << clips.size() << " clips to " << a.out.string() << '\n';
  return 0;
}

int runEval(const EvalArgs& a) {
  auto dataset = mdt::readDataset(a.data);
  const auto basis = mdt::makeLandmarkBasis(a.basisSeed, dataset.layout);
  const auto report = mdt::evaluateRun(a.gen, dataset, basis);
  mdt::writeEvaluationReport(report, a.out);
  std::cout << json{
                   {"clips", report.clips.size()},
                   {"f_lmd", report.meanFLmd},
                   {"m_lmd", report.meanMLmd},
                   {"unmatched", report.unmatched.size()},
                   {"report", (a.out / "report.json").string()}}
                   .dump()
            << '\n';
  return 0;
}

int runInspect(const fs::path& path) {
  json out;
  if (fs::is_directory(path)) {
    const auto m = mdt::readManifest(path);
    int train = 0;
    for (const auto& c : m.clips) {
      train += c.split == mdt::Split::Train ? 1 : 0;
    }
    out = {{"type", "dataset"}, {"clips", m.clips.size()}, {"train", train}, {"test", m.clips.size() - train}, {"fps", m.fps},
           {"audio_dim", m.dims.audio}, {"text_dim", m.dims.text}, {"vocab", m.dims.vocab}};
  } else if (path.extension() == mdt::kExportExtension) {
    const auto e = mdt::readExport(path);
    out = {{"type", "export"}, {"frames", e.motion.frames()}, {"dim", e.motion.dim()}, {"fps", e.motion.fps},
           {"mouth_indices", e.layout.mouthIndices()}};
  } else {
    const auto model = mdt::loadModel(path);
    out = {{"type", "model"}, {"config", model.config().toJson()}, {"parameters", model.parameters().totalSize()}};
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional motion diffusion for talking-face 3DMM sequences"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* genData = app.add_subcommand("gen-data", "Write a synthetic dataset");
  genData->add_option("--clips", gd.spec.clips)->check(CLI::PositiveNumber);
  genData->add_option("--frames", gd.spec.frames)->check(CLI::Range(2, 100000));
  genData->add_option("--seed", gd.spec.seed);
  genData->add_option("--train-ratio", gd.spec.trainRatio)->check(CLI::Range(0.0, 1.0));
  genData->add_option("--audio-dim", gd.spec.dims.audio)->check(CLI::PositiveNumber);
  genData->add_option("--text-dim", gd.spec.dims.text)->check(CLI::PositiveNumber);
  genData->add_option("--out", gd.out);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train one kind model");
  train->add_option("--kind", tr.kind)->required()->check(CLI::IsMember({"lips", "expression", "pose"}));
  train->add_option("--data", tr.data)->required();
  train->add_option("--out", tr.out);
  train->add_option("--log", tr.log, "JSONL loss log (default: <out>.log.jsonl)");
  train->add_option("--preset", tr.preset)->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--steps", tr.steps)->check(CLI::PositiveNumber);
  train->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  train->add_option("--window", tr.window)->check(CLI::Range(2, 100000));
  train->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  train->add_option("--diffusion-steps", tr.diffusionSteps)->check(CLI::PositiveNumber);
  train->add_option("--seed", tr.seed);
  train->add_option("--checkpoint-every", tr.checkpointEvery)->check(CLI::NonNegativeNumber);
  train->add_flag("--unconditional", tr.unconditional, "Replace all conditions with zeros");
  train->add_flag("--quiet", tr.quiet);

  GenerateArgs ge;
  auto* generate = app.add_subcommand("generate", "Generate motion for every clip of a split");
  generate->add_option("--data", ge.data)->required();
  generate->add_option("--lips", ge.lips)->required();
  generate->add_option("--expression", ge.expression)->required();
  generate->add_option("--pose", ge.pose)->required();
  generate->add_option("--out", ge.out);
  generate->add_option("--split", ge.split)->check(CLI::IsMember({"train", "test"}));
  generate->add_option("--chunk", ge.chunk);
  generate->add_option("--total-frames", ge.totalFrames)->check(CLI::PositiveNumber);
  generate->add_option("--seed", ge.seed);
  generate->add_flag("--no-head-pose", ge.noHeadPose, "Freeze pose at its first-frame values");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Landmark metrics of generated motion against ground truth");
  eval->add_option("--data", ev.data)->required();
  eval->add_option("--gen", ev.gen)->required();
  eval->add_option("--out", ev.out);
  eval->add_option("--basis-seed", ev.basisSeed);

  fs::path inspectPath;
  auto* inspect = app.add_subcommand("inspect", "Describe a dataset, model or export");
  inspect->add_option("path", inspectPath)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*genData) {
      if (gd.out.empty()) gd.out = defaultOut("data");
      return runGenData(gd);
    }
    if (*train) {
      if (tr.out.empty()) tr.out = defaultOut(tr.kind + ".mdtm");
      return runTrain(tr);
    }
    if (*generate) {
      if (ge.out.empty()) ge.out = defaultOut("generated");
      return runGenerate(ge);
    }
    if (*eval) {
      if (ev.out.empty()) ev.out = defaultOut("eval");
      return runEval(ev);
    }
    return runInspect(inspectPath);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
