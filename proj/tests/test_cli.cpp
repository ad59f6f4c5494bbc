#include "support.h"

#include "mdt/binary_io.h"
#include "mdt/dataset.h"
#include "mdt/denoiser.h"
#include "mdt/pipeline.h"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sys/wait.h>

using namespace mdt;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& cwd, const std::string& env = "") {
  const std::string cmd = "cd '" + cwd.string() + "' && " + env + " '" MDT_CLI_PATH "' " + args + " >cli_stdout.txt 2>cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// One small dataset and three briefly trained models shared by the cases below.
struct Workspace {
  TempDir dir{"cli"};
  Workspace() {
    REQUIRE(run("gen-data --clips 6 --frames 24 --seed 3 --out data", dir.path()) == 0);
    for (const std::string kind : {"lips", "expression", "pose"}) {
      REQUIRE(run("train --kind " + kind + " --data data --out models/" + kind + ".mdtm --steps 3 --batch 2 --window 8 --diffusion-steps 6 --quiet", dir.path()) == 0);
    }
  }
  [[nodiscard]] std::string models() const {
    return "--lips models/lips.mdtm --expression models/expression.mdtm --pose models/pose.mdtm";
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

} // namespace

TEST_CASE("gen-data") {
  TempDir dir("gendata");
  CHECK(run("gen-data --clips 10 --frames 64 --seed 7 --out D", dir.path()) == 0);
  CHECK(readManifest(dir.path() / "D").clips.size() == 10);
  CHECK(run("gen-data --clips 10 --frames 64 --seed 7 --out E", dir.path()) == 0);
  const auto a = nlohmann::json::parse(std::ifstream(dir.path() / "D" / kManifestName));
  const auto b = nlohmann::json::parse(std::ifstream(dir.path() / "E" / kManifestName));
  CHECK(a == b);
  CHECK(run("gen-data --clips 0 --out F", dir.path()) == 2);
  CHECK_FALSE(fs::exists(dir.path() / "F"));
  CHECK(run("gen-data --frames abc", dir.path()) == 2);
  CHECK(run("", dir.path()) == 2);
}

TEST_CASE("default output directory comes from the environment") {
  TempDir dir("envout");
  CHECK(run("gen-data --clips 4 --frames 16", dir.path(), "MDT_OUT_DIR=envdir") == 0);
  CHECK(fs::exists(dir.path() / "envdir" / "data" / kManifestName));
}

TEST_CASE("train") {
  auto& w = workspace();
  const auto lips = loadModel(w.dir.path() / "models" / "lips.mdtm");
  CHECK(lips.config().motionDim == 13);
  CHECK(lips.config().kind == MotionKind::Lips);

  const auto log = lines(w.dir.path() / "models" / "pose.mdtm.log.jsonl");
  REQUIRE(log.size() == 3);
  for (const auto& l : log) {
    const auto j = nlohmann::json::parse(l);
    CHECK(j.contains("l_diff"));
    CHECK(j.contains("l_first"));
    CHECK(j["l_first"].get<double>() > 0.0);
    CHECK(j["loss"].get<double>() == doctest::Approx(j["l_diff"].get<double>() + j["l_first"].get<double>()));
  }

  CHECK(run("train --kind mouth --data data --out x.mdtm", w.dir.path()) == 2);
  CHECK(run("train --kind lips --data nowhere --out x.mdtm --steps 1", w.dir.path()) == 1);
  CHECK(run("train --kind lips --data data --out x.mdtm --window 40", w.dir.path()) == 1);
}

TEST_CASE("generate") {
  auto& w = workspace();
  CHECK(run("generate --data data " + w.models() + " --out gen_a --chunk 8 --seed 5", w.dir.path()) == 0);
  CHECK(run("generate --data data " + w.models() + " --out gen_b --chunk 8 --seed 5", w.dir.path()) == 0);
  CHECK(run("generate --data data " + w.models() + " --out gen_c --chunk 8 --seed 5 --no-head-pose", w.dir.path()) == 0);
  size_t files = 0;
  for (const auto& e : fs::directory_iterator(w.dir.path() / "gen_a")) {
    ++files;
    const auto name = e.path().filename();
    CHECK(readFile(e.path()) == readFile(w.dir.path() / "gen_b" / name));
    const auto frozen = readExport(w.dir.path() / "gen_c" / name);
    const auto moving = readExport(e.path());
    CHECK(frozen.motion.frames() == 24);
    for (const int c : frozen.layout.poseIndices()) {
      CHECK((frozen.motion.values.col(c).array() == frozen.motion.values(0, c)).all());
    }
    CHECK((frozen.motion.values.leftCols(64).array() == moving.motion.values.leftCols(64).array()).all());
  }
  CHECK(files == readDataset(w.dir.path() / "data").split(Split::Test).size());

  CHECK(run("generate --data data " + w.models() + " --out gen_d --total-frames 25", w.dir.path()) == 2);
  CHECK(run("generate --data data " + w.models() + " --out gen_e --total-frames 10", w.dir.path()) == 0);
  CHECK(readExport(w.dir.path() / "gen_e" / fs::directory_iterator(w.dir.path() / "gen_e")->path().filename()).motion.frames() == 10);
  CHECK(run("generate --data data --lips models/none.mdtm --expression models/expression.mdtm --pose models/pose.mdtm --out gen_f", w.dir.path()) == 1);
}

TEST_CASE("eval") {
  auto& w = workspace();
  const auto data = readDataset(w.dir.path() / "data");
  fs::create_directories(w.dir.path() / "gt");
  for (const auto* c : data.split(Split::Test)) {
    exportForRenderer(c->motion, data.layout, w.dir.path() / "gt" / (c->id + kExportExtension));
  }
  CHECK(run("eval --data data --gen gt --out report_gt", w.dir.path()) == 0);
  const auto summary = nlohmann::json::parse(lines(w.dir.path() / "cli_stdout.txt").at(0));
  CHECK(summary["f_lmd"].get<double>() == 0.0);
  CHECK(summary["m_lmd"].get<double>() == 0.0);
  const auto report = nlohmann::json::parse(std::ifstream(w.dir.path() / "report_gt" / "report.json"));
  CHECK(report["clips"].size() == data.split(Split::Test).size());
  CHECK(lines(w.dir.path() / "report_gt" / "report.tsv").size() == data.split(Split::Test).size() + 1);

  CHECK(run("eval --data data --gen missing --out r", w.dir.path()) == 1);
  fs::create_directories(w.dir.path() / "empty");
  CHECK(run("eval --data data --gen empty --out r", w.dir.path()) == 1);
}

TEST_CASE("inspect") {
  auto& w = workspace();
  CHECK(run("inspect models/pose.mdtm", w.dir.path()) == 0);
  std::ifstream out(w.dir.path() / "cli_stdout.txt");
  const auto j = nlohmann::json::parse(out);
  CHECK(j["config"]["motion_dim"] == 6);
  CHECK(run("inspect data", w.dir.path()) == 0);
  CHECK(run("inspect nothing_here.mdtm", w.dir.path()) == 1);
}
