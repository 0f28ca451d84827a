#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "roomsense/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workdir {
  fs::path dir = fs::temp_directory_path() / ("roomsense-cli-" + std::to_string(::getpid()));
  Workdir() {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
} const work;

const fs::path& workdir() { return work.dir; }

std::string at(const std::string& rel) { return (workdir() / rel).string(); }

// Runs the CLI inside the work directory; returns its exit code.
int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + workdir().string() + "' && " + env + (env.empty() ? "" : " ") + "'" +
                          ROOMSENSE_CLI + "' " + args + " > last.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
  std::ifstream in(at("last.log"));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json without_meta(json j) {
  if (j.is_object()) {
    j.erase("meta");
    for (auto& [k, v] : j.items()) v = without_meta(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_meta(v);
  }
  return j;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// synth -> clean -> time split -> features -> windows -> holdout -> train -> eval
bool staged_pipeline() {
  static const bool ok = [] {
    const std::string scenario = std::string(ROOMSENSE_SOURCE_DIR) + "/scenarios/bundled.json";
    const char* stages[] = {
        "synth --out synth --scenario ",
        "clean --out clean --input synth/frame.csv",
        "split --out time --input clean/clean.csv",
        "select-features --out features --input time/train.csv",
        "sample --out trainwin --input time/train.csv --features features/features.json",
        "sample --out testwin --input time/test.csv --features features/features.json --context 0",
        "split --out hold --mode holdout --input trainwin/windows",
        "train --out fcn --train hold/train --valid hold/valid",
        "eval --out eval --model fcn/model --test testwin/windows",
    };
    for (std::string s : stages) {
      if (s.rfind("synth", 0) == 0) s += "'" + scenario + "'";
      if (run_cli(s) != 0) {
        MESSAGE(s << "\n" << last_log());
        return false;
      }
    }
    return true;
  }();
  return ok;
}

}  // namespace

TEST_CASE("staged pipeline reproduces the synthetic regression") {
  REQUIRE(staged_pipeline());
  const json eval = roomsense::io::read_json(at("eval/evaluation.json"));
  for (const auto& c : eval.at("metrics").at("classes")) CHECK(c.at("f1").get<double>() >= 0.90);
  CHECK(eval.contains("meta"));
  for (const char* dir : {"synth", "clean", "time", "features", "trainwin", "testwin", "hold", "fcn", "eval"})
    CHECK(fs::exists(at(std::string(dir) + "/config.json")));
  for (const char* f : {"classifier.json", "member0.json", "member0.bin", "scaler.json", "inputs.json"})
    CHECK(fs::exists(at(std::string("fcn/model/") + f)));
}

TEST_CASE("re-running a resolved config reproduces the artifacts") {
  REQUIRE(staged_pipeline());
  REQUIRE(run_cli("train --config fcn/config.json --out fcn_again") == 0);
  for (const char* f : {"history.json"})
    CHECK(without_meta(roomsense::io::read_json(at(std::string("fcn/") + f))) ==
          without_meta(roomsense::io::read_json(at(std::string("fcn_again/") + f))));
  CHECK(slurp(at("fcn/model/member0.bin")) == slurp(at("fcn_again/model/member0.bin")));
  CHECK(slurp(at("fcn/model/member0.json")) == slurp(at("fcn_again/model/member0.json")));
  REQUIRE(run_cli("eval --config eval/config.json --out eval_again") == 0);
  CHECK(without_meta(roomsense::io::read_json(at("eval/evaluation.json"))) ==
        without_meta(roomsense::io::read_json(at("eval_again/evaluation.json"))));
}

TEST_CASE("dry run with an unknown key exits 1 and writes nothing") {
  std::ofstream(at("bad.json")) << R"({"input": "x.csv", "bogus": 1})";
  CHECK(run_cli("clean --config bad.json --dry-run --out dry") == 1);
  CHECK(last_log().find("bogus") != std::string::npos);
  CHECK(!fs::exists(at("dry")));
  CHECK(run_cli("train --train a --set fit.bogus=2 --dry-run --out dry") == 1);
  CHECK(last_log().find("fit.bogus") != std::string::npos);
  CHECK(run_cli("train --no-such-flag 1") == 1);
  CHECK(run_cli("train --train a --threshold 2 --dry-run --out dry") == 1);
  CHECK(last_log().find("threshold") != std::string::npos);
  CHECK(!fs::exists(at("dry")));
  CHECK(run_cli("train --train a --dry-run --out dry") == 0);
  CHECK(!fs::exists(at("dry")));
}

TEST_CASE("eval rejects a checkpoint whose architecture fingerprint differs") {
  REQUIRE(staged_pipeline());
  CHECK(run_cli(R"(eval --out ev_lstm --model fcn/model --test testwin/windows --architecture '{"kind":"lstm","config":{"in_channels":10}}')") == 2);
  CHECK(last_log().find("fingerprint") != std::string::npos);
  const json arch = roomsense::io::read_json(at("fcn/model/member0.json")).at("architecture");
  std::ofstream(at("arch.json")) << arch.dump();
  CHECK(run_cli("eval --out ev_same --model fcn/model --test testwin/windows --architecture arch.json") == 0);
}

TEST_CASE("seed flag overrides nested seeds and ROOMSENSE_OUT picks the directory") {
  CHECK(run_cli("synth --seed 3 --set scenario.duration=300", "ROOMSENSE_OUT=envout") == 0);
  const json cfg = roomsense::io::read_json(at("envout/config.json"));
  CHECK(cfg.at("scenario").at("seed") == 3);
  CHECK(fs::exists(at("envout/frame.csv")));
  CHECK(run_cli("synth --seed 3 --set scenario.duration=300 --out flagout", "ROOMSENSE_OUT=envout2") == 0);
  CHECK(fs::exists(at("flagout/frame.csv")));
  CHECK(!fs::exists(at("envout2")));
  CHECK(slurp(at("envout/frame.csv")) == slurp(at("flagout/frame.csv")));
}

TEST_CASE("ROOMSENSE_THREADS sits below per-key flags") {
  CHECK(run_cli("tune --train a --valid b --dry-run --out dry", "ROOMSENSE_THREADS=3") == 0);
  CHECK(last_log().find("\"threads\": 3") != std::string::npos);
  CHECK(run_cli("tune --train a --valid b --threads 2 --dry-run --out dry", "ROOMSENSE_THREADS=3") == 0);
  CHECK(last_log().find("\"threads\": 2") != std::string::npos);
  CHECK(run_cli("tune --train a --valid b --dry-run --out dry", "ROOMSENSE_THREADS=0") == 1);
}

TEST_CASE("runtime data errors exit 2") {
  CHECK(run_cli("report-missing --input does-not-exist.csv --out missing") == 2);
  std::ofstream(at("broken.csv")) << "timestamp,co2\nnot-a-time,400\n";
  CHECK(run_cli("clean --input broken.csv --out broken") == 2);
}

TEST_CASE("predict, smooth and pca consume a trained model") {
  REQUIRE(staged_pipeline());
  REQUIRE(run_cli("predict --out predict --model fcn/model --input time/test.csv") == 0);
  REQUIRE(run_cli("smooth --out smooth --input predict/track.json --width 5") == 0);
  const json track = roomsense::io::read_json(at("smooth/track.json"));
  CHECK(track.contains("meta"));
  CHECK(fs::exists(at("smooth/track.csv")));
  REQUIRE(run_cli("pca --out pca --model fcn/model --windows testwin/windows") == 0);
  CHECK(roomsense::io::read_json(at("pca/pca.json")).at("pca").at("components").size() == 2);
  CHECK(run_cli("report-missing --out missing --input synth/frame.csv") == 0);
  CHECK(run_cli("correlate --out corr --input clean/clean.csv") == 0);
  CHECK(fs::exists(at("corr/correlation.csv")));
}
