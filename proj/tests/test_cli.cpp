#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "adaptkit/cli.hpp"
#include "adaptkit/hub_index.hpp"
#include "doctest.h"
#include "hub_fixture.hpp"
#include "json.hpp"

using namespace adaptkit;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "adaptkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = adaptkit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the installed executable in a child process.
Result spawn(const std::vector<std::string>& args, const testing::TempDir& dir) {
  std::string cmd = ADAPTKIT_CLI_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " >" + (dir / "stdout").string() + " 2>" + (dir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir / "stdout"), slurp(dir / "stderr")};
}

json last_json_line(const std::string& out) {
  std::istringstream in(out);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return json::parse(last);
}

std::vector<std::string> train_args(const std::filesystem::path& out, const std::string& seed = "0") {
  return {"train", "--task", "majority-token", "--adapter-name", "maj", "--steps", "30", "--batch-size", "4",
          "--seed", seed, "--out", out.string()};
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"train", "--out", "/tmp/x"}).code == cli::kExitUsage);
  const Result r = invoke({"train", "--task", "majority-token", "--mode", "adapter_only", "--out", "/tmp/x"});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("--adapter-name") != std::string::npos);
  CHECK(invoke({"search", "--index", "i.json", "--query", "sst"}).code == cli::kExitUsage);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("train and run") {
  testing::TempDir dir;
  const Result a = invoke(train_args(dir / "a"));
  REQUIRE(a.code == 0);
  const json ra = json::parse(a.out);
  CHECK(std::filesystem::is_regular_file(ra["package"].get<std::string>()));
  CHECK(std::filesystem::is_regular_file(dir / "a" / "backbone.ckpt"));
  CHECK(ra["model_hash"] == ModelConfig::desk().hash());
  CHECK(ra["steps"] == 30);

  SUBCASE("same seed gives the same metric and artifacts") {
    const Result b = invoke(train_args(dir / "b"));
    REQUIRE(b.code == 0);
    CHECK(json::parse(b.out)["dev_accuracy"] == ra["dev_accuracy"]);
    CHECK(slurp(dir / "a" / "train_log.jsonl") == slurp(dir / "b" / "train_log.jsonl"));
    CHECK(slurp(dir / "a" / "maj.adpk") == slurp(dir / "b" / "maj.adpk"));
    const Result c = invoke(train_args(dir / "c", "1"));
    CHECK(slurp(dir / "a" / "train_log.jsonl") != slurp(dir / "c" / "train_log.jsonl"));
  }
  SUBCASE("run reproduces the reported accuracy") {
    const Result r = invoke({"run", "--model-checkpoint", (dir / "a" / "backbone.ckpt").string(), "--adapter",
                          (dir / "a" / "maj.adpk").string(), "--input-file", (dir / "a" / "dev.tsv").string()});
    REQUIRE(r.code == 0);
    const json summary = last_json_line(r.out)["summary"];
    CHECK(summary["lines"] == 500);
    CHECK(summary["labelled"] == 500);
    CHECK(summary["accuracy"].get<double>() == ra["dev_accuracy"].get<double>());
    CHECK(json::parse(r.out.substr(0, r.out.find('\n'))).contains("prediction"));
  }
  SUBCASE("mismatched checkpoint exits 2 citing both hashes") {
    ModelConfig narrow = ModelConfig::desk();
    narrow.hidden_size = 32;
    save_backbone(Model::initialize(narrow, 0), dir / "narrow.ckpt");
    const Result r = invoke({"run", "--model-checkpoint", (dir / "narrow.ckpt").string(), "--adapter",
                          (dir / "a" / "maj.adpk").string(), "--input-file", (dir / "a" / "dev.tsv").string()});
    CHECK(r.code == cli::kExitValidation);
    CHECK(r.err.find(narrow.hash()) != std::string::npos);
    CHECK(r.err.find(ModelConfig::desk().hash()) != std::string::npos);
  }
  SUBCASE("configuration conflict exits 2") {
    const Result r = invoke({"run", "--model-checkpoint", (dir / "a" / "backbone.ckpt").string(), "--adapter",
                          (dir / "a" / "maj.adpk").string(), "--adapter-config", "houlsby", "--input-file",
                          (dir / "a" / "dev.tsv").string()});
    CHECK(r.code == cli::kExitValidation);
  }
  SUBCASE("malformed input lines exit 2") {
    std::ofstream(dir / "bad.txt") << "0 1 x\n";
    const Result r = invoke({"run", "--model-checkpoint", (dir / "a" / "backbone.ckpt").string(), "--adapter",
                          (dir / "a" / "maj.adpk").string(), "--input-file", (dir / "bad.txt").string()});
    CHECK(r.code == cli::kExitValidation);
    CHECK(r.err.find("line 1") != std::string::npos);
  }
  SUBCASE("pack and validate") {
    const Result p = invoke({"pack", "--package", (dir / "a" / "maj.adpk").string(), "--out",
                          (dir / "maj.zip").string(), "--category", "counting", "--dataset", "majority"});
    REQUIRE(p.code == 0);
    const json pj = json::parse(p.out);
    CHECK(pj["blob_bytes"].get<std::size_t>() == 4 * pj["params"].get<std::size_t>());
    CHECK(invoke({"validate", (dir / "maj.zip").string()}).code == 0);
    CHECK(invoke({"validate", (dir / "maj.yaml").string(), "--fetch"}).code == 0);

    std::string yaml = slurp(dir / "maj.yaml");
    std::string stripped;
    std::istringstream in(yaml);
    for (std::string line; std::getline(in, line);)
      if (!line.starts_with("sha256:")) stripped += line + "\n";
    std::ofstream(dir / "nosha.yaml") << stripped;
    const Result v = invoke({"validate", (dir / "nosha.yaml").string()});
    CHECK(v.code == cli::kExitValidation);
    const json vj = json::parse(v.out);
    REQUIRE(vj["violations"].size() == 1);
    CHECK(vj["violations"][0]["path"] == "sha256");
    CHECK(v.err.find("sha256") != std::string::npos);
  }
  CHECK(invoke({"validate", (dir / "missing.yaml").string()}).code == cli::kExitIo);
}

TEST_CASE("hub commands") {
  const testing::HubFixture f = testing::make_hub_fixture();
  const auto& d = *f.dir;
  std::vector<std::string> index_args = {"index"};
  for (const auto& m : f.metadata_files) index_args.push_back(m.string());
  index_args.insert(index_args.end(), {"--out", (d / "index.json").string()});
  REQUIRE(invoke(index_args).code == 0);
  CHECK(build_index(f.entries).serialize() == slurp(d / "index.json"));
  const std::string idx = (d / "index.json").string();

  SUBCASE("duplicate ingest is rejected") {
    const Result r = invoke({"index", f.metadata_files[0].string(), "--base", idx, "--out", (d / "x.json").string()});
    CHECK(r.code == cli::kExitValidation);
    CHECK(r.err.find("duplicate") != std::string::npos);
    CHECK(invoke({"validate", f.metadata_files[0].string(), "--index", idx}).code == cli::kExitValidation);
  }
  SUBCASE("explore") {
    const Result r = invoke({"explore", "--index", idx});
    CHECK(r.code == 0);
    CHECK(r.out == "language (1)\ntask (3)\n");
    CHECK(invoke({"explore", "--index", idx, "--level1", "language"}).out == "sw\n  wikipedia-sw (1)\n");
    CHECK(invoke({"explore", "--index", idx, "--level1", "task", "--level2", "nothing"}).code ==
          cli::kExitValidation);
  }
  SUBCASE("search") {
    const Result ok = invoke({"search", "--index", idx, "--query", "sst", "--model-config", "mini-bert"});
    REQUIRE(ok.code == 0);
    const json e = json::parse(ok.out);
    CHECK(e["id"] == "sst-2");
    CHECK(e["model"]["hash"] == f.live.hash());

    const Result amb = invoke({"search", "--index", idx, "--query", "s", "--model-hash", f.live.hash()});
    CHECK(amb.code == cli::kExitValidation);
    CHECK(amb.err.find("sst-2") != std::string::npos);
    CHECK(amb.err.find("stsb") != std::string::npos);
    CHECK(json::parse(amb.out)["candidates"].size() == 3);

    const Result cfg = invoke({"search", "--index", idx, "--query", "sst", "--model-hash", f.live.hash(),
                            "--adapter-config", "houlsby"});
    CHECK(cfg.code == cli::kExitValidation);
    CHECK(json::parse(cfg.out)["error"] == "not_found");
  }
  SUBCASE("run resolves through the index and caches") {
    save_backbone(Model::initialize(f.live, 0), d / "live.ckpt");
    std::ofstream(d / "input.txt") << "0 1 1 2 9\n0 2 2 1 9\n";
    const std::vector<std::string> args = {"run", "--model-checkpoint", (d / "live.ckpt").string(),
                                           "--adapter", "sst", "--index", idx, "--cache-dir",
                                           (d / "cache").string(), "--input-file", (d / "input.txt").string()};
    const Result first = invoke(args);
    REQUIRE(first.code == 0);
    CHECK(first.err.find("(fetched)") != std::string::npos);
    const Result second = invoke(args);
    CHECK(second.err.find("(cached)") != std::string::npos);
    CHECK(second.out == first.out);
    CHECK(last_json_line(first.out)["summary"]["lines"] == 2);
  }
}

TEST_CASE("config file overlays flag defaults") {
  testing::TempDir dir;
  std::ofstream(dir / "run.ini") << "[train]\ntask=copy-first-label\nadapter-name=cp\nsteps=3\nbatch-size=2\n";
  const Result r = invoke({"--config", (dir / "run.ini").string(), "train", "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["steps"] == 3);
  CHECK(j["task"] == "copy-first-label");
  CHECK(j["adapter"] == "cp");
}

TEST_CASE("the executable") {
  testing::TempDir dir;
  CHECK(spawn({"--help"}, dir).code == 0);
  const Result r = spawn({"train", "--task", "majority-token", "--out", (dir / "o").string()}, dir);
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  CHECK(r.err.find("--adapter-name") != std::string::npos);
  CHECK(spawn({"explore", "--index", (dir / "none.json").string()}, dir).code == 3);
}
