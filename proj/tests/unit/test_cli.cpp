#include "doctest.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "dlfd/dataset.hpp"
#include "dlfd/metrics.hpp"
#include "dlfd/text_io.hpp"
#include "support.hpp"

using namespace dlfd;
using dlfd::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "dlfd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& path) { return path.string(); }

// Small dataset shared by the tests that need one.
const TempDir& sim_dir() {
  static TempDir dir("cli_data");
  static const bool made = [] {
    const Run r = run({"simulate", "--demos", "8", "--seed", "3", "--steps", "25", "--out", p(dir.path())});
    REQUIRE(r.code == 0);
    return true;
  }();
  (void)made;
  return dir;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"simulate", "--demos", "0", "--out", "x"}).code == cli::kUsage);
  CHECK(run({"train", "--model", "gru"}).code == cli::kUsage);
  const Run bad_model = run({"train", "--model", "transformer", "--data", p(sim_dir().path()), "--out", "/tmp/x"});
  CHECK(bad_model.code == cli::kUsage);
  CHECK(bad_model.err.find("kf_rmlp") != std::string::npos);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("simulate writes demonstrations and a manifest") {
  const auto& dir = sim_dir();
  const Dataset ds = load_dataset(dir.path());
  CHECK(ds.demos.size() == 8);
  CHECK(ds.demos[0].demo_id == "demo_000");
  CHECK(ds.demos[0].records.size() == 25);
  const auto manifest = nlohmann::json::parse(text::read_file(dir / "sim_manifest.json"));
  REQUIRE(manifest.at("records").size() == 8);
  CHECK(manifest.at("records")[0].at("demo_id") == "demo_000");
  CHECK(manifest.at("records")[0].contains("seed"));
  CHECK(std::filesystem::exists(dir / "runs.jsonl"));
}

TEST_CASE("train, eval and compare") {
  const auto& data = sim_dir();
  TempDir work("cli_work");
  const Run t1 = run({"train", "--model", "feedforward", "--data", p(data.path()), "--out", p(work / "ff"), "--epochs",
                      "2", "--hidden", "4", "--seed", "1", "--l1", "0"});
  REQUIRE(t1.code == 0);
  CHECK(std::filesystem::exists(work / "ff" / "model_manifest.json"));
  CHECK(std::filesystem::exists(work / "ff" / "training_log.csv"));

  const Run t2 = run({"train", "--model", "kf_rmlp", "--data", p(data.path()), "--out", p(work / "kf"), "--hidden", "4",
                      "--seed", "1"});
  REQUIRE(t2.code == 0);
  const Run t3 = run({"train", "--model", "gru", "--data", p(data.path()), "--out", p(work / "ens"), "--hidden", "3",
                      "--epochs", "1", "--ensemble", "2", "--seed", "1"});
  REQUIRE(t3.code == 0);
  CHECK(std::filesystem::exists(work / "ens" / "training_log_member_1.csv"));

  for (const char* m : {"ff", "kf", "ens"}) {
    const Run e = run({"eval", "--model-dir", p(work / m), "--data", p(data.path()), "--out", p(work / "r" / m)});
    REQUIRE(e.code == 0);
    CHECK(std::filesystem::exists(work / "r" / m / "trajectories.csv"));
  }
  const auto report = load_report(work / "r" / "kf" / "report.json");
  REQUIRE(report.size() == 1);
  CHECK(report[0].sample_count > 0);

  const Run c = run({"compare", "--reports", p(work / "r" / "ff" / "report.json"), p(work / "r" / "kf" / "report.json"),
                     p(work / "r" / "kf" / "report.json"), "--out", p(work / "cmp")});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("Loss") != std::string::npos);
  const auto merged = load_report(work / "cmp" / "comparison.json");
  REQUIRE(merged.size() == 3);
  for (std::size_t i = 1; i < merged.size(); ++i) CHECK(merged[i - 1].stats.loss <= merged[i].stats.loss);
  std::set<std::string> names;
  for (const auto& r : merged) names.insert(r.model_name);
  CHECK(names.size() == 3);

  // Guard rails on evaluation.
  CHECK(run({"eval", "--model-dir", p(work / "ff"), "--data", p(data.path()), "--out", p(work / "bad"), "--split-seed",
             "99"})
            .code == cli::kUsage);
  CHECK(run({"eval", "--model-dir", p(work / "ff"), "--data", p(data.path()), "--out", p(work / "bad"), "--partition",
             "fit"})
            .code == cli::kUsage);
  CHECK(run({"eval", "--model-dir", p(work / "ff"), "--data", p(data.path()), "--out", p(work / "fit"), "--partition",
             "fit", "--allow-train"})
            .code == cli::kOk);
  CHECK(run({"compare", "--reports", p(work / "r" / "ff" / "report.json"), "--out", p(work / "cmp1")}).code ==
        cli::kUsage);
}

TEST_CASE("data problems exit with 2") {
  TempDir work("cli_bad");
  CHECK(run({"train", "--model", "gru", "--data", p(work / "nothing"), "--out", p(work / "m")}).code ==
        cli::kDataError);
  std::filesystem::create_directories(work / "broken");
  text::write_file(work / "broken" / "x.csv", "not a dataset\n");
  const Run r = run({"train", "--model", "gru", "--data", p(work / "broken"), "--out", p(work / "m")});
  CHECK(r.code == cli::kDataError);
  CHECK(r.err.find("x.csv") != std::string::npos);
  text::write_file(work / "junk.json", "{}");
  CHECK(run({"compare", "--reports", p(work / "junk.json"), p(work / "junk.json"), "--out", p(work / "c")}).code ==
        cli::kDataError);
}

TEST_CASE("runs are logged with fingerprints") {
  const auto& data = sim_dir();
  TempDir work("cli_log");
  REQUIRE(run({"train", "--model", "rnn", "--data", p(data.path()), "--out", p(work / "m"), "--epochs", "1", "--hidden",
               "3"})
              .code == 0);
  const std::string log = text::read_file(work / "m" / "runs.jsonl");
  const auto rec = nlohmann::json::parse(log.substr(0, log.find('\n')));
  CHECK(rec.at("command") == "train");
  CHECK(rec.contains("started_at"));
  CHECK(rec.contains("duration_s"));
  const auto& hashes = rec.at("artifact_hashes");
  REQUIRE(!hashes.empty());
  for (const auto& [file, hash] : hashes.items()) {
    CHECK(hash == text::fnv1a_hex(text::read_file(file)));
  }
}
