#include "helpers.hpp"

#include "cli.hpp"
#include "pgma/data.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <sstream>
#include <string>
#include <vector>

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "pgma");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = pgma::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const std::vector<std::string> kTinyModel{"--window", "24",  "--embed-dim", "6",  "--graph-dim",  "6",
                                          "--temporal-dim", "6", "--channels", "2", "--mlp-hidden", "8",
                                          "--k", "2", "--slots", "2", "--max-epochs", "2", "--patience", "2"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("config layering: flag over file over default") {
  const auto dir = testing::scratch_dir("cli_layers");
  testing::write_file(dir / "c.json", R"({"k": 9, "slots": 6})");
  const auto r = run({"config", "show", "--config", (dir / "c.json").string(), "--k", "11"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("k") == 11);
  CHECK(j.at("slots") == 6);
  CHECK(j.at("window") == 64);

  testing::write_file(dir / "bad.json", R"({"kay": 9})");
  CHECK(run({"config", "show", "--config", (dir / "bad.json").string()}).code == 1);
  CHECK(run({"config", "show", "--threshold", "sometimes"}).code == 1);
  CHECK(run({"no-such-command"}).code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("synth is deterministic and honours a zero anomaly rate") {
  const auto a = testing::scratch_dir("cli_synth_a");
  const auto b = testing::scratch_dir("cli_synth_b");
  const std::vector<std::string> opts{"--sensors", "3", "--length", "400"};
  REQUIRE(run(concat({"synth", "--out-dir", a.string()}, opts)).code == 0);
  REQUIRE(run(concat({"synth", "--out-dir", b.string()}, opts)).code == 0);
  CHECK(testing::read_file(a / "test.csv") == testing::read_file(b / "test.csv"));
  CHECK(testing::read_file(a / "train.csv") == testing::read_file(b / "train.csv"));

  const auto z = testing::scratch_dir("cli_synth_zero");
  REQUIRE(run(concat({"synth", "--out-dir", z.string(), "--anomaly-rate", "0"}, opts)).code == 0);
  const auto test = pgma::data::ingest_csv(z / "test.csv");
  REQUIRE(test.has_labels());
  for (auto l : *test.labels) CHECK(l == 0);
}

TEST_CASE("error exit codes") {
  const auto dir = testing::scratch_dir("cli_errors");
  const auto missing = run({"train", "--train", (dir / "nope.csv").string(), "--out-dir", dir.string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.csv") != std::string::npos);

  CHECK(run({"sweep", "--k-sweep", "--filter-sweep"}).code == 1);
  CHECK(run({"period"}).code == 1);
  CHECK(run({"period", "report"}).code == 1);
  CHECK(run({"graph"}).code == 1);
}

TEST_CASE("train, score and graph dump end to end") {
  const auto dir = testing::scratch_dir("cli_e2e");
  REQUIRE(run({"synth", "--out-dir", dir.string(), "--sensors", "4", "--length", "800"}).code == 0);
  const auto ck = (dir / "ck.json").string();

  const auto p = run({"period", "report", "--train", (dir / "train.csv").string(), "--json"});
  REQUIRE(p.code == 0);
  CHECK(nlohmann::json::parse(p.out).at("period") == 24);
  const auto table = run({"period", "report", "--train", (dir / "train.csv").string()});
  REQUIRE(table.code == 0);
  CHECK(table.out.find("period              24") != std::string::npos);
  CHECK(table.out.find("rank") != std::string::npos);

  const auto t = run(concat({"train", "--train", (dir / "train.csv").string(), "--checkpoint", ck, "--out-dir",
                             dir.string()},
                            kTinyModel));
  REQUIRE(t.code == 0);
  CHECK(std::filesystem::exists(dir / "loss_curve.csv"));
  CHECK(std::filesystem::exists(dir / "train_report.json"));

  const auto g = run({"graph", "dump", "--checkpoint", ck, "--out-dir", dir.string()});
  REQUIRE(g.code == 0);
  CHECK(testing::read_file(dir / "graph_slot0.csv").rfind("source,target,similarity\n", 0) == 0);

  const auto s = run({"score", "--test", (dir / "test.csv").string(), "--checkpoint", ck, "--out-dir",
                      dir.string(), "--threshold", "fixed:0"});
  REQUIRE(s.code == 0);
  const auto m = nlohmann::json::parse(testing::read_file(dir / "metrics.json"));
  CHECK(m.at("threshold") == 0.0);
  CHECK(m.at("labels_available") == true);
  CHECK(m.contains("f1"));
  CHECK(m.contains("point_adjusted"));
  CHECK(testing::read_file(dir / "score_trace.csv").rfind("t,ano,smoothed,label_pred,label_true,top_sensor\n", 0) ==
        0);

  // Unlabeled test data: fine for max_validation, a config error for best_f1.
  auto test = pgma::data::ingest_csv(dir / "test.csv");
  test.labels.reset();
  pgma::data::write_csv(dir / "unlabeled.csv", test);
  CHECK(run({"score", "--test", (dir / "unlabeled.csv").string(), "--checkpoint", ck, "--out-dir",
             dir.string()})
            .code == 0);
  CHECK(run({"score", "--test", (dir / "unlabeled.csv").string(), "--checkpoint", ck, "--out-dir",
             dir.string(), "--threshold", "best_f1"})
            .code == 1);

  testing::write_file(dir / "broken.json", "{\"format\": \"pgma-checkpoint\"");
  CHECK(run({"score", "--test", (dir / "test.csv").string(), "--checkpoint", (dir / "broken.json").string(),
             "--out-dir", dir.string()})
            .code == 2);
}
