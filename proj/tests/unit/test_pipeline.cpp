#include "helpers.hpp"

#include "pgma/errors.hpp"
#include "pgma/experiments.hpp"
#include "pgma/pipeline.hpp"

#include <doctest.h>

#include <fstream>

using namespace pgma;

namespace {

RunConfig tiny_run() {
  RunConfig c;
  c.window = 24;
  c.embed_dim = 6;
  c.graph_dim = 6;
  c.temporal_dim = 6;
  c.channels = 2;
  c.mlp_hidden = 8;
  c.k = 2;
  c.slots = 2;
  c.max_epochs = 2;
  c.patience = 2;
  c.learning_rate = 0.005;
  return c;
}

TrainTestSplit tiny_split() {
  data::SyntheticOptions o;
  o.sensors = 4;
  o.length = 800;
  o.anomaly_rate = 0.03;
  return synthetic_split(o, 0.5);
}

}  // namespace

TEST_CASE("config json round trip and overlay") {
  RunConfig c;
  c.k = 21;
  c.lr_grid = {0.01, 0.001};
  c.threshold = "fixed:1.5";
  const auto back = merge_json(RunConfig{}, to_json(c));
  CHECK(to_json(back) == to_json(c));

  const auto partial = merge_json(c, nlohmann::json{{"slots", 6}});
  CHECK(partial.slots == 6);
  CHECK(partial.k == 21);

  CHECK_THROWS_AS(merge_json(c, nlohmann::json{{"neighbours", 3}}), ConfigError);
  CHECK_THROWS_AS(merge_json(c, nlohmann::json{{"k", "many"}}), ConfigError);
}

TEST_CASE("config validation rejects bad values") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.normalization = "robust";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.kernel_set = "2,3";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.ma_window = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_kernel_set("3, 5, 7") == std::array<Index, 3>{3, 5, 7});
}

TEST_CASE("config file loading") {
  const auto dir = testing::scratch_dir("config_file");
  testing::write_file(dir / "c.json", R"({"k": 9, "window": 32})");
  const auto c = load_config_file(dir / "c.json");
  CHECK(c.k == 9);
  CHECK(c.window == 32);
  testing::write_file(dir / "bad.json", "{k: 9");
  CHECK_THROWS_AS(load_config_file(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_config_file(dir / "absent.json"), ConfigError);
}

TEST_CASE("variant and ablation switches") {
  CHECK(parse_variant("Static_Graph") == Variant::static_graph);
  CHECK(parse_variant("no_temporal_conv") == Variant::no_temporal_conv);
  CHECK_THROWS_AS(parse_variant("nothing"), ConfigError);

  auto c = apply_variant(tiny_run(), Variant::static_graph);
  CHECK(c.model_config(4).slots == 1);
  c = apply_variant(tiny_run(), Variant::no_temporal_conv);
  CHECK_FALSE(c.model_config(4).use_temporal);

  const auto f = apply_sweep_value(tiny_run(), SweepAxis::filters, 16);
  CHECK(f.graph_dim == 16);
  CHECK(f.temporal_dim == 16);
  CHECK(apply_sweep_value(tiny_run(), SweepAxis::neighbors, 3).k == 3);
}

TEST_CASE("fit, checkpoint round trip and scoring") {
  const auto split = tiny_split();
  const auto cfg = tiny_run();
  const auto out = fit(split.train, cfg);
  CHECK(out.checkpoint.period.period == 24);
  CHECK(out.checkpoint.validation_errors.rows() == 4);
  CHECK(out.checkpoint.train_length == split.train.length());

  const auto dir = testing::scratch_dir("checkpoint");
  save_checkpoint(dir / "ck.json", out.checkpoint);
  const auto back = load_checkpoint(dir / "ck.json");
  CHECK(back.params_checksum == train::checksum(back.params));
  CHECK(back.params_checksum == out.checkpoint.params_checksum);
  CHECK(back.config_hash == model_config_hash(back.model));
  CHECK(back.validation_errors == out.checkpoint.validation_errors);
  CHECK(back.normalization.shift == out.checkpoint.normalization.shift);
  CHECK(back.sensor_names == out.checkpoint.sensor_names);

  const auto s1 = score(out.checkpoint, split.test, cfg);
  const auto s2 = score(back, split.test, cfg);
  CHECK(s1.trace.smoothed == s2.trace.smoothed);
  REQUIRE(s1.metrics.has_value());
  CHECK(s1.timestamps.front() == cfg.window);
  CHECK(s1.timestamps.size() == static_cast<std::size_t>(split.test.length() - cfg.window));

  auto unlabeled = split.test;
  unlabeled.labels.reset();
  auto bf = cfg;
  bf.threshold = "best_f1";
  CHECK_THROWS_AS(score(out.checkpoint, unlabeled, bf), ConfigError);
  CHECK_FALSE(score(out.checkpoint, unlabeled, cfg).metrics.has_value());

  auto narrow = split.test;
  narrow.values = narrow.values.topRows(3).eval();
  narrow.sensor_names.resize(3);
  CHECK_THROWS_AS(score(out.checkpoint, narrow, cfg), DataError);

  // Tampering with the stored model config or a parameter shape is caught.
  auto j = nlohmann::json::parse(testing::read_file(dir / "ck.json"));
  auto hashed = j;
  hashed["model"]["k"] = 3;
  testing::write_file(dir / "hash.json", hashed.dump());
  CHECK_THROWS_AS(load_checkpoint(dir / "hash.json"), DataError);
  auto versioned = j;
  versioned["version"] = 99;
  testing::write_file(dir / "version.json", versioned.dump());
  CHECK_THROWS_AS(load_checkpoint(dir / "version.json"), DataError);
  auto shaped = j;
  shaped["shapes"]["mlp2_b"] = {2, 1};
  testing::write_file(dir / "shape.json", shaped.dump());
  CHECK_THROWS_AS(load_checkpoint(dir / "shape.json"), DataError);
}

TEST_CASE("static graph checkpoints store a single slot") {
  const auto split = tiny_split();
  auto cfg = tiny_run();
  cfg.static_graph = true;
  cfg.max_epochs = 1;
  cfg.patience = 1;
  const auto out = fit(split.train, cfg);
  CHECK(out.checkpoint.model.slots == 1);
  CHECK(out.checkpoint.params.embeddings.size() == 1);
  CHECK(checkpoint_graphs(out.checkpoint).size() == 1);
}
