#include "helpers.hpp"

#include "pgma/errors.hpp"
#include "pgma/training.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace pgma;
using namespace pgma::train;

namespace {

TrainConfig small_config(Index sensors) {
  TrainConfig t;
  t.model.sensors = sensors;
  t.model.window = 24;
  t.model.embed_dim = 8;
  t.model.graph_dim = 8;
  t.model.temporal_dim = 8;
  t.model.channels = 2;
  t.model.mlp_hidden = 16;
  t.model.slots = 2;
  t.model.k = 2;
  t.max_epochs = 6;
  t.patience = 3;
  t.learning_rate = 0.005;
  return t;
}

data::SeriesMatrix periodic_series(Index sensors, Index length) {
  data::SyntheticOptions o;
  o.sensors = sensors;
  o.length = length;
  o.anomaly_rate = 0.0;
  auto series = data::generate_synthetic_detailed(o).series;
  series.values = data::fit_normalizer(series, data::NormalizationMode::minmax).apply(series.values);
  return series;
}

model::ModelParams scalar_params(double value) {
  model::ModelParams p;
  p.mlp2_b = Eigen::VectorXd::Constant(1, value);
  return p;
}

}  // namespace

TEST_CASE("adam first step and trivial cases") {
  auto p = scalar_params(0.0);
  auto state = make_adam_state(p);
  auto g = scalar_params(1.0);
  adam_step(p, g, state, 0.1, 0.9, 0.999, 1e-8);
  CHECK(p.mlp2_b(0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));

  auto q = scalar_params(0.7);
  auto qs = make_adam_state(q);
  adam_step(q, scalar_params(0.0), qs, 0.1, 0.9, 0.999, 1e-8);
  CHECK(q.mlp2_b(0) == 0.7);

  model::ModelParams two;
  two.mlp1_b = Eigen::VectorXd::Constant(2, 0.3);
  auto ts = make_adam_state(two);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int step = 0; step < 25; ++step) {
    model::ModelParams grad;
    grad.mlp1_b = Eigen::VectorXd::Constant(2, n(rng));
    adam_step(two, grad, ts, 0.01, 0.9, 0.999, 1e-8);
    CHECK(two.mlp1_b(0) == two.mlp1_b(1));
  }
}

TEST_CASE("non-finite gradient names the parameter") {
  auto p = scalar_params(0.0);
  auto state = make_adam_state(p);
  auto g = scalar_params(std::numeric_limits<double>::quiet_NaN());
  try {
    adam_step(p, g, state, 0.1, 0.9, 0.999, 1e-8);
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("mlp2_b") != std::string::npos);
  }
}

TEST_CASE("global norm clipping") {
  model::ModelParams g;
  g.mlp1_b = Eigen::VectorXd::Constant(4, 5.0);  // norm 10
  CHECK(clip_global_norm(g, 5.0) == doctest::Approx(10.0));
  CHECK(std::sqrt(model::squared_norm(g)) == doctest::Approx(5.0));
  CHECK(clip_global_norm(g, 50.0) == doctest::Approx(5.0));
}

TEST_CASE("config validation") {
  auto t = small_config(4);
  t.patience = 10;
  t.max_epochs = 5;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t.max_epochs = 0;
  t.patience = 3;
  CHECK_NOTHROW(t.validate());
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("chronological validation split") {
  const auto series = periodic_series(2, 200);
  const auto windows = data::make_windows(series, 24, 1);
  const auto [tr, val] = split_validation(windows, 0.1);
  CHECK(tr.size() + val.size() == windows.size());
  CHECK(val.size() == static_cast<Index>(std::llround(0.1 * static_cast<double>(windows.size()))));
  CHECK(tr.starts.back() < val.starts.front());
}

TEST_CASE("small gradient steps do not increase the loss") {
  const auto series = periodic_series(4, 200);
  const auto windows = data::make_windows(series, 24, 4);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto cfg = small_config(4);
    auto params = model::init_params(cfg.model, seed);
    const auto graphs = graph::build_slot_graphs(params.embeddings, cfg.model.k);
    const auto samples = make_samples(windows, 0, 24, cfg.model.slots, false);
    model::ModelParams grad;
    const double before = model::loss_and_gradient(cfg.model, params, graphs, samples, &grad);
    model::scale(grad, -1e-4);
    model::add_to(params, grad);
    const double after = model::loss_and_gradient(cfg.model, params, graphs, samples, nullptr);
    CHECK(after <= before);
  }
}

TEST_CASE("zero epochs returns the initialization") {
  auto cfg = small_config(4);
  cfg.max_epochs = 0;
  const auto series = periodic_series(4, 300);
  const auto res = train::train(series, spectral::detect_period(series), cfg);
  CHECK(res.report.epochs.empty());
  CHECK(res.report.best_epoch == 0);
  CHECK(res.report.checksum == checksum(model::init_params(cfg.model, cfg.seed)));
  CHECK(res.report.best_val_loss == res.report.initial_val_loss);
}

TEST_CASE("training reduces validation loss, keeps the best epoch and is reproducible") {
  auto cfg = small_config(4);
  const auto series = periodic_series(4, 900);
  const auto period = spectral::detect_period(series);
  CHECK(period.period == 24);
  const auto a = train::train(series, period, cfg);
  const auto b = train::train(series, period, cfg);

  CHECK(a.report.best_val_loss <= 0.5 * a.report.initial_val_loss);
  double min_val = a.report.initial_val_loss;
  for (const auto& e : a.report.epochs) min_val = std::min(min_val, e.val_loss);
  CHECK(a.report.best_val_loss == min_val);

  // The returned parameters reproduce the best validation loss.
  const auto windows = data::make_windows(series, cfg.model.window, cfg.stride);
  const auto [tr, val] = split_validation(windows, cfg.val_fraction);
  const auto samples = make_samples(val, 0, period.period, cfg.model.slots, false);
  CHECK(model::loss_and_gradient(a.config, a.params, a.graphs, samples, nullptr) == a.report.best_val_loss);

  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
    CHECK(a.report.epochs[e].train_loss == b.report.epochs[e].train_loss);
    CHECK(a.report.epochs[e].val_loss == b.report.epochs[e].val_loss);
  }
  CHECK(a.report.checksum == b.report.checksum);
}

TEST_CASE("early stopping honours patience") {
  auto cfg = small_config(4);
  cfg.learning_rate = 1e-9;  // no measurable progress
  cfg.max_epochs = 10;
  cfg.patience = 2;
  const auto series = periodic_series(4, 300);
  const auto res = train::train(series, spectral::detect_period(series), cfg);
  CHECK(res.report.epochs.size() <= 10);
  const auto since_best = static_cast<Index>(res.report.epochs.size()) - res.report.best_epoch;
  if (res.report.stopped_early) CHECK(since_best == cfg.patience);
}

TEST_CASE("grid search") {
  auto cfg = small_config(4);
  cfg.max_epochs = 2;
  cfg.patience = 2;
  const auto series = periodic_series(4, 400);
  const auto period = spectral::detect_period(series);

  const auto single = grid_search(series, period, cfg, {cfg.learning_rate}, 1);
  const auto direct = train::train(series, period, cfg);
  CHECK(single.best.report.checksum == direct.report.checksum);

  const auto grid = grid_search(series, period, cfg, {0.01, 0.005, 0.0025, 0.00125}, 2);
  REQUIRE(grid.cells.size() == 4);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : grid.cells) {
    REQUIRE(c.ok);
    best = std::min(best, c.report.best_val_loss);
  }
  CHECK(grid.best.report.best_val_loss == best);
  CHECK(grid.best_config.learning_rate == grid.best.report.learning_rate);

  auto broken = series;
  broken.values(0, 50) = std::numeric_limits<double>::quiet_NaN();
  try {
    grid_search(broken, period, cfg, {0.01, 0.005}, 1);
    FAIL("expected failure");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("no successful configuration") != std::string::npos);
  }
}

TEST_CASE("slot of a window") {
  const Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 24);
  CHECK(window_slot(w, 30, 24, 4, false) == 1);
  CHECK(window_slot(w, 54, 24, 4, false) == 1);
}
