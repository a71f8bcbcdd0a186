#include "cli.hpp"

#include "pgma/errors.hpp"
#include "pgma/experiments.hpp"
#include "pgma/graph.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>

namespace pgma::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Collects flags bound to RunConfig fields so they can be layered over the
// config file after parsing.
class Overrides {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    auto* o = app->add_option(name, scratch_.*field, help);
    items_.push_back({o, [this, field](RunConfig& c) { c.*field = scratch_.*field; }});
    return o;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help) {
    auto* o = app->add_flag(name, scratch_.*field, help);
    items_.push_back({o, [this, field](RunConfig& c) { c.*field = scratch_.*field; }});
    return o;
  }

  RunConfig resolve(const std::string& config_file) const {
    RunConfig c;
    if (!config_file.empty()) c = load_config_file(config_file, c);
    for (const auto& [opt, apply] : items_) {
      if (opt->count() > 0) apply(c);
    }
    return c;
  }

 private:
  RunConfig scratch_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items_;
};

struct SynthArgs {
  Index sensors = 8;
  Index length = 4800;
  Index period = 24;
  double anomaly_rate = 0.03;
  std::uint64_t seed = 7;
  double train_fraction = 0.5;

  data::SyntheticOptions options() const {
    data::SyntheticOptions o;
    o.sensors = sensors;
    o.length = length;
    o.period = period;
    o.anomaly_rate = anomaly_rate;
    o.seed = seed;
    return o;
  }
};

void add_synth_options(CLI::App* app, SynthArgs& s, const std::string& seed_flag) {
  app->add_option("--sensors", s.sensors, "number of synthetic sensors")->capture_default_str();
  app->add_option("--length", s.length, "total synthetic length")->capture_default_str();
  app->add_option("--period", s.period, "synthetic period")->capture_default_str();
  app->add_option("--anomaly-rate", s.anomaly_rate, "fraction of anomalous test timestamps")->capture_default_str();
  app->add_option(seed_flag, s.seed, "seed of the synthetic generator")->capture_default_str();
  app->add_option("--train-fraction", s.train_fraction, "leading share kept anomaly-free for training")
      ->capture_default_str();
}

void add_data_options(CLI::App* app, Overrides& ov) {
  ov.option(app, "--normalization", &RunConfig::normalization, "minmax or zscore");
  ov.option(app, "--window", &RunConfig::window, "window length w");
  ov.option(app, "--stride", &RunConfig::stride, "training window stride");
  ov.option(app, "--val-fraction", &RunConfig::val_fraction, "tail share of training windows held out");
  ov.option(app, "--label-column", &RunConfig::label_column, "name of the label column");
}

void add_train_options(CLI::App* app, Overrides& ov) {
  ov.option(app, "--lr", &RunConfig::learning_rate, "learning rate");
  ov.option(app, "--lr-grid", &RunConfig::lr_grid, "learning rates to grid-search")->delimiter(',');
  ov.option(app, "--max-epochs", &RunConfig::max_epochs, "epoch cap");
  ov.option(app, "--patience", &RunConfig::patience, "early-stopping patience");
  ov.option(app, "--batch-size", &RunConfig::batch_size, "mini-batch size");
  ov.option(app, "--seed", &RunConfig::seed, "training seed");
  ov.option(app, "--grad-clip", &RunConfig::grad_clip, "global gradient-norm clip (0 disables)");
  ov.option(app, "--k", &RunConfig::k, "neighbors per node");
  ov.option(app, "--slots", &RunConfig::slots, "graph slots per period");
  ov.option(app, "--dilation", &RunConfig::dilation, "base dilation");
  ov.option(app, "--channels", &RunConfig::channels, "filters per kernel size");
  ov.option(app, "--tcn-layers", &RunConfig::tcn_layers, "stacked temporal layers");
  ov.option(app, "--kernels", &RunConfig::kernel_set, "three kernel sizes, e.g. 2,3,5");
  ov.option(app, "--embed-dim", &RunConfig::embed_dim, "embedding width");
  ov.option(app, "--graph-dim", &RunConfig::graph_dim, "attention projection width");
  ov.option(app, "--temporal-dim", &RunConfig::temporal_dim, "temporal feature width");
  ov.option(app, "--mlp-hidden", &RunConfig::mlp_hidden, "hidden units of the output head");
  ov.flag(app, "--period-per-window", &RunConfig::period_per_window, "detect the period inside each window");
  ov.flag(app, "--static-graph", &RunConfig::static_graph, "single graph slot");
  ov.flag(app, "--no-temporal-conv", &RunConfig::no_temporal_conv, "drop the temporal convolution branch");
}

void add_score_options(CLI::App* app, Overrides& ov) {
  ov.option(app, "--ma-window", &RunConfig::ma_window, "moving-average window of the score");
  ov.option(app, "--threshold", &RunConfig::threshold, "max_validation, fixed:<v> or best_f1");
  ov.flag(app, "--point-adjust", &RunConfig::point_adjust, "report point-adjusted metrics");
  ov.option(app, "--time-offset", &RunConfig::time_offset, "absolute time of the first test row (-1 continues training)");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

std::string require(const std::string& value, const std::string& what) {
  if (value.empty()) throw ConfigError(what + " is required");
  return value;
}

data::SeriesMatrix load_series(const std::string& path, const RunConfig& c) {
  std::optional<std::string> label;
  if (c.label_column != "label") label = c.label_column;
  data::IngestStats stats;
  auto s = data::ingest_csv(path, label, &stats);
  if (stats.rows_rejected > 0) {
    std::cerr << "note: " << path << ": rejected " << stats.rows_rejected << " of " << stats.rows_read
              << " rows holding NaN/Inf\n";
  }
  return s;
}

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& explicit_seeds, std::uint64_t base,
                                     Index repeats) {
  if (!explicit_seeds.empty()) return explicit_seeds;
  if (repeats < 1) throw ConfigError("--repeats must be >= 1");
  std::vector<std::uint64_t> out;
  for (Index r = 0; r < repeats; ++r) out.push_back(base + static_cast<std::uint64_t>(r));
  return out;
}

TrainTestSplit experiment_data(const RunConfig& c, const SynthArgs& synth) {
  if (c.train_csv.empty() != c.test_csv.empty()) throw ConfigError("give both --train and --test, or neither");
  if (c.train_csv.empty()) return synthetic_split(synth.options(), synth.train_fraction);
  return {load_series(c.train_csv, c), load_series(c.test_csv, c)};
}

void warn_if_aperiodic(const spectral::PeriodProfile& p, std::ostream& err) {
  if (p.aperiodic) {
    err << "warning: no dominant period found in the training data; using the aperiodic fallback (period = "
        << p.period << ")\n";
  }
}

// ---------------------------------------------------------------- commands

void cmd_synth(const SynthArgs& s, const RunConfig& c, std::ostream& out) {
  const auto split = synthetic_split(s.options(), s.train_fraction);
  ensure_dir(c.output_dir);
  const fs::path dir = c.output_dir;
  data::write_csv(dir / "train.csv", split.train);
  data::write_csv(dir / "test.csv", split.test);
  Index anomalies = 0;
  for (auto l : *split.test.labels) anomalies += l;
  out << "wrote " << (dir / "train.csv").string() << " (" << split.train.length() << " rows) and "
      << (dir / "test.csv").string() << " (" << split.test.length() << " rows, " << anomalies
      << " anomalous)\n";
}

void cmd_period(const RunConfig& c, std::size_t top, const std::string& spectrum_csv, bool as_json,
                std::ostream& out, std::ostream& err) {
  const auto raw = load_series(require(c.train_csv, "--train"), c);
  const auto norm = data::fit_normalizer(raw, data::parse_normalization_mode(c.normalization));
  const auto profile = spectral::detect_period(norm.apply(raw));
  warn_if_aperiodic(profile, err);
  const auto bins = spectral::top_bins(profile, top);
  const auto bin_period = [&](Index f) { return (profile.length + f - 1) / f; };
  if (as_json) {
    json list = json::array();
    for (const auto& b : bins) {
      list.push_back({{"frequency", b.frequency}, {"amplitude", b.amplitude}, {"period", bin_period(b.frequency)}});
    }
    const json report = {{"length", profile.length},
                         {"dominant_frequency", profile.dominant_frequency},
                         {"period", profile.period},
                         {"aperiodic", profile.aperiodic},
                         {"top_bins", list}};
    out << report.dump(2) << '\n';
  } else {
    out << "length              " << profile.length << '\n'
        << "dominant frequency  " << profile.dominant_frequency << '\n'
        << "period              " << profile.period << (profile.aperiodic ? "  (aperiodic fallback)" : "") << "\n\n"
        << std::setw(6) << "rank" << std::setw(12) << "frequency" << std::setw(10) << "period" << std::setw(16)
        << "amplitude" << '\n';
    for (std::size_t r = 0; r < bins.size(); ++r) {
      out << std::setw(6) << r + 1 << std::setw(12) << bins[r].frequency << std::setw(10)
          << bin_period(bins[r].frequency) << std::setw(16) << format_double(bins[r].amplitude) << '\n';
    }
  }
  if (!spectrum_csv.empty()) {
    std::ostringstream csv;
    csv << "frequency,amplitude\n";
    for (Index f = 0; f < profile.amplitudes.size(); ++f) {
      csv << f + 1 << ',' << format_double(profile.amplitudes(f)) << '\n';
    }
    write_text(spectrum_csv, csv.str());
  }
}

void cmd_graph(const RunConfig& c, std::ostream& out) {
  const auto ck = load_checkpoint(c.checkpoint);
  ensure_dir(c.output_dir);
  const auto graphs = checkpoint_graphs(ck);
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto sim = graph::cosine_similarity(ck.params.embeddings[g]);
    std::ostringstream csv;
    csv << "source,target,similarity\n";
    for (Index i = 0; i < graphs[g].nodes; ++i) {
      for (Index j : graphs[g].in_neighbors[i]) csv << j << ',' << i << ',' << format_double(sim(j, i)) << '\n';
    }
    const auto path = fs::path(c.output_dir) / ("graph_slot" + std::to_string(g) + ".csv");
    write_text(path, csv.str());
    out << "slot " << g << ": " << graphs[g].edge_count() << " edges -> " << path.string() << '\n';
  }
}

void cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto raw = load_series(require(c.train_csv, "--train"), c);
  ensure_dir(c.output_dir);
  const auto fitted = fit(raw, c);
  const auto& ck = fitted.checkpoint;
  warn_if_aperiodic(ck.period, err);
  save_checkpoint(c.checkpoint, ck);

  json report = to_json(fitted.report);
  report["model"] = model_config_json(ck.model);
  report["period"] = {{"dominant_frequency", ck.period.dominant_frequency},
                      {"period", ck.period.period},
                      {"aperiodic", ck.period.aperiodic}};
  report["checkpoint"] = c.checkpoint;
  if (!fitted.grid.empty()) {
    json grid = json::array();
    for (const auto& cell : fitted.grid) {
      grid.push_back({{"learning_rate", cell.learning_rate},
                      {"ok", cell.ok},
                      {"error", cell.error},
                      {"best_val_loss", cell.report.best_val_loss},
                      {"best_epoch", cell.report.best_epoch}});
    }
    report["grid"] = grid;
  }
  const fs::path dir = c.output_dir;
  write_text(dir / "train_report.json", report.dump(2) + "\n");

  std::ostringstream curve;
  curve << "epoch,train_loss,val_loss\n0,," << format_double(fitted.report.initial_val_loss) << '\n';
  for (const auto& e : fitted.report.epochs) {
    curve << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
  }
  write_text(dir / "loss_curve.csv", curve.str());

  out << "trained " << fitted.report.epochs.size() << " epochs, best epoch " << fitted.report.best_epoch
      << " (val loss " << fitted.report.best_val_loss << "), lr " << fitted.report.learning_rate << ", period "
      << ck.period.period << ", slots " << ck.model.slots << "\ncheckpoint -> " << c.checkpoint << '\n';
}

void cmd_score(const RunConfig& c, bool plot, std::ostream& out) {
  const auto ck = load_checkpoint(c.checkpoint);
  const auto raw = load_series(require(c.test_csv, "--test"), c);
  ensure_dir(c.output_dir);
  const auto res = score(ck, raw, c);
  const auto& tr = res.trace;

  std::ostringstream csv;
  csv << "t,ano,smoothed,label_pred,label_true,top_sensor\n";
  for (std::size_t b = 0; b < res.timestamps.size(); ++b) {
    const auto i = static_cast<Index>(b);
    csv << res.timestamps[b] << ',' << format_double(tr.score(i)) << ',' << format_double(tr.smoothed(i)) << ','
        << int(tr.predicted[b]) << ',';
    if (res.truth) csv << int((*res.truth)[b]);
    csv << ',' << ck.sensor_names[static_cast<std::size_t>(tr.top_sensor[b])] << '\n';
  }
  const fs::path dir = c.output_dir;
  write_text(dir / "score_trace.csv", csv.str());

  json metrics = {{"threshold_mode", c.threshold_mode().to_string()},
                  {"threshold", tr.threshold},
                  {"labels_available", res.truth.has_value()},
                  {"timestamps", res.timestamps.size()}};
  if (res.metrics) {
    metrics["point_adjust"] = res.metrics->point_adjust;
    metrics["precision"] = res.metrics->precision;
    metrics["recall"] = res.metrics->recall;
    metrics["f1"] = res.metrics->f1;
    metrics["pointwise"] = to_json(*res.pointwise);
    metrics["point_adjusted"] = to_json(*res.point_adjusted);
  }
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");

  if (plot) {
    std::ostringstream dat;
    dat << "# t smoothed threshold label_pred label_true\n";
    for (std::size_t b = 0; b < res.timestamps.size(); ++b) {
      dat << res.timestamps[b] << ' ' << format_double(tr.smoothed(static_cast<Index>(b))) << ' '
          << format_double(tr.threshold) << ' ' << int(tr.predicted[b]) << ' '
          << (res.truth ? int((*res.truth)[b]) : 0) << '\n';
    }
    write_text(dir / "score_plot.dat", dat.str());
    write_text(dir / "score_plot.gp",
               "set terminal pngcairo size 1200,400\nset output 'score_plot.png'\nset xlabel 't'\n"
               "plot 'score_plot.dat' using 1:2 with lines title 'smoothed score', \\\n"
               "     '' using 1:3 with lines dt 2 title 'threshold', \\\n"
               "     '' using 1:5 with steps title 'true label'\n");
  }

  out << "scored " << res.timestamps.size() << " timestamps, threshold " << tr.threshold;
  if (res.metrics) {
    out << ", precision " << res.metrics->precision << ", recall " << res.metrics->recall << ", f1 "
        << res.metrics->f1;
  }
  out << '\n';
}

void cmd_ablate(const RunConfig& c, const SynthArgs& synth, const std::vector<std::string>& skip_names,
                const std::vector<std::uint64_t>& seeds, std::ostream& out, std::ostream& err) {
  std::set<Variant> skip;
  for (const auto& s : skip_names) skip.insert(parse_variant(s));
  const auto d = experiment_data(c, synth);
  ensure_dir(c.output_dir);
  const auto report = run_ablation(d.train, d.test, c, seeds, skip);
  warn_if_aperiodic(report.period, err);
  const auto table = format_table(report);
  const fs::path dir = c.output_dir;
  write_text(dir / "ablation.txt", table);
  write_text(dir / "ablation.json", to_json(report).dump(2) + "\n");
  out << table;
}

void cmd_sweep(const RunConfig& c, const SynthArgs& synth, bool k_sweep, bool filter_sweep,
               const std::vector<Index>& values, const std::vector<std::uint64_t>& seeds, std::ostream& out) {
  if (k_sweep == filter_sweep) throw ConfigError("choose exactly one of --k-sweep and --filter-sweep");
  const auto axis = k_sweep ? SweepAxis::neighbors : SweepAxis::filters;
  const auto d = experiment_data(c, synth);
  ensure_dir(c.output_dir);
  const auto rows = run_sweep(d.train, d.test, c, axis, values.empty() ? default_sweep_values(axis) : values, seeds);
  const auto csv = sweep_csv(rows, axis);
  write_text(fs::path(c.output_dir) / (k_sweep ? "sweep_k.csv" : "sweep_filters.csv"), csv);
  out << csv;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Periodic graph anomaly detector for multivariate time series", "pgma"};
  app.require_subcommand(1);
  Overrides ov;
  std::string config_file;
  SynthArgs synth;
  std::size_t top = 5;
  std::string spectrum_csv;
  bool period_json = false;
  bool plot = false;
  bool use_grid = false;
  bool k_sweep = false;
  bool filter_sweep = false;
  std::vector<std::string> ablate_switches;
  std::vector<std::string> skip;
  std::vector<std::uint64_t> seeds;
  std::vector<Index> sweep_values;
  Index repeats = 3;
  CLI::Option* patience_opt = nullptr;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file (flags override it)");
    ov.option(sub, "--threads", &RunConfig::threads, "worker threads");
    ov.option(sub, "--out-dir", &RunConfig::output_dir, "output directory");
  };

  auto* synth_cmd = app.add_subcommand("synth", "write a labeled synthetic train/test pair");
  common(synth_cmd);
  add_synth_options(synth_cmd, synth, "--seed");

  auto* period_cmd = app.add_subcommand("period", "spectral period detection");
  period_cmd->require_subcommand(1);
  auto* report_cmd = period_cmd->add_subcommand("report", "print the dominant period and strongest bins of a CSV");
  common(report_cmd);
  ov.option(report_cmd, "--train", &RunConfig::train_csv, "input CSV");
  ov.option(report_cmd, "--normalization", &RunConfig::normalization, "minmax or zscore");
  ov.option(report_cmd, "--label-column", &RunConfig::label_column, "name of the label column");
  report_cmd->add_option("--top", top, "number of strongest bins to list")->capture_default_str();
  report_cmd->add_option("--spectrum-csv", spectrum_csv, "write the full amplitude spectrum here");
  report_cmd->add_flag("--json", period_json, "print JSON instead of a table");

  auto* graph_cmd = app.add_subcommand("graph", "inspect the learned per-slot graphs");
  graph_cmd->require_subcommand(1);
  auto* dump_cmd = graph_cmd->add_subcommand("dump", "write each slot's edge list as CSV");
  common(dump_cmd);
  ov.option(dump_cmd, "--checkpoint", &RunConfig::checkpoint, "checkpoint file");

  auto* train_cmd = app.add_subcommand("train", "train a detector and write a checkpoint");
  common(train_cmd);
  ov.option(train_cmd, "--train", &RunConfig::train_csv, "training CSV");
  ov.option(train_cmd, "--checkpoint", &RunConfig::checkpoint, "checkpoint output path");
  add_data_options(train_cmd, ov);
  add_train_options(train_cmd, ov);
  patience_opt = train_cmd->get_option("--patience");
  train_cmd->add_flag("--grid", use_grid, "grid-search the default learning rates");
  train_cmd->add_option("--ablate", ablate_switches, "static-graph and/or no-temporal-conv")->delimiter(',');

  auto* score_cmd = app.add_subcommand("score", "score a test CSV with a checkpoint");
  common(score_cmd);
  ov.option(score_cmd, "--test", &RunConfig::test_csv, "test CSV");
  ov.option(score_cmd, "--checkpoint", &RunConfig::checkpoint, "checkpoint file");
  ov.option(score_cmd, "--label-column", &RunConfig::label_column, "name of the label column");
  add_score_options(score_cmd, ov);
  score_cmd->add_flag("--plot", plot, "also write gnuplot data and script");

  auto* ablate_cmd = app.add_subcommand("ablate", "compare the full model with its two ablations");
  auto* sweep_cmd = app.add_subcommand("sweep", "F1 against k or against layer width");
  for (auto* sub : {ablate_cmd, sweep_cmd}) {
    common(sub);
    ov.option(sub, "--train", &RunConfig::train_csv, "training CSV (synthetic data when omitted)");
    ov.option(sub, "--test", &RunConfig::test_csv, "labeled test CSV");
    add_data_options(sub, ov);
    add_train_options(sub, ov);
    add_score_options(sub, ov);
    add_synth_options(sub, synth, "--data-seed");
    sub->add_option("--seeds", seeds, "training seeds (overrides --repeats)")->delimiter(',');
    sub->add_option("--repeats", repeats, "seeds seed, seed+1, ...")->capture_default_str();
  }
  ablate_cmd->add_option("--skip", skip, "variants to leave out")->delimiter(',');
  sweep_cmd->add_flag("--k-sweep", k_sweep, "sweep the neighbor count");
  sweep_cmd->add_flag("--filter-sweep", filter_sweep, "sweep the attention/temporal width");
  sweep_cmd->add_option("--values", sweep_values, "values to sweep")->delimiter(',');

  auto* config_cmd = app.add_subcommand("config", "inspect configuration");
  config_cmd->require_subcommand(1);
  auto* show_cmd = config_cmd->add_subcommand("show", "print the effective configuration as JSON");
  show_cmd->add_option("--config", config_file, "JSON config file");
  ov.option(show_cmd, "--train", &RunConfig::train_csv, "training CSV");
  ov.option(show_cmd, "--test", &RunConfig::test_csv, "test CSV");
  ov.option(show_cmd, "--checkpoint", &RunConfig::checkpoint, "checkpoint path");
  ov.option(show_cmd, "--out-dir", &RunConfig::output_dir, "output directory");
  ov.option(show_cmd, "--threads", &RunConfig::threads, "worker threads");
  add_data_options(show_cmd, ov);
  add_train_options(show_cmd, ov);
  add_score_options(show_cmd, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig c = ov.resolve(config_file);
    if (c.max_epochs > 0 && c.patience > c.max_epochs && (!patience_opt || patience_opt->count() == 0)) {
      c.patience = c.max_epochs;
    }
    for (const auto& s : ablate_switches) {
      const auto v = parse_variant(s);
      if (v == Variant::full) throw ConfigError("--ablate takes static-graph or no-temporal-conv");
      if (v == Variant::static_graph) c.static_graph = true;
      if (v == Variant::no_temporal_conv) c.no_temporal_conv = true;
    }
    if (use_grid && c.lr_grid.empty()) {
      c.lr_grid.assign(train::kDefaultLearningRates.begin(), train::kDefaultLearningRates.end());
    }
    c.validate();

    if (*synth_cmd) {
      cmd_synth(synth, c, out);
    } else if (*report_cmd) {
      cmd_period(c, top, spectrum_csv, period_json, out, err);
    } else if (*dump_cmd) {
      cmd_graph(c, out);
    } else if (*train_cmd) {
      cmd_train(c, out, err);
    } else if (*score_cmd) {
      cmd_score(c, plot, out);
    } else if (*ablate_cmd) {
      cmd_ablate(c, synth, skip, seed_list(seeds, c.seed, repeats), out, err);
    } else if (*sweep_cmd) {
      cmd_sweep(c, synth, k_sweep, filter_sweep, sweep_values, seed_list(seeds, c.seed, repeats), out);
    } else if (*show_cmd) {
      out << to_json(c).dump(2) << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pgma::cli
