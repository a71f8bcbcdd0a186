#include "pgma/pipeline.hpp"

#include "pgma/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace pgma {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
    throw DataError("checkpoint entry '" + what + "' has inconsistent shape metadata");
  }
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Index>(data.size()));
}

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <class T>
void take(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

std::array<Index, 3> parse_kernel_set(const std::string& text) {
  std::array<Index, 3> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 3) throw ConfigError("kernel set must list exactly three sizes, got '" + text + "'");
    try {
      std::size_t used = 0;
      out[n] = std::stol(item, &used);
      if (used != item.size() || out[n] < 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad kernel size '" + item + "' in '" + text + "'");
    }
    ++n;
  }
  if (n != 3) throw ConfigError("kernel set must list exactly three sizes, got '" + text + "'");
  return out;
}

void RunConfig::validate() const {
  data::parse_normalization_mode(normalization);
  threshold_mode();
  parse_kernel_set(kernel_set);
  if (ma_window < 1) throw ConfigError("ma_window must be >= 1");
  if (window < 1 || stride < 1) throw ConfigError("window and stride must be positive");
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw ConfigError("learning rates in the grid must be positive");
  }
  train_config(1).validate();
}

model::ModelConfig RunConfig::model_config(Index sensors) const {
  model::ModelConfig m;
  m.sensors = sensors;
  m.window = window;
  m.embed_dim = embed_dim;
  m.graph_dim = graph_dim;
  m.temporal_dim = temporal_dim;
  m.channels = channels;
  m.dilation = dilation;
  m.tcn_layers = tcn_layers;
  m.kernel_sizes = parse_kernel_set(kernel_set);
  m.mlp_hidden = mlp_hidden;
  m.slots = static_graph ? 1 : slots;
  m.k = k;
  m.use_temporal = !no_temporal_conv;
  return m;
}

train::TrainConfig RunConfig::train_config(Index sensors) const {
  train::TrainConfig t;
  t.learning_rate = learning_rate;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.batch_size = batch_size;
  t.seed = seed;
  t.stride = stride;
  t.val_fraction = val_fraction;
  t.grad_clip = grad_clip;
  t.threads = threads;
  t.period_per_window = period_per_window;
  t.model = model_config(sensors);
  return t;
}

json to_json(const RunConfig& c) {
  return {
      {"train_csv", c.train_csv},
      {"test_csv", c.test_csv},
      {"checkpoint", c.checkpoint},
      {"output_dir", c.output_dir},
      {"label_column", c.label_column},
      {"normalization", c.normalization},
      {"window", c.window},
      {"stride", c.stride},
      {"val_fraction", c.val_fraction},
      {"learning_rate", c.learning_rate},
      {"lr_grid", c.lr_grid},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"grad_clip", c.grad_clip},
      {"threads", c.threads},
      {"k", c.k},
      {"slots", c.slots},
      {"dilation", c.dilation},
      {"channels", c.channels},
      {"tcn_layers", c.tcn_layers},
      {"kernel_set", c.kernel_set},
      {"embed_dim", c.embed_dim},
      {"graph_dim", c.graph_dim},
      {"temporal_dim", c.temporal_dim},
      {"mlp_hidden", c.mlp_hidden},
      {"period_per_window", c.period_per_window},
      {"ma_window", c.ma_window},
      {"threshold", c.threshold},
      {"point_adjust", c.point_adjust},
      {"time_offset", c.time_offset},
      {"static_graph", c.static_graph},
      {"no_temporal_conv", c.no_temporal_conv},
  };
}

RunConfig merge_json(const RunConfig& base, const json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  const json known = to_json(base);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c = base;
  take(j, "train_csv", c.train_csv);
  take(j, "test_csv", c.test_csv);
  take(j, "checkpoint", c.checkpoint);
  take(j, "output_dir", c.output_dir);
  take(j, "label_column", c.label_column);
  take(j, "normalization", c.normalization);
  take(j, "window", c.window);
  take(j, "stride", c.stride);
  take(j, "val_fraction", c.val_fraction);
  take(j, "learning_rate", c.learning_rate);
  take(j, "lr_grid", c.lr_grid);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "batch_size", c.batch_size);
  take(j, "seed", c.seed);
  take(j, "grad_clip", c.grad_clip);
  take(j, "threads", c.threads);
  take(j, "k", c.k);
  take(j, "slots", c.slots);
  take(j, "dilation", c.dilation);
  take(j, "channels", c.channels);
  take(j, "tcn_layers", c.tcn_layers);
  take(j, "kernel_set", c.kernel_set);
  take(j, "embed_dim", c.embed_dim);
  take(j, "graph_dim", c.graph_dim);
  take(j, "temporal_dim", c.temporal_dim);
  take(j, "mlp_hidden", c.mlp_hidden);
  take(j, "period_per_window", c.period_per_window);
  take(j, "ma_window", c.ma_window);
  take(j, "threshold", c.threshold);
  take(j, "point_adjust", c.point_adjust);
  take(j, "time_offset", c.time_offset);
  take(j, "static_graph", c.static_graph);
  take(j, "no_temporal_conv", c.no_temporal_conv);
  return c;
}

RunConfig load_config_file(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return merge_json(base, j);
}

json model_config_json(const model::ModelConfig& m) {
  return {{"sensors", m.sensors},         {"window", m.window},
          {"embed_dim", m.embed_dim},     {"graph_dim", m.graph_dim},
          {"temporal_dim", m.temporal_dim}, {"channels", m.channels},
          {"dilation", m.dilation},       {"tcn_layers", m.tcn_layers},
          {"kernel_sizes", m.kernel_sizes}, {"mlp_hidden", m.mlp_hidden},
          {"slots", m.slots},             {"k", m.k},
          {"leaky_slope", m.leaky_slope}, {"ln_eps", m.ln_eps},
          {"use_temporal", m.use_temporal}};
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig m;
  m.sensors = j.at("sensors").get<Index>();
  m.window = j.at("window").get<Index>();
  m.embed_dim = j.at("embed_dim").get<Index>();
  m.graph_dim = j.at("graph_dim").get<Index>();
  m.temporal_dim = j.at("temporal_dim").get<Index>();
  m.channels = j.at("channels").get<Index>();
  m.dilation = j.at("dilation").get<Index>();
  m.tcn_layers = j.at("tcn_layers").get<Index>();
  m.kernel_sizes = j.at("kernel_sizes").get<std::array<Index, 3>>();
  m.mlp_hidden = j.at("mlp_hidden").get<Index>();
  m.slots = j.at("slots").get<Index>();
  m.k = j.at("k").get<Index>();
  m.leaky_slope = j.at("leaky_slope").get<double>();
  m.ln_eps = j.at("ln_eps").get<double>();
  m.use_temporal = j.at("use_temporal").get<bool>();
  return m;
}

std::string model_config_hash(const model::ModelConfig& config) { return fnv_hex(model_config_json(config).dump()); }

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  json params = json::object();
  json shapes = json::object();
  for (const auto& v : model::param_views(ck.params)) {
    params[v.name] = std::vector<double>(v.data, v.data + v.size());
    shapes[v.name] = {v.rows, v.cols};
  }
  const json j = {
      {"format", "pgma-checkpoint"},
      {"version", Checkpoint::kVersion},
      {"config_hash", model_config_hash(ck.model)},
      {"model", model_config_json(ck.model)},
      {"shapes", shapes},
      {"params", params},
      {"params_checksum", ck.params_checksum},
      {"period",
       {{"dominant_frequency", ck.period.dominant_frequency},
        {"period", ck.period.period},
        {"length", ck.period.length},
        {"aperiodic", ck.period.aperiodic},
        {"amplitudes", vector_json(ck.period.amplitudes)}}},
      {"normalization",
       {{"mode", data::to_string(ck.normalization.mode)},
        {"shift", vector_json(ck.normalization.shift)},
        {"scale", vector_json(ck.normalization.scale)}}},
      {"validation_errors", matrix_json(ck.validation_errors)},
      {"train_length", ck.train_length},
      {"period_per_window", ck.period_per_window},
      {"sensor_names", ck.sensor_names},
  };
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.value("format", "") != "pgma-checkpoint") throw DataError("not a pgma checkpoint: " + path.string());
    if (j.at("version").get<int>() != Checkpoint::kVersion) {
      throw DataError("unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint ck;
    ck.model = model_config_from_json(j.at("model"));
    ck.config_hash = j.at("config_hash").get<std::string>();
    if (ck.config_hash != model_config_hash(ck.model)) throw DataError("checkpoint config hash mismatch");

    ck.params = model::init_params(ck.model, 0);
    const auto& shapes = j.at("shapes");
    const auto& params = j.at("params");
    auto views = model::param_views(ck.params);
    if (shapes.size() != views.size() || params.size() != views.size()) {
      throw DataError("checkpoint parameter set does not match its model config");
    }
    for (auto& v : views) {
      if (!shapes.contains(v.name) || !params.contains(v.name)) {
        throw DataError("checkpoint is missing parameter '" + v.name + "'");
      }
      const auto shape = shapes.at(v.name).get<std::array<Index, 2>>();
      const auto values = params.at(v.name).get<std::vector<double>>();
      if (shape[0] != v.rows || shape[1] != v.cols || static_cast<Index>(values.size()) != v.size()) {
        throw DataError("checkpoint parameter '" + v.name + "' has shape " + std::to_string(shape[0]) + "x" +
                        std::to_string(shape[1]) + ", config implies " + std::to_string(v.rows) + "x" +
                        std::to_string(v.cols));
      }
      std::copy(values.begin(), values.end(), v.data);
    }
    ck.params_checksum = j.value("params_checksum", "");

    const auto& p = j.at("period");
    ck.period.dominant_frequency = p.at("dominant_frequency").get<Index>();
    ck.period.period = p.at("period").get<Index>();
    ck.period.length = p.at("length").get<Index>();
    ck.period.aperiodic = p.at("aperiodic").get<bool>();
    ck.period.amplitudes = vector_from_json(p.at("amplitudes"));

    const auto& nrm = j.at("normalization");
    ck.normalization.mode = data::parse_normalization_mode(nrm.at("mode").get<std::string>());
    ck.normalization.shift = vector_from_json(nrm.at("shift"));
    ck.normalization.scale = vector_from_json(nrm.at("scale"));

    ck.validation_errors = matrix_from_json(j.at("validation_errors"), "validation_errors");
    ck.train_length = j.at("train_length").get<Index>();
    ck.period_per_window = j.at("period_per_window").get<bool>();
    ck.sensor_names = j.at("sensor_names").get<std::vector<std::string>>();

    const Index n = ck.model.sensors;
    if (ck.normalization.shift.size() != n || ck.normalization.scale.size() != n ||
        ck.validation_errors.rows() != n || static_cast<Index>(ck.sensor_names.size()) != n) {
      throw DataError("checkpoint sensor metadata does not match the model config");
    }
    return ck;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint holds an invalid config: ") + e.what());
  }
}

std::vector<graph::Adjacency> checkpoint_graphs(const Checkpoint& ck) {
  return graph::build_slot_graphs(ck.params.embeddings, ck.model.k);
}

namespace {

Eigen::MatrixXd predict_windows(const model::Predictor& predictor, const data::WindowBatch& windows,
                                Index time_offset, Index period, Index slots, bool per_window) {
  Eigen::MatrixXd pred(windows.sensors, windows.size());
  for (Index b = 0; b < windows.size(); ++b) {
    const Index slot = train::window_slot(windows.windows[b], time_offset + windows.starts[b], period, slots,
                                          per_window);
    pred.col(b) = predictor.predict(windows.windows[b], slot);
  }
  return pred;
}

Eigen::MatrixXd stack_targets(const data::WindowBatch& windows) {
  Eigen::MatrixXd out(windows.sensors, windows.size());
  for (Index b = 0; b < windows.size(); ++b) out.col(b) = windows.targets[b];
  return out;
}

}  // namespace

FitOutput fit(const data::SeriesMatrix& raw_train, const RunConfig& config) {
  config.validate();
  raw_train.validate();
  const auto norm = data::fit_normalizer(raw_train, data::parse_normalization_mode(config.normalization));
  const auto train_n = norm.apply(raw_train);
  const auto period = spectral::detect_period(train_n);
  const auto tcfg = config.train_config(raw_train.sensors());

  const auto windows = data::make_windows(train_n, tcfg.model.window, tcfg.stride);
  const auto [train_w, val_w] = train::split_validation(windows, tcfg.val_fraction);

  FitOutput out;
  train::TrainResult result;
  if (config.lr_grid.empty()) {
    result = train::train_on_windows(train_w, val_w, period.period, tcfg);
  } else {
    auto grid = train::grid_search(train_n, period, tcfg, config.lr_grid, config.threads);
    result = std::move(grid.best);
    out.grid = std::move(grid.cells);
  }

  auto& ck = out.checkpoint;
  ck.model = result.config;
  ck.params = result.params;
  ck.period = period;
  ck.normalization = norm;
  ck.train_length = raw_train.length();
  ck.period_per_window = config.period_per_window;
  ck.sensor_names = raw_train.sensor_names;
  ck.config_hash = model_config_hash(ck.model);
  ck.params_checksum = result.report.checksum;

  const model::Predictor predictor(result.config, result.params, result.graphs);
  const auto val_pred = predict_windows(predictor, val_w, 0, period.period, ck.model.slots, ck.period_per_window);
  ck.validation_errors = scoring::sensor_errors(val_pred, stack_targets(val_w));
  out.report = std::move(result.report);
  return out;
}

ScoreOutput score(const Checkpoint& ck, const data::SeriesMatrix& raw_test, const RunConfig& config) {
  config.validate();
  raw_test.validate();
  if (raw_test.sensors() != ck.model.sensors) {
    throw DataError("test data has " + std::to_string(raw_test.sensors()) + " sensors, checkpoint expects " +
                    std::to_string(ck.model.sensors));
  }
  const auto mode = config.threshold_mode();
  if (mode.kind == scoring::ThresholdMode::Kind::best_f1 && !raw_test.has_labels()) {
    throw ConfigError("best_f1 thresholding requires a labeled test set");
  }

  const auto test_n = ck.normalization.apply(raw_test);
  const auto windows = data::make_windows(test_n, ck.model.window, 1);
  const Index offset = config.time_offset >= 0 ? static_cast<Index>(config.time_offset) : ck.train_length;
  const model::Predictor predictor(ck.model, ck.params, checkpoint_graphs(ck));
  const auto pred = predict_windows(predictor, windows, offset, ck.period.period, ck.model.slots,
                                    ck.period_per_window);

  ScoreOutput out;
  out.timestamps.reserve(static_cast<std::size_t>(windows.size()));
  for (Index b = 0; b < windows.size(); ++b) out.timestamps.push_back(windows.target_index(b));
  if (raw_test.has_labels()) {
    scoring::Labels truth;
    for (auto t : out.timestamps) truth.push_back((*raw_test.labels)[t]);
    out.truth = std::move(truth);
  }

  auto& tr = out.trace;
  tr.errors = scoring::sensor_errors(pred, stack_targets(windows));
  const auto cal = scoring::calibrate(ck.validation_errors);
  tr.sensor_scores = scoring::normalize_scores(tr.errors, cal);
  auto agg = scoring::aggregate_and_smooth(tr.sensor_scores, config.ma_window);
  tr.score = std::move(agg.score);
  tr.top_sensor = std::move(agg.top_sensor);
  tr.smoothed = std::move(agg.smoothed);
  out.validation_smoothed =
      scoring::aggregate_and_smooth(scoring::normalize_scores(ck.validation_errors, cal), config.ma_window).smoothed;

  auto thr = scoring::threshold_and_label(tr.smoothed, mode, &out.validation_smoothed,
                                          out.truth ? &*out.truth : nullptr);
  tr.predicted = std::move(thr.labels);
  tr.threshold = thr.threshold;
  if (out.truth) {
    out.pointwise = scoring::evaluate(tr.predicted, *out.truth, false);
    out.point_adjusted = scoring::evaluate(tr.predicted, *out.truth, true);
    out.pointwise->threshold = out.point_adjusted->threshold = tr.threshold;
    out.metrics = config.point_adjust ? out.point_adjusted : out.pointwise;
  }
  return out;
}

json to_json(const train::TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                      {"seconds", e.seconds}});
  }
  return {{"learning_rate", r.learning_rate}, {"initial_val_loss", r.initial_val_loss},
          {"epochs", epochs},                 {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best_val_loss}, {"stopped_early", r.stopped_early},
          {"wall_seconds", r.wall_seconds},   {"checksum", r.checksum}};
}

json to_json(const scoring::MetricsReport& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},   {"threshold", m.threshold},
          {"point_adjust", m.point_adjust}, {"tp", m.tp},   {"fp", m.fp},   {"fn", m.fn},
          {"tn", m.tn}};
}

}  // namespace pgma
