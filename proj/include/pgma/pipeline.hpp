#pragma once

#include "pgma/data.hpp"
#include "pgma/model.hpp"
#include "pgma/scoring.hpp"
#include "pgma/spectral.hpp"
#include "pgma/training.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pgma {

using Eigen::Index;

/// Everything a run needs, with a flat JSON representation. Precedence when
/// resolving: command-line flag > config file > the defaults below.
struct RunConfig {
  // paths
  std::string train_csv;
  std::string test_csv;
  std::string checkpoint = "pgma_checkpoint.json";
  std::string output_dir = "pgma_out";
  std::string label_column = "label";

  // data
  std::string normalization = "minmax";
  Index window = 64;
  Index stride = 1;
  double val_fraction = 0.1;

  // training
  double learning_rate = 0.0025;
  std::vector<double> lr_grid;  // empty: train once at learning_rate
  Index max_epochs = 30;
  Index patience = 10;
  Index batch_size = 32;
  std::uint64_t seed = 7;
  double grad_clip = 5.0;
  int threads = 1;

  // model
  Index k = 15;
  Index slots = 4;
  Index dilation = 1;
  Index channels = 8;
  Index tcn_layers = 1;
  std::string kernel_set = "2,3,5";
  Index embed_dim = 64;
  Index graph_dim = 64;
  Index temporal_dim = 32;
  Index mlp_hidden = 128;
  bool period_per_window = false;

  // scoring
  Index ma_window = 3;
  std::string threshold = "max_validation";
  bool point_adjust = false;
  std::int64_t time_offset = -1;  // absolute time of the first test row; -1 continues the training series

  // ablation switches
  bool static_graph = false;
  bool no_temporal_conv = false;

  void validate() const;
  model::ModelConfig model_config(Index sensors) const;
  train::TrainConfig train_config(Index sensors) const;
  scoring::ThresholdMode threshold_mode() const { return scoring::ThresholdMode::parse(threshold); }
};

nlohmann::json to_json(const RunConfig& config);
/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
RunConfig merge_json(const RunConfig& base, const nlohmann::json& j);
RunConfig load_config_file(const std::filesystem::path& path, const RunConfig& base = {});

std::array<Index, 3> parse_kernel_set(const std::string& text);

/// Versioned container for a trained detector.
struct Checkpoint {
  static constexpr int kVersion = 1;

  model::ModelConfig model;
  model::ModelParams params;
  spectral::PeriodProfile period;
  data::NormalizationStats normalization;
  Eigen::MatrixXd validation_errors;  // N x T_val, feeds score calibration
  Index train_length = 0;
  bool period_per_window = false;
  std::vector<std::string> sensor_names;
  std::string config_hash;
  std::string params_checksum;
};

std::string model_config_hash(const model::ModelConfig& config);
nlohmann::json model_config_json(const model::ModelConfig& config);
model::ModelConfig model_config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws DataError on unknown versions, hash mismatches or parameter shapes
/// that disagree with the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct FitOutput {
  Checkpoint checkpoint;
  train::TrainReport report;
  std::vector<train::GridCell> grid;  // empty unless a grid was searched
};

/// Normalizes, detects the period, trains (or grid-searches) and packages the
/// best model with its validation errors.
FitOutput fit(const data::SeriesMatrix& raw_train, const RunConfig& config);

struct ScoreOutput {
  std::vector<Index> timestamps;  // test row of every scored column
  scoring::ScoreTrace trace;
  Eigen::VectorXd validation_smoothed;
  std::optional<scoring::Labels> truth;
  std::optional<scoring::MetricsReport> metrics;           // per config.point_adjust
  std::optional<scoring::MetricsReport> pointwise;
  std::optional<scoring::MetricsReport> point_adjusted;
};

/// Forecasts every test window, applies median/IQR scoring calibrated on the
/// checkpoint's validation errors, smooths, thresholds and evaluates.
ScoreOutput score(const Checkpoint& checkpoint, const data::SeriesMatrix& raw_test, const RunConfig& config);

/// Rebuilds the per-slot adjacencies of a checkpoint.
std::vector<graph::Adjacency> checkpoint_graphs(const Checkpoint& checkpoint);

nlohmann::json to_json(const train::TrainReport& report);
nlohmann::json to_json(const scoring::MetricsReport& metrics);

}  // namespace pgma
