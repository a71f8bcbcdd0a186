#pragma once

#include "pgma/data.hpp"
#include "pgma/errors.hpp"
#include "pgma/graph.hpp"
#include "pgma/model.hpp"
#include "pgma/spectral.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pgma::train {

using Eigen::Index;

struct TrainConfig {
  double learning_rate = 0.0025;
  Index max_epochs = 30;
  Index patience = 10;
  Index batch_size = 32;
  std::uint64_t seed = 7;
  Index stride = 1;
  double val_fraction = 0.1;  // chronological tail of the training windows
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // global-norm clip; 0 disables
  int threads = 1;
  bool period_per_window = false;
  model::ModelConfig model;

  void validate() const;
};

/// The learning rates tried by `grid_search` when no grid is given.
inline const std::vector<double> kDefaultLearningRates{0.01, 0.005, 0.0025, 0.00125};

struct AdamState {
  model::ModelParams m;
  model::ModelParams v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const model::ModelParams& params);

/// One bias-corrected Adam update. Throws NumericError naming the first
/// parameter tensor holding a non-finite gradient; params are untouched then.
void adam_step(model::ModelParams& params, const model::ModelParams& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Rescales grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(model::ModelParams& grads, double max_norm);

struct EpochRecord {
  Index epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  double learning_rate = 0.0;
  double initial_val_loss = 0.0;  // before any update
  std::vector<EpochRecord> epochs;
  Index best_epoch = 0;  // 0 means the initial parameters were never beaten
  double best_val_loss = 0.0;
  bool stopped_early = false;
  double wall_seconds = 0.0;
  std::string checksum;  // of the returned parameters
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, TrainReport report) : NumericError(what), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

/// FNV-1a over the raw parameter bytes, as 16 hex digits.
std::string checksum(const model::ModelParams& params);

/// Slot of a window: phase bin of its absolute start time within the training
/// period, or within the window's own detected period when per_window is set.
Index window_slot(const Eigen::MatrixXd& window, Index absolute_start, Index period, Index slots, bool per_window);

/// Chronological split of a window batch into (train, validation).
std::pair<data::WindowBatch, data::WindowBatch> split_validation(const data::WindowBatch& windows,
                                                                 double val_fraction);

struct TrainResult {
  model::ModelConfig config;
  model::ModelParams params;
  std::vector<graph::Adjacency> graphs;  // rebuilt from the returned embeddings
  TrainReport report;
};

/// Model samples for a window batch whose first window starts at absolute
/// time `time_offset` plus its own start index.
std::vector<model::Sample> make_samples(const data::WindowBatch& windows, Index time_offset, Index period,
                                        Index slots, bool per_window);

/// Trains on pre-built windows. Each epoch rebuilds the slot graphs from the
/// current embeddings, then runs shuffled Adam steps with that snapshot.
/// Returns the parameters with the lowest validation loss.
TrainResult train_on_windows(const data::WindowBatch& train_windows, const data::WindowBatch& val_windows,
                             Index period, const TrainConfig& config);

/// Windows the normalized series, holds out the validation tail and trains.
TrainResult train(const data::SeriesMatrix& normalized_train, const spectral::PeriodProfile& period,
                  const TrainConfig& config);

struct GridCell {
  double learning_rate = 0.0;
  bool ok = false;
  std::string error;
  TrainReport report;
};

struct GridResult {
  TrainConfig best_config;
  TrainResult best;
  std::vector<GridCell> cells;
};

/// Trains once per learning rate and keeps the lowest best-validation loss;
/// ties go to the lower rate. Failed cells are recorded and skipped. Cells run
/// on up to `workers` threads.
GridResult grid_search(const data::SeriesMatrix& normalized_train, const spectral::PeriodProfile& period,
                       const TrainConfig& config, const std::vector<double>& learning_rates, int workers = 1);

}  // namespace pgma::train
