#pragma once

#include "pgma/pipeline.hpp"

#include <set>
#include <string>
#include <vector>

namespace pgma {

struct TrainTestSplit {
  data::SeriesMatrix train;
  data::SeriesMatrix test;
};

/// Generates one synthetic series and cuts it chronologically. Anomalies are
/// only injected after the cut so the training part stays clean.
TrainTestSplit synthetic_split(data::SyntheticOptions options, double train_fraction);

/// Fits on `train`, scores `test` and returns the F1 selected by
/// config.point_adjust. The test set must carry labels.
double fit_and_score_f1(const data::SeriesMatrix& train, const data::SeriesMatrix& test, const RunConfig& config);

enum class Variant { full, static_graph, no_temporal_conv };

std::string to_string(Variant v);
/// Accepts "full", "static-graph", "no-temporal-conv"; case-insensitive,
/// underscores allowed.
Variant parse_variant(const std::string& name);
RunConfig apply_variant(RunConfig config, Variant v);

struct SeedScores {
  std::vector<std::uint64_t> seeds;
  std::vector<double> f1;
  double mean() const;
};

struct AblationRow {
  Variant variant;
  SeedScores scores;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  spectral::PeriodProfile period;
  std::string threshold;
};

/// Trains every variant not in `skip` once per seed on the same data.
AblationReport run_ablation(const data::SeriesMatrix& train, const data::SeriesMatrix& test, const RunConfig& config,
                            const std::vector<std::uint64_t>& seeds, const std::set<Variant>& skip = {});

std::string format_table(const AblationReport& report);
nlohmann::json to_json(const AblationReport& report);

enum class SweepAxis { neighbors, filters };

std::vector<Index> default_sweep_values(SweepAxis axis);
/// neighbors sets k; filters sets the attention and temporal widths together.
RunConfig apply_sweep_value(RunConfig config, SweepAxis axis, Index value);

struct SweepRow {
  Index value;
  SeedScores scores;
};

std::vector<SweepRow> run_sweep(const data::SeriesMatrix& train, const data::SeriesMatrix& test,
                                const RunConfig& config, SweepAxis axis, const std::vector<Index>& values,
                                const std::vector<std::uint64_t>& seeds);

std::string sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace pgma
