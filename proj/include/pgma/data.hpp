#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pgma::data {

using Eigen::Index;

/// An N x T multivariate series. Column t holds the readings of all N sensors
/// at timestamp t.
struct SeriesMatrix {
  Eigen::MatrixXd values;
  std::optional<std::vector<std::uint8_t>> labels;
  std::vector<std::string> sensor_names;

  Index sensors() const { return values.rows(); }
  Index length() const { return values.cols(); }
  bool has_labels() const { return labels.has_value(); }

  /// Timestamps [begin, end). Labels and names follow.
  SeriesMatrix slice(Index begin, Index end) const;

  /// Throws DataError when a structural invariant is broken.
  void validate() const;
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_rejected = 0;  // rows holding NaN or Inf
};

/// Reads a CSV with a header row of sensor names. A column named
/// `label_column` (default "label") becomes the label vector when present;
/// an explicitly requested label column that is missing is an error.
SeriesMatrix ingest_csv(const std::filesystem::path& path,
                        const std::optional<std::string>& label_column = std::nullopt,
                        IngestStats* stats = nullptr);

/// Writes the same format `ingest_csv` reads. Values are printed with
/// round-trip precision.
void write_csv(const std::filesystem::path& path, const SeriesMatrix& series);

enum class NormalizationMode { minmax, zscore };

NormalizationMode parse_normalization_mode(const std::string& name);
std::string to_string(NormalizationMode mode);

/// Per-sensor affine map fitted on training data: y = (x - shift) / scale.
/// For minmax, shift is the minimum and scale the range; for zscore, the mean
/// and the population standard deviation. A zero scale marks a constant
/// sensor, which normalizes to 0.
struct NormalizationStats {
  NormalizationMode mode = NormalizationMode::minmax;
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& normalized) const;
  SeriesMatrix apply(const SeriesMatrix& series) const;
};

NormalizationStats fit_normalizer(const SeriesMatrix& train, NormalizationMode mode);

/// Sliding windows with one-step-ahead targets. Window b covers timestamps
/// [start_b, start_b + w) and its target is the column at start_b + w.
struct WindowBatch {
  Index sensors = 0;
  Index window = 0;
  std::vector<Index> starts;
  std::vector<Eigen::MatrixXd> windows;  // each N x w
  std::vector<Eigen::VectorXd> targets;  // each N

  Index size() const { return static_cast<Index>(starts.size()); }
  Index target_index(Index b) const { return starts[b] + window; }

  /// Windows [begin, end) as a new batch.
  WindowBatch subset(Index begin, Index end) const;
};

WindowBatch make_windows(const SeriesMatrix& series, Index w, Index stride = 1);

struct SyntheticOptions {
  Index sensors = 8;
  Index length = 4800;
  Index period = 24;
  double anomaly_rate = 0.03;
  std::uint64_t seed = 7;
  // Anomalies are only placed at t >= clean_prefix so that a leading
  // training segment can stay anomaly-free.
  Index clean_prefix = 0;
};

/// Result of the synthetic generator. `clean` holds the signal without
/// injected anomalies (noise included) so tests can measure deviations.
struct SyntheticSeries {
  SeriesMatrix series;
  Eigen::MatrixXd clean;
  double noise_sigma = 0.0;  // relative to unit amplitude
  Eigen::VectorXd amplitude;
};

/// Two groups of phase-shifted periodic sensors plus Gaussian noise with
/// sigma = 0.05 * amplitude. Anomalies (short spikes and level shifts on a
/// random subset of sensors) cover round(anomaly_rate * (length -
/// clean_prefix)) labeled timestamps. Deterministic given the seed.
SyntheticSeries generate_synthetic_detailed(const SyntheticOptions& options);

SeriesMatrix generate_synthetic(Index n_sensors, Index length, Index period,
                                double anomaly_rate, std::uint64_t seed);

}  // namespace pgma::data
