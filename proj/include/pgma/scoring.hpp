#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pgma::scoring {

using Eigen::Index;
using Labels = std::vector<std::uint8_t>;

/// Per-sensor robust normalizers fitted on validation errors.
struct ScoreCalibration {
  Eigen::VectorXd median;
  Eigen::VectorXd iqr;
  double epsilon = 1e-6;
};

struct ScoreTrace {
  Eigen::MatrixXd errors;        // N x T
  Eigen::MatrixXd sensor_scores;  // N x T
  Eigen::VectorXd score;          // max over sensors
  std::vector<Index> top_sensor;  // argmax sensor per timestamp
  Eigen::VectorXd smoothed;
  Labels predicted;
  double threshold = 0.0;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  bool point_adjust = false;
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;
  Index tn = 0;
};

/// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::span<const double> values, double q);

/// |observed - predicted| element-wise.
Eigen::MatrixXd sensor_errors(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed);

/// Median and IQR per sensor row. Needs at least 4 timestamps.
ScoreCalibration calibrate(const Eigen::MatrixXd& validation_errors, double epsilon = 1e-6);

/// (Err - median) / (IQR + epsilon) per sensor.
Eigen::MatrixXd normalize_scores(const Eigen::MatrixXd& errors, const ScoreCalibration& calibration);

struct Aggregated {
  Eigen::VectorXd score;
  std::vector<Index> top_sensor;
  Eigen::VectorXd smoothed;
};

/// Max over sensors, then a trailing moving average (shorter prefix at the
/// start).
Aggregated aggregate_and_smooth(const Eigen::MatrixXd& sensor_scores, Index ma_window);

struct ThresholdMode {
  enum class Kind { max_validation, fixed, best_f1 };
  Kind kind = Kind::max_validation;
  double value = 0.0;  // for fixed

  /// Accepts "max_validation", "fixed:<v>", "best_f1" (dashes allowed).
  static ThresholdMode parse(const std::string& text);
  std::string to_string() const;
};

struct Thresholded {
  Labels labels;
  double threshold = 0.0;
};

/// Labels t as anomalous iff smoothed(t) > threshold. max_validation needs the
/// validation smoothed scores, best_f1 the true labels.
Thresholded threshold_and_label(const Eigen::VectorXd& smoothed, const ThresholdMode& mode,
                                const Eigen::VectorXd* validation_smoothed = nullptr,
                                const Labels* truth = nullptr);

/// Labels with a point-adjusted prediction: any hit inside a true segment
/// marks the whole segment.
Labels point_adjust(const Labels& predicted, const Labels& truth);

MetricsReport evaluate(const Labels& predicted, const Labels& truth, bool point_adjust = false);

}  // namespace pgma::scoring
