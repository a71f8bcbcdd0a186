#include "pgma/scoring.hpp"

#include "pgma/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

namespace pgma::scoring {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Eigen::MatrixXd sensor_errors(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& observed) {
  if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols()) {
    throw DataError("prediction and observation shapes differ");
  }
  return (observed - predicted).cwiseAbs();
}

ScoreCalibration calibrate(const Eigen::MatrixXd& validation_errors, double epsilon) {
  if (validation_errors.cols() < 4) {
    throw DataError("calibration needs at least 4 validation timestamps, got " +
                    std::to_string(validation_errors.cols()));
  }
  ScoreCalibration cal;
  cal.epsilon = epsilon;
  const Index n = validation_errors.rows();
  cal.median.resize(n);
  cal.iqr.resize(n);
  std::vector<double> row(static_cast<std::size_t>(validation_errors.cols()));
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < validation_errors.cols(); ++t) row[t] = validation_errors(i, t);
    cal.median(i) = quantile(row, 0.5);
    cal.iqr(i) = quantile(row, 0.75) - quantile(row, 0.25);
  }
  return cal;
}

Eigen::MatrixXd normalize_scores(const Eigen::MatrixXd& errors, const ScoreCalibration& cal) {
  if (errors.rows() != cal.median.size()) throw DataError("calibration sensor count mismatch");
  Eigen::MatrixXd out(errors.rows(), errors.cols());
  for (Index i = 0; i < errors.rows(); ++i) {
    out.row(i) = (errors.row(i).array() - cal.median(i)) / (cal.iqr(i) + cal.epsilon);
  }
  return out;
}

Aggregated aggregate_and_smooth(const Eigen::MatrixXd& sensor_scores, Index ma_window) {
  if (ma_window < 1) throw ConfigError("moving-average window must be >= 1");
  const Index t_len = sensor_scores.cols();
  Aggregated out;
  out.score.resize(t_len);
  out.top_sensor.resize(static_cast<std::size_t>(t_len));
  out.smoothed.resize(t_len);
  for (Index t = 0; t < t_len; ++t) {
    Index arg = 0;
    out.score(t) = sensor_scores.col(t).maxCoeff(&arg);
    out.top_sensor[t] = arg;
  }
  for (Index t = 0; t < t_len; ++t) {
    const Index begin = std::max<Index>(0, t - ma_window + 1);
    out.smoothed(t) = out.score.segment(begin, t - begin + 1).mean();
  }
  return out;
}

ThresholdMode ThresholdMode::parse(const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), '-', '_');
  ThresholdMode mode;
  if (s == "max_validation") return mode;
  if (s == "best_f1") {
    mode.kind = Kind::best_f1;
    return mode;
  }
  if (s.rfind("fixed:", 0) == 0) {
    const std::string num = text.substr(6);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (ec != std::errc() || ptr != num.data() + num.size() || num.empty()) {
      throw ConfigError("bad fixed threshold value '" + num + "'");
    }
    mode.kind = Kind::fixed;
    mode.value = v;
    return mode;
  }
  throw ConfigError("unknown threshold mode '" + text + "' (expected max_validation, fixed:<v> or best_f1)");
}

std::string ThresholdMode::to_string() const {
  switch (kind) {
    case Kind::max_validation:
      return "max_validation";
    case Kind::best_f1:
      return "best_f1";
    case Kind::fixed: {
      char buf[64];
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
      return "fixed:" + std::string(buf, ptr);
    }
  }
  return "max_validation";
}

namespace {

Labels above(const Eigen::VectorXd& smoothed, double threshold) {
  Labels labels(static_cast<std::size_t>(smoothed.size()));
  for (Index t = 0; t < smoothed.size(); ++t) labels[t] = smoothed(t) > threshold ? 1 : 0;
  return labels;
}

double f1_of(Index tp, Index fp, Index fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

Thresholded threshold_and_label(const Eigen::VectorXd& smoothed, const ThresholdMode& mode,
                                const Eigen::VectorXd* validation_smoothed, const Labels* truth) {
  Thresholded out;
  switch (mode.kind) {
    case ThresholdMode::Kind::fixed:
      out.threshold = mode.value;
      break;
    case ThresholdMode::Kind::max_validation:
      if (!validation_smoothed || validation_smoothed->size() == 0) {
        throw ConfigError("max_validation thresholding needs validation scores");
      }
      out.threshold = validation_smoothed->maxCoeff();
      break;
    case ThresholdMode::Kind::best_f1: {
      if (!truth) throw ConfigError("best_f1 thresholding needs ground-truth labels");
      if (static_cast<Index>(truth->size()) != smoothed.size()) throw DataError("label length mismatch");
      if (smoothed.size() == 0) break;
      // Sweep distinct values from high to low; at candidate v the positives
      // are exactly the timestamps scoring strictly above v.
      std::vector<Index> order(static_cast<std::size_t>(smoothed.size()));
      std::iota(order.begin(), order.end(), Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return smoothed(a) > smoothed(b); });
      Index positives_true = 0;
      for (auto l : *truth) positives_true += l;
      Index tp = 0, fp = 0;
      double best_f1 = -1.0;
      std::size_t k = 0;
      while (k < order.size()) {
        const double v = smoothed(order[k]);
        const double f1 = f1_of(tp, fp, positives_true - tp);
        if (f1 >= best_f1) {  // >= keeps the lowest threshold among ties
          best_f1 = f1;
          out.threshold = v;
        }
        while (k < order.size() && smoothed(order[k]) == v) {
          if ((*truth)[order[k]]) {
            ++tp;
          } else {
            ++fp;
          }
          ++k;
        }
      }
      // Finally every timestamp flagged.
      if (f1_of(tp, fp, positives_true - tp) > best_f1) {
        out.threshold = std::nextafter(smoothed.minCoeff(), -std::numeric_limits<double>::infinity());
      }
      break;
    }
  }
  out.labels = above(smoothed, out.threshold);
  return out;
}

Labels point_adjust(const Labels& predicted, const Labels& truth) {
  if (predicted.size() != truth.size()) throw DataError("label length mismatch");
  Labels adjusted = predicted;
  std::size_t t = 0;
  while (t < truth.size()) {
    if (!truth[t]) {
      ++t;
      continue;
    }
    std::size_t end = t;
    bool hit = false;
    for (; end < truth.size() && truth[end]; ++end) {
      if (predicted[end]) hit = true;
    }
    if (hit) std::fill(adjusted.begin() + static_cast<std::ptrdiff_t>(t), adjusted.begin() + static_cast<std::ptrdiff_t>(end), 1);
    t = end;
  }
  return adjusted;
}

MetricsReport evaluate(const Labels& predicted, const Labels& truth, bool adjust) {
  if (predicted.size() != truth.size()) {
    throw DataError("prediction length " + std::to_string(predicted.size()) + " differs from label length " +
                    std::to_string(truth.size()));
  }
  const Labels pred = adjust ? point_adjust(predicted, truth) : predicted;
  MetricsReport r;
  r.point_adjust = adjust;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] > 1) throw DataError("true labels must be 0 or 1");
    if (pred[t] && truth[t]) ++r.tp;
    else if (pred[t]) ++r.fp;
    else if (truth[t]) ++r.fn;
    else ++r.tn;
  }
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

}  // namespace pgma::scoring
