#include "pgma/data.hpp"

#include "pgma/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace pgma::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    cells.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

std::optional<double> parse_double(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

SeriesMatrix SeriesMatrix::slice(Index begin, Index end) const {
  if (begin < 0 || end > length() || begin >= end) {
    throw DataError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") out of range for length " + std::to_string(length()));
  }
  SeriesMatrix out;
  out.values = values.middleCols(begin, end - begin);
  out.sensor_names = sensor_names;
  if (labels) out.labels.emplace(labels->begin() + begin, labels->begin() + end);
  return out;
}

void SeriesMatrix::validate() const {
  if (sensors() < 1) throw DataError("series has no sensors");
  if (length() < 2) throw DataError("series needs at least 2 timestamps, got " + std::to_string(length()));
  if (!values.allFinite()) throw DataError("series contains non-finite values");
  if (static_cast<Index>(sensor_names.size()) != sensors()) {
    throw DataError("sensor name count does not match sensor count");
  }
  if (labels) {
    if (static_cast<Index>(labels->size()) != length()) throw DataError("label length does not match series length");
    for (auto l : *labels) {
      if (l > 1) throw DataError("labels must be 0 or 1");
    }
  }
}

SeriesMatrix ingest_csv(const std::filesystem::path& path, const std::optional<std::string>& label_column,
                        IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV file is empty: " + path.string());
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_row(line);

  const std::string wanted_label = label_column.value_or("label");
  std::optional<std::size_t> label_idx;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == wanted_label) {
      label_idx = c;
    } else {
      names.emplace_back(header[c]);
    }
  }
  if (label_column && !label_idx) {
    throw DataError("label column '" + *label_column + "' not found in " + path.string());
  }
  if (names.empty()) throw DataError("CSV has no data columns: " + path.string());

  std::vector<double> flat;  // row-major
  std::vector<std::uint8_t> labels;
  IngestStats local;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_row(line);
    if (cells.size() != header.size()) {
      throw DataError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(header.size()));
    }
    std::vector<double> parsed;
    parsed.reserve(names.size());
    bool finite = true;
    std::uint8_t label = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_double(cells[c]);
      if (!value) {
        throw DataError("non-numeric cell '" + std::string(cells[c]) + "' at row " + std::to_string(row) +
                        ", column " + std::to_string(c + 1));
      }
      if (label_idx && c == *label_idx) {
        if (*value != 0.0 && *value != 1.0) {
          throw DataError("label at row " + std::to_string(row) + " must be 0 or 1");
        }
        label = static_cast<std::uint8_t>(*value);
      } else {
        finite = finite && std::isfinite(*value);
        parsed.push_back(*value);
      }
    }
    ++local.rows_read;
    if (!finite) {
      ++local.rows_rejected;
      continue;
    }
    flat.insert(flat.end(), parsed.begin(), parsed.end());
    if (label_idx) labels.push_back(label);
  }

  const auto n = static_cast<Index>(names.size());
  const auto t = static_cast<Index>(flat.size()) / n;
  if (t < 2) throw DataError("CSV needs at least 2 usable rows: " + path.string());

  SeriesMatrix series;
  series.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                      flat.data(), t, n)
                      .transpose();
  series.sensor_names = std::move(names);
  if (label_idx) series.labels = std::move(labels);
  if (stats) *stats = local;
  return series;
}

void write_csv(const std::filesystem::path& path, const SeriesMatrix& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file: " + path.string());
  for (Index i = 0; i < series.sensors(); ++i) {
    if (i) out << ',';
    out << series.sensor_names[i];
  }
  if (series.labels) out << ",label";
  out << '\n';
  for (Index t = 0; t < series.length(); ++t) {
    for (Index i = 0; i < series.sensors(); ++i) {
      if (i) out << ',';
      out << format_double(series.values(i, t));
    }
    if (series.labels) out << ',' << static_cast<int>((*series.labels)[t]);
    out << '\n';
  }
}

NormalizationMode parse_normalization_mode(const std::string& name) {
  if (name == "minmax") return NormalizationMode::minmax;
  if (name == "zscore") return NormalizationMode::zscore;
  throw ConfigError("unknown normalization mode '" + name + "' (expected minmax or zscore)");
}

std::string to_string(NormalizationMode mode) {
  return mode == NormalizationMode::minmax ? "minmax" : "zscore";
}

NormalizationStats fit_normalizer(const SeriesMatrix& train, NormalizationMode mode) {
  if (train.length() < 2) throw DataError("normalizer needs at least 2 timestamps");
  NormalizationStats stats;
  stats.mode = mode;
  const Index n = train.sensors();
  stats.shift.resize(n);
  stats.scale.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto row = train.values.row(i);
    if (mode == NormalizationMode::minmax) {
      stats.shift(i) = row.minCoeff();
      stats.scale(i) = row.maxCoeff() - row.minCoeff();
    } else {
      const double mean = row.mean();
      stats.shift(i) = mean;
      stats.scale(i) = std::sqrt((row.array() - mean).square().mean());
    }
  }
  return stats;
}

Eigen::MatrixXd NormalizationStats::apply(const Eigen::MatrixXd& values) const {
  if (values.rows() != shift.size()) throw DataError("normalizer sensor count mismatch");
  Eigen::MatrixXd out(values.rows(), values.cols());
  for (Index i = 0; i < values.rows(); ++i) {
    if (scale(i) > 0.0) {
      out.row(i) = (values.row(i).array() - shift(i)) / scale(i);
    } else {
      out.row(i).setZero();
    }
  }
  return out;
}

Eigen::MatrixXd NormalizationStats::invert(const Eigen::MatrixXd& normalized) const {
  if (normalized.rows() != shift.size()) throw DataError("normalizer sensor count mismatch");
  Eigen::MatrixXd out(normalized.rows(), normalized.cols());
  for (Index i = 0; i < normalized.rows(); ++i) {
    out.row(i) = normalized.row(i).array() * scale(i) + shift(i);
  }
  return out;
}

SeriesMatrix NormalizationStats::apply(const SeriesMatrix& series) const {
  SeriesMatrix out = series;
  out.values = apply(series.values);
  return out;
}

WindowBatch WindowBatch::subset(Index begin, Index end) const {
  WindowBatch out;
  out.sensors = sensors;
  out.window = window;
  out.starts.assign(starts.begin() + begin, starts.begin() + end);
  out.windows.assign(windows.begin() + begin, windows.begin() + end);
  out.targets.assign(targets.begin() + begin, targets.begin() + end);
  return out;
}

WindowBatch make_windows(const SeriesMatrix& series, Index w, Index stride) {
  if (w < 1 || stride < 1) throw ConfigError("window length and stride must be positive");
  const Index t = series.length();
  if (w + 1 > t) {
    throw DataError("window length " + std::to_string(w) + " leaves no target timestamp in a series of length " +
                    std::to_string(t));
  }
  WindowBatch batch;
  batch.sensors = series.sensors();
  batch.window = w;
  const Index count = (t - w - 1) / stride + 1;
  batch.starts.reserve(count);
  batch.windows.reserve(count);
  batch.targets.reserve(count);
  for (Index b = 0; b < count; ++b) {
    const Index start = b * stride;
    batch.starts.push_back(start);
    batch.windows.emplace_back(series.values.middleCols(start, w));
    batch.targets.emplace_back(series.values.col(start + w));
  }
  return batch;
}

SyntheticSeries generate_synthetic_detailed(const SyntheticOptions& o) {
  if (o.period < 2) throw ConfigError("synthetic period must be at least 2");
  if (!(o.anomaly_rate >= 0.0 && o.anomaly_rate <= 0.2)) {
    throw ConfigError("synthetic anomaly rate must lie in [0, 0.2]");
  }
  if (o.sensors < 1 || o.length < 2) throw ConfigError("synthetic series needs >= 1 sensor and >= 2 timestamps");
  if (o.clean_prefix < 0 || o.clean_prefix > o.length) throw ConfigError("clean prefix out of range");

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double kNoise = 0.05;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  const Index n = o.sensors;
  const Index group0 = (n + 1) / 2;
  Eigen::VectorXd amplitude(n), phase(n), offset(n);
  for (Index i = 0; i < n; ++i) {
    amplitude(i) = 0.8 + 0.4 * unit(rng);
    phase(i) = 0.6 * (unit(rng) - 0.5);
    offset(i) = unit(rng) - 0.5;
  }

  SyntheticSeries out;
  out.noise_sigma = kNoise;
  out.amplitude = amplitude;
  out.clean.resize(n, o.length);
  for (Index t = 0; t < o.length; ++t) {
    const double theta = kTwoPi * static_cast<double>(t) / static_cast<double>(o.period);
    for (Index i = 0; i < n; ++i) {
      const double th = theta + phase(i);
      const double shape = i < group0 ? std::sin(th) + 0.35 * std::sin(2.0 * th + 0.5)
                                      : std::sin(th + 2.0) + 0.3 * std::sin(3.0 * th);
      out.clean(i, t) = offset(i) + amplitude(i) * (shape + kNoise * gauss(rng));
    }
  }

  std::vector<std::uint8_t> labels(o.length, 0);
  Eigen::MatrixXd values = out.clean;
  const Index span = o.length - o.clean_prefix;
  const auto target = static_cast<Index>(std::llround(o.anomaly_rate * static_cast<double>(span)));
  Index placed = 0;
  int failures = 0;
  while (placed < target && failures < 10000) {
    Index len = std::min<Index>(3 + static_cast<Index>(unit(rng) * 10.0), target - placed);
    const Index room = span - len;
    if (room < 0) break;
    const Index start = o.clean_prefix + static_cast<Index>(unit(rng) * static_cast<double>(room + 1));
    // Keep one clean timestamp between events so segments stay distinct.
    bool free = true;
    for (Index t = std::max<Index>(0, start - 1); t < std::min(o.length, start + len + 1); ++t) {
      if (labels[t]) free = false;
    }
    if (!free || start + len > o.length) {
      ++failures;
      continue;
    }
    const bool spike = unit(rng) < 0.5;
    const double magnitude = spike ? 0.8 + 0.7 * unit(rng) : 0.5 + 0.5 * unit(rng);
    const Index affected = 1 + static_cast<Index>(unit(rng) * static_cast<double>(std::max<Index>(1, n / 3)));
    std::vector<Index> order(n);
    for (Index i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    const double half = 0.5 * static_cast<double>(len - 1);
    for (Index a = 0; a < std::min(affected, n); ++a) {
      const Index i = order[a];
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      for (Index t = start; t < start + len; ++t) {
        double shape = 1.0;
        if (spike && half > 0.0) shape = 1.0 - 0.5 * std::abs(static_cast<double>(t - start) - half) / half;
        values(i, t) += sign * magnitude * shape * amplitude(i);
      }
    }
    for (Index t = start; t < start + len; ++t) labels[t] = 1;
    placed += len;
  }

  out.series.values = std::move(values);
  out.series.labels = std::move(labels);
  out.series.sensor_names.reserve(n);
  for (Index i = 0; i < n; ++i) out.series.sensor_names.push_back("s" + std::to_string(i));
  return out;
}

SeriesMatrix generate_synthetic(Index n_sensors, Index length, Index period, double anomaly_rate,
                                std::uint64_t seed) {
  SyntheticOptions o;
  o.sensors = n_sensors;
  o.length = length;
  o.period = period;
  o.anomaly_rate = anomaly_rate;
  o.seed = seed;
  return generate_synthetic_detailed(o).series;
}

}  // namespace pgma::data
