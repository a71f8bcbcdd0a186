#include "pgma/experiments.hpp"

#include "pgma/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pgma {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

TrainTestSplit synthetic_split(data::SyntheticOptions options, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  const auto cut = static_cast<Index>(std::llround(train_fraction * static_cast<double>(options.length)));
  if (cut < 2 || options.length - cut < 2) throw ConfigError("train fraction leaves an empty split");
  options.clean_prefix = cut;
  const auto s = data::generate_synthetic_detailed(options).series;
  return {s.slice(0, cut), s.slice(cut, s.length())};
}

double fit_and_score_f1(const data::SeriesMatrix& train, const data::SeriesMatrix& test, const RunConfig& config) {
  if (!test.has_labels()) throw ConfigError("F1 needs a labeled test set");
  const auto fitted = fit(train, config);
  const auto scored = score(fitted.checkpoint, test, config);
  return scored.metrics->f1;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full:
      return "full";
    case Variant::static_graph:
      return "static-graph";
    case Variant::no_temporal_conv:
      return "no-temporal-conv";
  }
  return "full";
}

Variant parse_variant(const std::string& name) {
  std::string s = name;
  std::replace(s.begin(), s.end(), '_', '-');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "full") return Variant::full;
  if (s == "static-graph") return Variant::static_graph;
  if (s == "no-temporal-conv") return Variant::no_temporal_conv;
  throw ConfigError("unknown variant '" + name + "' (expected full, static-graph or no-temporal-conv)");
}

RunConfig apply_variant(RunConfig config, Variant v) {
  config.static_graph = v == Variant::static_graph;
  config.no_temporal_conv = v == Variant::no_temporal_conv;
  return config;
}

double SeedScores::mean() const {
  if (f1.empty()) return 0.0;
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(f1.size());
}

namespace {

SeedScores over_seeds(const data::SeriesMatrix& train, const data::SeriesMatrix& test, const RunConfig& config,
                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  SeedScores s;
  for (auto seed : seeds) {
    RunConfig c = config;
    c.seed = seed;
    s.seeds.push_back(seed);
    s.f1.push_back(fit_and_score_f1(train, test, c));
  }
  return s;
}

}  // namespace

AblationReport run_ablation(const data::SeriesMatrix& train, const data::SeriesMatrix& test, const RunConfig& config,
                            const std::vector<std::uint64_t>& seeds, const std::set<Variant>& skip) {
  config.validate();
  AblationReport report;
  report.threshold = config.threshold;
  const auto norm = data::fit_normalizer(train, data::parse_normalization_mode(config.normalization));
  report.period = spectral::detect_period(norm.apply(train));
  for (auto v : {Variant::full, Variant::static_graph, Variant::no_temporal_conv}) {
    if (skip.count(v)) continue;
    report.rows.push_back({v, over_seeds(train, test, apply_variant(config, v), seeds)});
  }
  return report;
}

std::string format_table(const AblationReport& report) {
  std::ostringstream out;
  out << "variant            mean_f1   per_seed\n";
  for (const auto& row : report.rows) {
    char line[64];
    std::snprintf(line, sizeof(line), "%-18s %.4f   ", to_string(row.variant).c_str(), row.scores.mean());
    out << line;
    for (std::size_t i = 0; i < row.scores.f1.size(); ++i) {
      char cell[32];
      std::snprintf(cell, sizeof(cell), "%s%.4f", i ? " " : "", row.scores.f1[i]);
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const AblationReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"variant", to_string(row.variant)},
                    {"mean_f1", row.scores.mean()},
                    {"seeds", row.scores.seeds},
                    {"f1", row.scores.f1}});
  }
  return {{"rows", rows},
          {"threshold", report.threshold},
          {"period", report.period.period},
          {"dominant_frequency", report.period.dominant_frequency},
          {"aperiodic", report.period.aperiodic}};
}

std::vector<Index> default_sweep_values(SweepAxis axis) {
  if (axis == SweepAxis::neighbors) return {10, 15, 20, 25, 30, 35, 40};
  return {4, 8, 16, 32, 64, 128};
}

RunConfig apply_sweep_value(RunConfig config, SweepAxis axis, Index value) {
  if (value < 1) throw ConfigError("sweep values must be positive");
  if (axis == SweepAxis::neighbors) {
    config.k = value;
  } else {
    config.graph_dim = value;
    config.temporal_dim = value;
  }
  return config;
}

std::vector<SweepRow> run_sweep(const data::SeriesMatrix& train, const data::SeriesMatrix& test,
                                const RunConfig& config, SweepAxis axis, const std::vector<Index>& values,
                                const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (Index v : values) rows.push_back({v, over_seeds(train, test, apply_sweep_value(config, axis, v), seeds)});
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, SweepAxis axis) {
  std::ostringstream out;
  out << (axis == SweepAxis::neighbors ? "k" : "filters") << ",mean_f1";
  const std::size_t n = rows.empty() ? 0 : rows.front().scores.seeds.size();
  for (std::size_t i = 0; i < n; ++i) out << ",f1_seed" << rows.front().scores.seeds[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.value << ',' << format_double(r.scores.mean());
    for (double f : r.scores.f1) out << ',' << format_double(f);
    out << '\n';
  }
  return out.str();
}

}  // namespace pgma
