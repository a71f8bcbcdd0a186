#include "pgma/data.hpp"
#include "pgma/errors.hpp"
#include "pgma/graph.hpp"
#include "pgma/pipeline.hpp"
#include "pgma/scoring.hpp"
#include "pgma/spectral.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace pgma;

namespace {

RunConfig config_from(const std::string& json_text) {
  if (json_text.empty()) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  auto c = merge_json(RunConfig{}, j);
  c.validate();
  return c;
}

py::dict metrics_dict(const scoring::MetricsReport& m) {
  py::dict d;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["threshold"] = m.threshold;
  d["point_adjust"] = m.point_adjust;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["fn"] = m.fn;
  d["tn"] = m.tn;
  return d;
}

py::tuple series_tuple(const data::SeriesMatrix& s) {
  py::object labels = py::none();
  if (s.labels) labels = py::cast(*s.labels);
  return py::make_tuple(s.values, labels, s.sensor_names);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Periodic graph anomaly detection core";

  auto base = py::register_exception<Error>(m, "PgmaError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def(
      "generate_synthetic",
      [](Index sensors, Index length, Index period, double anomaly_rate, std::uint64_t seed) {
        return series_tuple(data::generate_synthetic(sensors, length, period, anomaly_rate, seed));
      },
      py::arg("sensors") = 8, py::arg("length") = 4800, py::arg("period") = 24, py::arg("anomaly_rate") = 0.03,
      py::arg("seed") = 7, "Returns (values N x T, labels, sensor names).");

  m.def(
      "read_csv", [](const std::string& path) { return series_tuple(data::ingest_csv(path)); }, py::arg("path"));

  m.def("amplitude_spectrum", py::overload_cast<const Eigen::MatrixXd&>(&spectral::amplitude_spectrum), py::arg("values"));
  m.def(
      "detect_period",
      [](const Eigen::MatrixXd& values) {
        const auto p = spectral::detect_period(values);
        py::dict d;
        d["period"] = p.period;
        d["dominant_frequency"] = p.dominant_frequency;
        d["aperiodic"] = p.aperiodic;
        d["length"] = p.length;
        return d;
      },
      py::arg("values"));

  m.def("cosine_similarity", &graph::cosine_similarity, py::arg("embeddings"));
  m.def(
      "topk_adjacency", [](const Eigen::MatrixXd& similarity, Index k) { return graph::topk_adjacency(similarity, k).dense(); },
      py::arg("similarity"), py::arg("k"), "Dense adjacency, A[j, i] = 1 when j is an in-neighbor of i.");
  m.def("assign_slot", &graph::assign_slot, py::arg("t"), py::arg("period"), py::arg("slots"));

  m.def(
      "aggregate_and_smooth",
      [](const Eigen::MatrixXd& sensor_scores, Index ma_window) {
        const auto a = scoring::aggregate_and_smooth(sensor_scores, ma_window);
        return py::make_tuple(a.score, a.smoothed, a.top_sensor);
      },
      py::arg("sensor_scores"), py::arg("ma_window") = 3);
  m.def(
      "evaluate",
      [](const scoring::Labels& predicted, const scoring::Labels& truth, bool point_adjust) {
        return metrics_dict(scoring::evaluate(predicted, truth, point_adjust));
      },
      py::arg("predicted"), py::arg("truth"), py::arg("point_adjust") = false);

  m.def(
      "default_config", [] { return to_json(RunConfig{}).dump(); }, "Default run configuration as JSON text.");

  m.def(
      "train",
      [](const std::string& train_csv, const std::string& checkpoint, const std::string& config_json) {
        const auto cfg = config_from(config_json);
        const auto raw = data::ingest_csv(train_csv, cfg.label_column == "label" ? std::nullopt
                                                                                 : std::optional(cfg.label_column));
        FitOutput out;
        {
          py::gil_scoped_release release;
          out = fit(raw, cfg);
        }
        save_checkpoint(checkpoint, out.checkpoint);
        return to_json(out.report).dump();
      },
      py::arg("train_csv"), py::arg("checkpoint"), py::arg("config_json") = "",
      "Trains on a CSV, writes the checkpoint and returns the training report as JSON text.");

  m.def(
      "score",
      [](const std::string& test_csv, const std::string& checkpoint, const std::string& config_json) {
        const auto cfg = config_from(config_json);
        const auto ck = load_checkpoint(checkpoint);
        const auto raw = data::ingest_csv(test_csv, cfg.label_column == "label" ? std::nullopt
                                                                                : std::optional(cfg.label_column));
        ScoreOutput out;
        {
          py::gil_scoped_release release;
          out = score(ck, raw, cfg);
        }
        py::dict d;
        d["timestamps"] = out.timestamps;
        d["score"] = out.trace.score;
        d["smoothed"] = out.trace.smoothed;
        d["labels"] = out.trace.predicted;
        d["threshold"] = out.trace.threshold;
        d["metrics"] = out.metrics ? py::object(metrics_dict(*out.metrics)) : py::object(py::none());
        return d;
      },
      py::arg("test_csv"), py::arg("checkpoint"), py::arg("config_json") = "");
}
