#include "helpers.hpp"

#include "pgma/data.hpp"
#include "pgma/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace pgma;
using namespace pgma::data;

TEST_CASE("ingest keeps shape and leaves labels absent") {
  const auto dir = testing::scratch_dir("ingest_shape");
  std::ostringstream csv;
  csv << "a,b,c\n";
  for (int t = 0; t < 100; ++t) csv << t << ',' << 2 * t << ',' << -t << '\n';
  testing::write_file(dir / "x.csv", csv.str());
  const auto s = ingest_csv(dir / "x.csv");
  CHECK(s.sensors() == 3);
  CHECK(s.length() == 100);
  CHECK_FALSE(s.has_labels());
  CHECK(s.sensor_names == std::vector<std::string>{"a", "b", "c"});
  CHECK(s.values(1, 7) == 14.0);
}

TEST_CASE("ingest reads the label column") {
  const auto dir = testing::scratch_dir("ingest_labels");
  testing::write_file(dir / "x.csv", "a,label,b\n1,0,2\n3,1,4\n5,0,6\n");
  const auto s = ingest_csv(dir / "x.csv");
  REQUIRE(s.has_labels());
  CHECK(*s.labels == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(s.sensors() == 2);
  CHECK(s.values(1, 2) == 6.0);

  CHECK_THROWS_AS(ingest_csv(dir / "x.csv", std::string("anomaly")), DataError);
}

TEST_CASE("ingest names the row and column of a bad cell") {
  const auto dir = testing::scratch_dir("ingest_bad");
  testing::write_file(dir / "x.csv", "a,b,c\n1,2,3\n1,2,3\n1,2,3\n1,2,3\n1,abc,3\n1,2,3\n");
  try {
    ingest_csv(dir / "x.csv");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 5") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
}

TEST_CASE("ingest rejections") {
  const auto dir = testing::scratch_dir("ingest_reject");
  CHECK_THROWS_AS(ingest_csv(dir / "missing.csv"), DataError);
  testing::write_file(dir / "one.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(ingest_csv(dir / "one.csv"), DataError);

  testing::write_file(dir / "nan.csv", "a,b\n1,2\nnan,3\n4,inf\n5,6\n7,8\n");
  IngestStats stats;
  const auto s = ingest_csv(dir / "nan.csv", std::nullopt, &stats);
  CHECK(stats.rows_read == 5);
  CHECK(stats.rows_rejected == 2);
  CHECK(s.length() == 3);
  CHECK(s.values.allFinite());
}

TEST_CASE("write_csv round-trips exactly") {
  const auto dir = testing::scratch_dir("csv_roundtrip");
  std::mt19937_64 rng(3);
  SeriesMatrix s;
  s.values = testing::random_matrix(3, 20, rng, -1e3, 1e3);
  s.sensor_names = {"x", "y", "z"};
  s.labels = std::vector<std::uint8_t>(20, 0);
  (*s.labels)[4] = 1;
  write_csv(dir / "s.csv", s);
  const auto back = ingest_csv(dir / "s.csv");
  CHECK(back.values == s.values);
  CHECK(*back.labels == *s.labels);
  CHECK(back.sensor_names == s.sensor_names);
}

TEST_CASE("minmax and zscore normalization") {
  SeriesMatrix s;
  s.values.resize(2, 3);
  s.values << 0, 5, 10, 4, 4, 4;
  s.sensor_names = {"a", "b"};
  const auto mm = fit_normalizer(s, NormalizationMode::minmax);
  const auto n = mm.apply(s.values);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(0, 1) == 0.5);
  CHECK(n(0, 2) == 1.0);
  CHECK(n.row(1).isZero());

  SeriesMatrix z;
  z.values.resize(1, 3);
  z.values << 1, 2, 3;
  z.sensor_names = {"a"};
  const auto zs = fit_normalizer(z, NormalizationMode::zscore);
  CHECK(zs.shift(0) == doctest::Approx(2.0));
  CHECK(zs.scale(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
  const auto zn = zs.apply(z.values);
  CHECK(zn.mean() == doctest::Approx(0.0));
  CHECK(std::sqrt(zn.array().square().mean()) == doctest::Approx(1.0));
}

TEST_CASE("normalization round trip on random matrices") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    SeriesMatrix s;
    s.values = testing::random_matrix(4, 30, rng, -50.0, 80.0);
    s.sensor_names = {"a", "b", "c", "d"};
    for (auto mode : {NormalizationMode::minmax, NormalizationMode::zscore}) {
      const auto stats = fit_normalizer(s, mode);
      CHECK((stats.scale.array() >= 0.0).all());
      const auto back = stats.invert(stats.apply(s.values));
      const double rel = (back - s.values).cwiseAbs().maxCoeff() / s.values.cwiseAbs().maxCoeff();
      CHECK(rel <= 1e-9);
    }
  }
}

TEST_CASE("window counts and pairing") {
  SeriesMatrix s;
  s.values = Eigen::RowVectorXd::LinSpaced(10, 0, 9);
  s.sensor_names = {"a"};
  const auto b = make_windows(s, 5, 1);
  CHECK(b.size() == 5);
  CHECK(b.starts == std::vector<Index>{0, 1, 2, 3, 4});
  for (Index k = 0; k < b.size(); ++k) {
    CHECK(b.target_index(k) == b.starts[k] + 5);
    CHECK(b.targets[k](0) == static_cast<double>(b.starts[k] + 5));
    CHECK(b.windows[k](0, 0) == static_cast<double>(b.starts[k]));
  }

  s.values = Eigen::RowVectorXd::LinSpaced(6, 0, 5);
  CHECK(make_windows(s, 5, 1).size() == 1);
  s.values = Eigen::RowVectorXd::LinSpaced(5, 0, 4);
  CHECK_THROWS_AS(make_windows(s, 5, 1), DataError);
}

TEST_CASE("window coverage over strides") {
  SeriesMatrix s;
  for (Index t_len : {7, 12, 31}) {
    s.values = Eigen::RowVectorXd::LinSpaced(t_len, 0, static_cast<double>(t_len - 1));
    s.sensor_names = {"a"};
    for (Index w = 1; w < t_len; ++w) {
      for (Index stride = 1; stride <= 4; ++stride) {
        const auto b = make_windows(s, w, stride);
        CHECK(b.size() == (t_len - w - 1) / stride + 1);
        std::set<Index> covered;
        for (Index k = 0; k < b.size(); ++k) {
          CHECK(b.target_index(k) <= t_len - 1);
          for (Index t = b.starts[k]; t <= b.starts[k] + w; ++t) covered.insert(t);
        }
        if (stride == 1) CHECK(static_cast<Index>(covered.size()) == t_len);
      }
    }
  }
}

TEST_CASE("synthetic label count, zero rate and determinism") {
  const auto s = generate_synthetic(4, 2400, 24, 0.05, 7);
  CHECK(s.sensors() == 4);
  CHECK(s.length() == 2400);
  REQUIRE(s.has_labels());
  Index count = 0;
  for (auto l : *s.labels) count += l;
  CHECK(count == 120);

  const auto quiet = generate_synthetic(4, 500, 24, 0.0, 7);
  for (auto l : *quiet.labels) CHECK(l == 0);

  const auto again = generate_synthetic(4, 2400, 24, 0.05, 7);
  CHECK(again.values == s.values);
  CHECK(*again.labels == *s.labels);
  CHECK(generate_synthetic(4, 2400, 24, 0.05, 8).values != s.values);

  CHECK_THROWS_AS(generate_synthetic(4, 100, 1, 0.05, 7), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(4, 100, 24, 0.3, 7), ConfigError);
}

TEST_CASE("synthetic anomalies deviate by at least three noise sigma") {
  for (std::uint64_t seed : {1, 7, 19}) {
    SyntheticOptions o;
    o.seed = seed;
    o.sensors = 6;
    o.length = 3000;
    o.anomaly_rate = 0.05;
    o.clean_prefix = 1000;
    const auto s = generate_synthetic_detailed(o);
    const auto& labels = *s.series.labels;
    for (Index t = 0; t < s.series.length(); ++t) {
      double worst = 0.0;
      for (Index i = 0; i < s.series.sensors(); ++i) {
        const double sigma = s.noise_sigma * s.amplitude(i);
        worst = std::max(worst, std::abs(s.series.values(i, t) - s.clean(i, t)) / sigma);
      }
      if (labels[t]) {
        CHECK(worst >= 3.0);
      } else {
        CHECK(worst == 0.0);
      }
      if (t < o.clean_prefix) CHECK(labels[t] == 0);
    }
  }
}
