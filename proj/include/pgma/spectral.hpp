#pragma once

#include "pgma/data.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pgma::spectral {

using Eigen::Index;

/// Dominant period of a multivariate series.
struct PeriodProfile {
  // amplitudes(f - 1) is the sensor-averaged DFT magnitude of bin f,
  // f = 1 .. floor(T / 2). The DC bin is excluded.
  Eigen::VectorXd amplitudes;
  Index dominant_frequency = 1;
  Index period = 1;
  Index length = 0;  // T the profile was computed from
  bool aperiodic = false;
};

/// Averaged magnitude spectrum over sensors, bins 1..floor(T/2).
/// Throws DataError when T < 4.
Eigen::VectorXd amplitude_spectrum(const Eigen::MatrixXd& values);
inline Eigen::VectorXd amplitude_spectrum(const data::SeriesMatrix& s) { return amplitude_spectrum(s.values); }

/// Largest averaged amplitude wins; ties go to the lower bin. A spectrum whose
/// maximum is <= 1e-12 is flagged aperiodic with period T.
PeriodProfile detect_period(const Eigen::MatrixXd& values);
inline PeriodProfile detect_period(const data::SeriesMatrix& s) { return detect_period(s.values); }

struct SpectrumPeak {
  Index frequency;
  double amplitude;
};

/// The `count` largest bins in descending amplitude order.
std::vector<SpectrumPeak> top_bins(const PeriodProfile& profile, std::size_t count);

}  // namespace pgma::spectral
