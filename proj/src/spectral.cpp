#include "pgma/spectral.hpp"

#include "pgma/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace pgma::spectral {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(Index n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void run() { fftw_execute(plan_); }
  double magnitude(Index f) const { return std::hypot(out_[f][0], out_[f][1]); }

 private:
  Index n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

Eigen::VectorXd amplitude_spectrum(const Eigen::MatrixXd& values) {
  const Index n = values.rows();
  const Index t = values.cols();
  if (t < 4) throw DataError("period detection needs at least 4 timestamps, got " + std::to_string(t));
  if (n < 1) throw DataError("period detection needs at least one sensor");

  const Index bins = t / 2;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(bins);
  RealFft fft(t);
  for (Index i = 0; i < n; ++i) {
    // Removing the mean only changes the DC bin, which is discarded anyway,
    // and makes constant inputs transform to exact zeros.
    const double mean = values.row(i).mean();
    for (Index k = 0; k < t; ++k) fft.input()[k] = values(i, k) - mean;
    fft.run();
    for (Index f = 1; f <= bins; ++f) avg(f - 1) += fft.magnitude(f);
  }
  return avg / static_cast<double>(n);
}

constexpr double kTieTolerance = 1e-9;

PeriodProfile detect_period(const Eigen::MatrixXd& values) {
  PeriodProfile profile;
  profile.amplitudes = amplitude_spectrum(values);
  profile.length = values.cols();
  // Amplitudes within a relative 1e-9 count as tied (FFT rounding differs per
  // bin), and ties keep the lower frequency.
  Index best = 0;
  for (Index k = 1; k < profile.amplitudes.size(); ++k) {
    if (profile.amplitudes(k) > profile.amplitudes(best) * (1.0 + kTieTolerance)) best = k;
  }
  if (profile.amplitudes(best) <= 1e-12) {
    profile.aperiodic = true;
    profile.dominant_frequency = 1;
    profile.period = profile.length;
    return profile;
  }
  profile.dominant_frequency = best + 1;
  profile.period = (profile.length + profile.dominant_frequency - 1) / profile.dominant_frequency;
  return profile;
}

std::vector<SpectrumPeak> top_bins(const PeriodProfile& profile, std::size_t count) {
  std::vector<Index> idx(static_cast<std::size_t>(profile.amplitudes.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Index a, Index b) { return profile.amplitudes(a) > profile.amplitudes(b); });
  idx.resize(std::min(count, idx.size()));
  std::vector<SpectrumPeak> peaks;
  for (auto k : idx) peaks.push_back({k + 1, profile.amplitudes(k)});
  return peaks;
}

}  // namespace pgma::spectral
