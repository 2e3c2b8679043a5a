#pragma once

#include "hams/core.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace hams {

struct DegenerateSeries : DomainError {
  using DomainError::DomainError;
};

// Where ESS warnings go; replaceable by callers that want to collect them.
inline std::function<void(const std::string&)>& diagnostics_warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

// Biased autocorrelations rho(1..max_lag), computed with a zero-padded FFT.
inline Vector acf(const Vector& series, int max_lag) {
  const Eigen::Index n = series.size();
  require(max_lag >= 1, "acf: max_lag must be at least 1");
  require(n >= max_lag + 2, "acf: series must have at least max_lag + 2 points");
  const Vector centered = series.array() - series.mean();
  const double c0 = centered.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw DegenerateSeries("acf: series has zero variance");

  Eigen::Index m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
  std::copy(centered.data(), centered.data() + n, padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> power;
  fft.fwd(power, padded);
  for (auto& v : power) v = std::complex<double>(std::norm(v), 0.0);
  std::vector<double> cov;
  fft.inv(cov, power);

  Vector r(max_lag);
  for (int k = 1; k <= max_lag; ++k) r[k - 1] = cov[static_cast<std::size_t>(k)] / (n * c0);
  return r;
}

struct EssDetail {
  double ess = 0;
  double denominator = 0;
  int K = 0;
  bool floored = false;
};

inline EssDetail ess_bartlett_detail(const Vector& series, int K = 3000) {
  const Eigen::Index n = series.size();
  require(n >= 10, "ess_bartlett: at least 10 draws are required");
  require(K >= 1, "ess_bartlett: K must be positive");
  EssDetail d;
  d.K = static_cast<int>(std::min<Eigen::Index>(K, n - 2));
  const Vector rho = acf(series, d.K);
  double sum = 0.0;
  for (int k = 1; k <= d.K; ++k) sum += (1.0 - static_cast<double>(k) / d.K) * rho[k - 1];
  d.denominator = 1.0 + 2.0 * sum;
  const double floor = 1.0 / static_cast<double>(n);
  if (d.denominator < floor) {
    d.floored = true;
    diagnostics_warning_sink()("ESS denominator " + std::to_string(d.denominator) +
                               " clamped to 1/n");
  }
  d.ess = static_cast<double>(n) / std::max(d.denominator, floor);
  return d;
}

inline double ess_bartlett(const Vector& series, int K = 3000) {
  return ess_bartlett_detail(series, K).ess;
}

struct EssReport {
  std::vector<double> per_coordinate_ess;  // non-degenerate coordinates, in column order
  std::vector<int> coordinates;            // column index of each entry above
  std::vector<int> degenerate;             // columns excluded for zero variance
  double min = 0, median = 0, max = 0;
  long n = 0;
  int K = 0;
  double time_seconds = 0;
  double min_ess_per_second = 0;
  int floor_activations = 0;
};

inline double median_of(std::vector<double> v) {
  require(!v.empty(), "median_of: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// draws: one row per iteration, one column per coordinate.
inline EssReport summarize_chain(const Matrix& draws, double wall_time, int K = 3000) {
  require(draws.rows() >= 10, "summarize_chain: at least 10 draws are required");
  require(draws.cols() >= 1, "summarize_chain: at least one coordinate is required");
  EssReport r;
  r.n = draws.rows();
  r.K = static_cast<int>(std::min<Eigen::Index>(K, draws.rows() - 2));
  r.time_seconds = wall_time;
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    try {
      const auto d = ess_bartlett_detail(draws.col(j), K);
      r.per_coordinate_ess.push_back(d.ess);
      r.coordinates.push_back(static_cast<int>(j));
      if (d.floored) ++r.floor_activations;
    } catch (const DegenerateSeries&) {
      r.degenerate.push_back(static_cast<int>(j));
    }
  }
  if (r.per_coordinate_ess.empty())
    throw DegenerateSeries("summarize_chain: every coordinate is degenerate");
  r.min = *std::min_element(r.per_coordinate_ess.begin(), r.per_coordinate_ess.end());
  r.max = *std::max_element(r.per_coordinate_ess.begin(), r.per_coordinate_ess.end());
  r.median = median_of(r.per_coordinate_ess);
  r.min_ess_per_second = wall_time > 0 ? r.min / wall_time : 0.0;
  return r;
}

// Standard error of the mean by non-overlapping batch means; the default
// batch count is floor(sqrt(n)).
inline double batch_means_stderr(const Vector& series, int batches = 0) {
  const Eigen::Index n = series.size();
  if (batches <= 0) batches = static_cast<int>(std::sqrt(static_cast<double>(n)));
  require(batches >= 2, "batch_means_stderr: need at least two batches");
  const Eigen::Index len = n / batches;
  require(len >= 1, "batch_means_stderr: series too short for the batch count");
  Vector means(batches);
  for (int b = 0; b < batches; ++b) means[b] = series.segment(b * len, len).mean();
  const double mu = means.mean();
  const double var = (means.array() - mu).square().sum() / (batches - 1);
  return std::sqrt(var / batches);
}

}  // namespace hams
