#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gfperc {

/// Monte Carlo estimate of an expectation.
struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n)
  std::uint64_t n = 0;
  std::uint64_t seed_stream = 0;  // seed the replicate streams were keyed by
};

/// Streaming mean/variance (Welford for M2). merge() is exact up to rounding, so
/// results are reproducible when values are fed in a fixed order.
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    sum_ += x;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void merge(const Accumulator& other);

  std::uint64_t count() const { return n_; }
  /// sum / n, so indicator means are exact quotients.
  double mean() const { return n_ > 0 ? sum_ / static_cast<double>(n_) : 0.0; }
  /// Unbiased sample variance; 0 for fewer than two values.
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_of_mean() const;

  MCEstimate estimate(std::uint64_t seed_stream = 0) const {
    return {mean(), stderr_of_mean(), n_, seed_stream};
  }

 private:
  std::uint64_t n_ = 0;
  double sum_ = 0.0;
  double mean_ = 0.0;  // running mean for the M2 update
  double m2_ = 0.0;
};

/// Reduces values in order.
MCEstimate summarize(std::span<const double> values, std::uint64_t seed_stream = 0);

double normal_pdf(double x, double variance = 1.0);
double normal_cdf(double x);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution for the p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Survival function of the Kolmogorov distribution, P[K > lambda].
double kolmogorov_survival(double lambda);

/// Ordinary least squares y = intercept + slope * x.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;  // from residuals; 0 when n <= 2
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace gfperc
