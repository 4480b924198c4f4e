#pragma once

#include <cstdint>
#include <vector>

#include "sgdclt/linalg.hpp"

namespace sgdclt {

struct ShapiroWilk {
  double W = 0.0;
  double p_value = 0.0;
};

/// Shapiro-Wilk test with Royston's polynomial approximations for the
/// coefficients and the normalizing transform of W. Valid for 12 <= n <= 5000;
/// throws SampleSizeOutOfRange outside and DegenerateSample for (nearly)
/// constant data.
ShapiroWilk shapiro_wilk(const std::vector<double>& sample);

/// Normal deviate z with p = 1 - Phi(z), from ln(1 - W) for sample size n >= 12.
double shapiro_wilk_z(double W, std::size_t n);

struct NormalityReport {
  double statistic = 0.0;
  double p_value = 0.0;
  double significance = 0.05;
  /// p_value - significance; the sample passes when rho > 0.
  double rho = 0.0;
  bool passed = false;
  double edf = 0.0;
  std::vector<double> per_dimension_W;
  std::size_t n = 0;
  std::size_t d = 0;
};

/// Royston's H test: per-column Shapiro-Wilk deviates combined with the
/// equivalent-degrees-of-freedom correction for correlated columns.
/// `samples` is n x d with n >= 20.
NormalityReport royston_test(const Matrix& samples, double significance = 0.05);

/// Centers the rows of `snapshot` at their mean, whitens with
/// reference^(-1/2) and runs royston_test. Ensembles beyond 5000 rows are
/// thinned to every ceil(n/5000)-th row.
NormalityReport whiten_and_test(const Matrix& snapshot, const Matrix& reference, double significance = 0.05);

/// Rows kept when thinning n rows down to the Shapiro-Wilk limit.
Matrix thin_rows(const Matrix& samples, Eigen::Index limit = 5000);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::int64_t> counts;
  double mean = 0.0;
  double sd = 0.0;
};

/// Equal-width bins over [min, max]; constant data falls in a single bin.
/// Throws InvalidArgument when bins < 10 or the sample is empty.
Histogram histogram_summary(const std::vector<double>& sample, int bins);

}  // namespace sgdclt
