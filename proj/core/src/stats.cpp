#include "sgdclt/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "sgdclt/errors.hpp"
#include "sgdclt/lyapunov.hpp"

namespace sgdclt {

namespace {

const boost::math::normal_distribution<double> kStdNormal;

template <std::size_t N>
double poly(const std::array<double, N>& c, double x) {
  double r = 0.0;
  for (std::size_t i = N; i-- > 0;) r = r * x + c[i];
  return r;
}

constexpr std::array<double, 6> kC1{0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
constexpr std::array<double, 6> kC2{0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
constexpr std::array<double, 4> kC5{-1.5861, -0.31082, -0.083751, 0.0038915};
constexpr std::array<double, 3> kC6{-0.4803, -0.082676, 0.0030302};

/// Upper-half coefficients a_1 >= a_2 >= ... (a_i pairs with x_(n+1-i)).
std::vector<double> sw_coefficients(std::size_t n) {
  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = boost::math::quantile(kStdNormal, (static_cast<double>(i + 1) - 0.375) / (an + 0.25));
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = poly(kC1, rsn) - m[0] / ssumm2;
  const double a2 = -m[1] / ssumm2 + poly(kC2, rsn);
  const double fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
  std::vector<double> a(half);
  a[0] = a1;
  a[1] = a2;
  for (std::size_t i = 2; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

double upper_tail_normal(double z) { return boost::math::cdf(boost::math::complement(kStdNormal, z)); }

}  // namespace

double shapiro_wilk_z(double W, std::size_t n) {
  const double ln = std::log(static_cast<double>(n));
  const double m = poly(kC5, ln);
  const double s = std::exp(poly(kC6, ln));
  return (std::log1p(-W) - m) / s;
}

ShapiroWilk shapiro_wilk(const std::vector<double>& sample) {
  const std::size_t n = sample.size();
  if (n < 12 || n > 5000) {
    throw Error(ErrorCode::SampleSizeOutOfRange, "Shapiro-Wilk needs 12 <= n <= 5000, got " + std::to_string(n));
  }
  std::vector<double> x = sample;
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ssx = 0.0;
  for (double v : x) ssx += (v - mean) * (v - mean);
  if (!(range > 1e-300) || !(ssx / static_cast<double>(n) > 1e-300)) {
    throw Error(ErrorCode::DegenerateSample, "sample has no spread");
  }
  const auto a = sw_coefficients(n);
  // Antisymmetric full coefficient vector paired with the order statistics;
  // W is its squared correlation with the sample.
  double sax = 0.0;
  double ssa = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    double ai = 0.0;
    if (i < j) {
      ai = -a[i];
    } else if (i > j) {
      ai = a[j];
    }
    sax += ai * (x[i] - mean) / range;
    ssa += ai * ai;
  }
  const double ssx_scaled = ssx / (range * range);
  const double ssassx = std::sqrt(ssa * ssx_scaled);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx_scaled);
  ShapiroWilk out;
  out.W = std::clamp(1.0 - w1, 0.0, 1.0);
  out.p_value = upper_tail_normal(shapiro_wilk_z(out.W, n));
  return out;
}

NormalityReport royston_test(const Matrix& samples, double significance) {
  const auto n = static_cast<std::size_t>(samples.rows());
  const auto d = static_cast<std::size_t>(samples.cols());
  if (n < 20 || d < 1) throw Error(ErrorCode::SampleSizeOutOfRange, "royston_test needs n >= 20 and d >= 1");
  NormalityReport rep;
  rep.n = n;
  rep.d = d;
  rep.significance = significance;

  double sum_r = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const Vector col = samples.col(static_cast<Eigen::Index>(j));
    const auto sw = shapiro_wilk(std::vector<double>(col.data(), col.data() + col.size()));
    rep.per_dimension_W.push_back(sw.W);
    const double z = shapiro_wilk_z(sw.W, n);
    const double tail = std::max(boost::math::cdf(kStdNormal, -z) / 2.0, 1e-300);
    const double q = boost::math::quantile(kStdNormal, tail);
    sum_r += q * q;
  }

  const double p = static_cast<double>(d);
  double edf = 1.0;
  if (d > 1) {
    const double ln = std::log(static_cast<double>(n));
    const double u = 0.715;
    const double v = 0.21364 + 0.015124 * ln * ln - 0.0018034 * ln * ln * ln;
    const double l = 5.0;
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Matrix centered = samples.rowwise() - mean;
    Matrix C = centered.transpose() * centered;
    const Vector sd = C.diagonal().cwiseSqrt();
    C = sd.cwiseInverse().asDiagonal() * C * sd.cwiseInverse().asDiagonal();
    double total = 0.0;
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
      for (Eigen::Index j = 0; j < C.cols(); ++j) {
        const double c = std::clamp(C(i, j), -1.0, 1.0);
        total += std::pow(c, l) * (1.0 - u * std::pow(1.0 - c, u) / v);
      }
    }
    const double mC = (total - p) / (p * p - p);
    edf = p / (1.0 + (p - 1.0) * mC);
  }
  rep.edf = edf;
  rep.statistic = edf * sum_r / p;
  const boost::math::chi_squared_distribution<double> chi(edf);
  rep.p_value = std::clamp(boost::math::cdf(boost::math::complement(chi, rep.statistic)), 0.0, 1.0);
  rep.rho = rep.p_value - significance;
  rep.passed = rep.rho > 0.0;
  return rep;
}

Matrix thin_rows(const Matrix& samples, Eigen::Index limit) {
  const auto n = samples.rows();
  if (n <= limit) return samples;
  const auto stride = (n + limit - 1) / limit;
  const auto kept = (n + stride - 1) / stride;
  Matrix out(kept, samples.cols());
  for (Eigen::Index i = 0; i < kept; ++i) out.row(i) = samples.row(i * stride);
  return out;
}

NormalityReport whiten_and_test(const Matrix& snapshot, const Matrix& reference, double significance) {
  const Matrix root = inv_sqrt(reference);
  const Matrix rows = thin_rows(snapshot);
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Matrix white = (rows.rowwise() - mean) * root;
  return royston_test(white, significance);
}

Histogram histogram_summary(const std::vector<double>& sample, int bins) {
  if (bins < 10) throw Error(ErrorCode::InvalidArgument, "histogram needs at least 10 bins");
  if (sample.empty()) throw Error(ErrorCode::InvalidArgument, "histogram of an empty sample");
  Histogram h;
  const auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? hi : lo + b * width);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : sample) {
    auto b = static_cast<int>(std::floor((v - lo) / width));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  const double n = static_cast<double>(sample.size());
  h.mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sample) ss += (v - h.mean) * (v - h.mean);
  h.sd = sample.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return h;
}

}  // namespace sgdclt
