#include "sgdclt/schedules.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sgdclt/errors.hpp"

namespace sgdclt {

namespace {

constexpr double kE = 2.718281828459045;

void require_index(std::int64_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "schedule index must be >= 1");
}

std::int64_t tail_begin(std::int64_t k_begin, std::int64_t k_end, double tail_fraction) {
  const auto span = static_cast<double>(k_end - k_begin);
  return std::max(k_begin, k_end - static_cast<std::int64_t>(std::floor(tail_fraction * span)));
}

/// log-log slope of a positive sequence between the start of the tail and
/// the horizon.
double tail_loglog_slope(const std::function<double(std::int64_t)>& f, std::int64_t horizon,
                         double tail_fraction) {
  const std::int64_t k0 = tail_begin(1, horizon, tail_fraction);
  const double f0 = f(k0);
  const double f1 = f(horizon);
  if (!(f0 > 0.0) || !(f1 > 0.0)) return -std::numeric_limits<double>::infinity();
  return std::log(f1 / f0) / std::log(static_cast<double>(horizon) / static_cast<double>(k0));
}

bool vanishes(const std::function<double(std::int64_t)>& f, std::int64_t horizon,
              double tail_fraction, double slope_floor) {
  if (f(horizon) <= 0.0) return true;
  if (f(horizon) < 0.1 * f(1)) return true;
  return tail_loglog_slope(f, horizon, tail_fraction) <= -slope_floor;
}

/// Slope of the partial sums sum_{j<=k} f(j) on the tail, in log-log scale.
double partial_sum_slope(const std::function<double(std::int64_t)>& f, std::int64_t horizon,
                         double tail_fraction) {
  const std::int64_t k0 = tail_begin(1, horizon, tail_fraction);
  double s = 0.0;
  double s0 = 0.0;
  for (std::int64_t k = 1; k <= horizon; ++k) {
    s += f(k);
    if (k == k0) s0 = s;
  }
  if (!(s0 > 0.0)) return 0.0;
  return std::log(s / s0) / std::log(static_cast<double>(horizon) / static_cast<double>(k0));
}

std::vector<std::int64_t> log_grid(std::int64_t lo, std::int64_t hi, int count) {
  std::vector<std::int64_t> out;
  if (hi < lo) return out;
  if (count <= 1 || hi == lo) return {lo};
  const double llo = std::log(static_cast<double>(lo));
  const double lhi = std::log(static_cast<double>(hi));
  for (int i = 0; i < count; ++i) {
    const double t = llo + (lhi - llo) * i / (count - 1);
    auto v = static_cast<std::int64_t>(std::llround(std::exp(t)));
    v = std::clamp(v, lo, hi);
    if (out.empty() || v != out.back()) out.push_back(v);
  }
  return out;
}

/// Shared engine for the alpha- and beta-slow conditions:
///   seq_n / seq_m >= K_s prod_{k=m+1}^{n} (1 - h0 rate_k).
SlowCheck slow_condition(const std::function<double(std::int64_t)>& seq,
                         const std::function<double(std::int64_t)>& rate, double h0, int samples,
                         std::int64_t horizon, double slope_tol) {
  if (!(h0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "h0 must be positive");
  if (horizon < 20) throw Error(ErrorCode::InvalidArgument, "horizon too short for the slow check");
  const auto H = static_cast<std::size_t>(horizon);
  std::vector<double> cum_log(H + 1, 0.0);
  std::vector<double> tau(H + 1, 0.0);
  std::int64_t last_invalid = 0;
  for (std::int64_t k = 1; k <= horizon; ++k) {
    const double r = rate(k);
    const double factor = 1.0 - h0 * r;
    tau[k] = tau[k - 1] + r;
    if (factor <= 0.0) {
      last_invalid = k;
      cum_log[k] = 0.0;
    } else {
      cum_log[k] = (k - 1 >= last_invalid ? cum_log[k - 1] : 0.0) + std::log1p(-h0 * r);
    }
  }
  const std::int64_t m_lo = std::max<std::int64_t>(1, horizon / 10);
  if (last_invalid > m_lo) {
    throw Error(ErrorCode::InvalidRange, "1 - h0*alpha_k <= 0 on the sampled tail");
  }
  auto log_ratio = [&](std::int64_t m, std::int64_t n) {
    return std::log(seq(n)) - std::log(seq(m)) - (cum_log[n] - cum_log[m]);
  };

  const int side = std::max(2, static_cast<int>(std::lround(std::sqrt(std::max(samples, 4)))));
  struct Pair {
    double x;
    double y;
  };
  auto sample_pairs = [&](std::int64_t m_from) {
    std::vector<Pair> pairs;
    for (auto m : log_grid(m_from, horizon - 1, side)) {
      for (auto n : log_grid(m + 1, horizon, side)) {
        pairs.push_back({tau[n] - tau[m], log_ratio(m, n)});
      }
    }
    return pairs;
  };
  auto regression_slope = [](const std::vector<Pair>& pairs) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : pairs) {
      mx += p.x;
      my += p.y;
    }
    mx /= static_cast<double>(pairs.size());
    my /= static_cast<double>(pairs.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : pairs) {
      sxy += (p.x - mx) * (p.y - my);
      sxx += (p.x - mx) * (p.x - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
  };

  SlowCheck out;
  const auto pairs = sample_pairs(m_lo);
  double min_log = std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) min_log = std::min(min_log, p.y);
  out.Ks_witness = std::exp(min_log);
  out.slope = regression_slope(pairs);
  out.passed = out.slope >= -slope_tol;

  out.smallest_m = m_lo;
  if (out.passed) {
    const std::int64_t first_valid = std::max<std::int64_t>(1, last_invalid);
    for (auto m : log_grid(first_valid, m_lo, 24)) {
      const auto from_m = sample_pairs(m);
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& p : from_m) worst = std::min(worst, p.y);
      if (worst >= min_log - std::log(2.0) && regression_slope(from_m) >= -slope_tol) {
        out.smallest_m = m;
        break;
      }
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Schedule

Schedule::Schedule(Kind kind, double scale, double exponent, std::string label,
                   std::function<double(std::int64_t)> fn)
    : kind_(kind), scale_(scale), exponent_(exponent), label_(std::move(label)), fn_(std::move(fn)) {}

Schedule Schedule::power_law(double K, double a) {
  if (!(K > 0.0) || !(a >= 0.0 && a <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "power_law needs K > 0 and a in [0, 1]");
  }
  return Schedule(Kind::PowerLaw, K, a, "power_law", nullptr);
}

Schedule Schedule::power_law_log(double C, double a) {
  if (!(C > 0.0) || !(a > 0.0 && a <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "power_law_log needs C > 0 and a in (0, 1]");
  }
  return Schedule(Kind::PowerLawLog, C, a, "power_law_log", nullptr);
}

Schedule Schedule::custom(std::function<double(std::int64_t)> fn, std::string label) {
  if (!fn) throw Error(ErrorCode::InvalidArgument, "custom schedule needs a generator");
  return Schedule(Kind::Custom, 0.0, std::numeric_limits<double>::quiet_NaN(), std::move(label),
                  std::move(fn));
}

Schedule Schedule::geometric(double K, double ratio) {
  if (!(K > 0.0) || !(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "geometric needs K > 0 and ratio in (0, 1)");
  }
  return custom([K, ratio](std::int64_t k) { return K * std::pow(ratio, static_cast<double>(k - 1)); },
                "geometric");
}

Schedule Schedule::constant(double value) {
  if (!(value > 0.0)) throw Error(ErrorCode::InvalidArgument, "constant schedule must be positive");
  return power_law(value, 0.0);
}

double Schedule::value_at(double t) const {
  if (!(t >= 1.0)) throw Error(ErrorCode::InvalidArgument, "schedule index must be >= 1");
  switch (kind_) {
    case Kind::PowerLaw:
      return scale_ * std::pow(t, -exponent_);
    case Kind::PowerLawLog: {
      const double u = std::max(t, kE);
      return scale_ * std::pow(u, -exponent_) * std::log(u);
    }
    case Kind::Custom: {
      const double r = std::round(t);
      if (r != t) throw Error(ErrorCode::InvalidArgument, "custom schedules take integral indices");
      return fn_(static_cast<std::int64_t>(r));
    }
  }
  return 0.0;
}

double Schedule::alpha_at(std::int64_t k) const {
  require_index(k);
  if (kind_ == Kind::Custom) return fn_(k);
  return value_at(static_cast<double>(k));
}

double Schedule::decrement(std::int64_t k) const {
  require_index(k);
  if (kind_ == Kind::PowerLaw) {
    // K k^-a (1 - (k/(k+1))^a) without subtracting nearly equal numbers.
    const double kd = static_cast<double>(k);
    return alpha_at(k) * -std::expm1(-exponent_ * std::log1p(1.0 / kd));
  }
  return alpha_at(k) - alpha_at(k + 1);
}

std::string Schedule::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::PowerLaw:
      os << "alpha_k = " << scale_ << " * k^-" << exponent_;
      break;
    case Kind::PowerLawLog:
      os << "alpha_k = " << scale_ << " * k^-" << exponent_ << " * ln k";
      break;
    case Kind::Custom:
      os << "custom(" << label_ << ")";
      break;
  }
  return os.str();
}

// --------------------------------------------------------- DampingSchedule

DampingSchedule::DampingSchedule(Kind kind, double scale, double exponent,
                                 std::shared_ptr<const std::vector<double>> partial_sums)
    : kind_(kind), scale_(scale), exponent_(exponent), partial_sums_(std::move(partial_sums)) {}

DampingSchedule DampingSchedule::constant(double mu_tilde) {
  if (!(mu_tilde > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu_tilde must be positive");
  return DampingSchedule(Kind::Constant, mu_tilde, 0.0, nullptr);
}

DampingSchedule DampingSchedule::power_law(double K_mu, double b) {
  if (!(K_mu > 0.0) || !(b > 0.0 && b < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "damping power_law needs K_mu > 0 and b in (0, 1)");
  }
  return DampingSchedule(Kind::PowerLaw, K_mu, b, nullptr);
}

DampingSchedule DampingSchedule::inverse_partial_sum(double K_mu, const Schedule& base,
                                                     std::int64_t horizon) {
  if (!(K_mu > 0.0) || horizon < 1) {
    throw Error(ErrorCode::InvalidArgument, "inverse_partial_sum needs K_mu > 0 and horizon >= 1");
  }
  auto sums = std::make_shared<std::vector<double>>(static_cast<std::size_t>(horizon) + 1, 0.0);
  for (std::int64_t k = 1; k <= horizon; ++k) (*sums)[k] = (*sums)[k - 1] + base.alpha_at(k);
  return DampingSchedule(Kind::InversePartialSum, K_mu, 0.0, std::move(sums));
}

double DampingSchedule::mu_at(std::int64_t k) const {
  require_index(k);
  switch (kind_) {
    case Kind::Constant:
      return scale_;
    case Kind::PowerLaw:
      return scale_ * std::pow(static_cast<double>(k), -exponent_);
    case Kind::InversePartialSum:
      if (static_cast<std::size_t>(k) >= partial_sums_->size()) {
        throw Error(ErrorCode::InvalidRange, "inverse_partial_sum damping evaluated past its horizon");
      }
      return scale_ / (*partial_sums_)[static_cast<std::size_t>(k)];
  }
  return 0.0;
}

std::string DampingSchedule::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Constant:
      os << "mu_k = " << scale_;
      break;
    case Kind::PowerLaw:
      os << "mu_k = " << scale_ << " * k^-" << exponent_;
      break;
    case Kind::InversePartialSum:
      os << "mu_k = " << scale_ << " / sum alpha_j";
      break;
  }
  return os.str();
}

// ------------------------------------------------------------ certificates

bool ScheduleCertificate::all_passed() const {
  return std::all_of(details.begin(), details.end(), [](const auto& c) { return c.passed; });
}

namespace {

// Limit of q(k1), q(k2), q(k3) at geometrically spaced k assuming
// q(k) = d0 + b k^(-p) with p > 0, i.e. geometrically shrinking increments.
// NaN when the increments do not shrink.
double extrapolate_limit(double q1, double q2, double q3) {
  const double d1 = q2 - q1;
  const double d2 = q3 - q2;
  if (std::abs(d2) <= 1e-13 * std::max(1.0, std::abs(q3))) return q3;
  const double t = d2 / d1;
  if (!(t > 0.0 && t < 1.0)) return std::numeric_limits<double>::quiet_NaN();
  return q3 + d2 * t / (1.0 - t);
}

}  // namespace

double estimate_d0(const Schedule& s, std::int64_t k_begin, std::int64_t k_end, double rel_tol,
                   double abs_tol, double tail_fraction) {
  if (k_begin < 1 || k_end - k_begin + 1 < 100) {
    throw Error(ErrorCode::InvalidArgument, "estimate_d0 needs a range of at least 100 indices");
  }
  // Six log-spaced points over the last `tail_fraction` of the log range,
  // extrapolated twice: the second pass removes the O(1/k) discretization
  // term left over by the first.
  constexpr int kPoints = 6;
  const double span = std::log(static_cast<double>(k_end) / static_cast<double>(k_begin));
  const double step = std::max(tail_fraction * span / (kPoints - 1), std::log(1.5));
  std::array<double, kPoints> q{};
  for (int j = 0; j < kPoints; ++j) {
    const auto k = std::max<std::int64_t>(
        k_begin,
        static_cast<std::int64_t>(std::llround(static_cast<double>(k_end) * std::exp(-step * (kPoints - 1 - j)))));
    const double a = s.alpha_at(k);
    q[static_cast<std::size_t>(j)] = s.decrement(k) / (a * a);
  }
  std::array<double, kPoints - 2> once{};
  for (std::size_t i = 0; i < once.size(); ++i) once[i] = extrapolate_limit(q[i], q[i + 1], q[i + 2]);
  const double early = extrapolate_limit(once[0], once[1], once[2]);
  const double late = extrapolate_limit(once[1], once[2], once[3]);
  const double estimate = late;
  if (!std::isfinite(early) || !std::isfinite(late) ||
      std::abs(late - early) > rel_tol * std::abs(late) + abs_tol) {
    std::ostringstream os;
    os << "(alpha_k - alpha_k+1)/alpha_k^2 does not settle: samples";
    for (double x : q) os << " " << x;
    throw Error(ErrorCode::NonConvergent, os.str());
  }
  return estimate;
}

double h0_slow_ratio(const Schedule& s, double h0, std::int64_t m, std::int64_t n) {
  require_index(m);
  if (n < m) throw Error(ErrorCode::InvalidArgument, "h0_slow_ratio needs n >= m");
  double log_prod = 0.0;
  for (std::int64_t k = m + 1; k <= n; ++k) {
    const double factor = 1.0 - h0 * s.alpha_at(k);
    if (factor <= 0.0) throw Error(ErrorCode::InvalidRange, "1 - h0*alpha_k <= 0");
    log_prod += std::log(factor);
  }
  return std::exp(std::log(s.alpha_at(n)) - std::log(s.alpha_at(m)) - log_prod);
}

SlowCheck check_h0_slow(const Schedule& s, double h0, int samples, std::int64_t horizon,
                        double slope_tol) {
  auto alpha = [&s](std::int64_t k) { return s.alpha_at(k); };
  return slow_condition(alpha, alpha, h0, samples, horizon, slope_tol);
}

bool check_divergence(const Schedule& s, std::int64_t horizon, double slope_threshold) {
  if (horizon < 1000) throw Error(ErrorCode::InvalidArgument, "check_divergence needs horizon >= 1000");
  const bool decays = s.alpha_at(horizon) < s.alpha_at(1) / 10.0;
  auto alpha = [&s](std::int64_t k) { return s.alpha_at(k); };
  return decays && partial_sum_slope(alpha, horizon, 0.2) >= slope_threshold;
}

ScheduleCertificate certify_schedule(const Schedule& s, const CertifyOptions& options) {
  ScheduleCertificate cert;
  const auto horizon = options.horizon;

  cert.divergence_ok = check_divergence(s, horizon, options.divergence_slope);
  {
    auto alpha = [&s](std::int64_t k) { return s.alpha_at(k); };
    cert.details.push_back({"divergence", partial_sum_slope(alpha, horizon, options.tail_fraction),
                            cert.divergence_ok, "log-log slope of partial sums on the tail"});
  }

  try {
    cert.d0_estimate = estimate_d0(s, 1, horizon, options.d0_rel_tol, options.d0_abs_tol, options.d0_window);
    cert.sufficient_decrease_ok = cert.d0_estimate >= -options.d0_abs_tol;
    cert.d0_estimate = std::max(cert.d0_estimate, 0.0);
    cert.details.push_back({"sufficient_decrease", cert.d0_estimate, cert.sufficient_decrease_ok,
                            "limit of (alpha_k - alpha_k+1)/alpha_k^2"});
  } catch (const Error& e) {
    cert.sufficient_decrease_ok = false;
    cert.d0_estimate = std::numeric_limits<double>::quiet_NaN();
    cert.details.push_back({"sufficient_decrease", cert.d0_estimate, false, e.what()});
  }

  // The first h0 above d0 on a widening grid that passes the finite-horizon
  // check serves as witness.
  const double base = std::isfinite(cert.d0_estimate) ? cert.d0_estimate : 0.0;
  SlowCheck slow;
  std::string failure;
  for (double margin : {1e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0}) {
    cert.h0_witness = base + std::max(margin, margin * base);
    try {
      slow = check_h0_slow(s, cert.h0_witness, options.pair_samples, horizon, options.slope_tol);
      failure.clear();
    } catch (const Error& e) {
      failure = e.what();
      break;
    }
    if (slow.passed) break;
  }
  if (failure.empty()) {
    cert.Ks_witness = slow.Ks_witness;
    cert.smallest_m = slow.smallest_m;
    std::ostringstream note;
    note << "h0 = " << cert.h0_witness << ", slope " << slow.slope << ", smallest m " << slow.smallest_m;
    cert.details.push_back({"h0_slow", slow.Ks_witness, slow.passed, note.str()});
  } else {
    cert.details.push_back({"h0_slow", 0.0, false, failure});
  }
  return cert;
}

ScheduleCertificate check_vanishing_damping(const Schedule& s, const DampingSchedule& d,
                                            const CertifyOptions& options) {
  if (!d.is_vanishing()) {
    throw Error(ErrorCode::IncompatiblePair, "constant damping has no vanishing-damping certificate");
  }
  const auto horizon = options.horizon;
  const double tf = options.tail_fraction;
  auto alpha = [&s](std::int64_t k) { return s.alpha_at(k); };
  auto mu = [&d](std::int64_t k) { return d.mu_at(k); };
  auto beta = [&](std::int64_t k) { return s.alpha_at(k) / d.mu_at(k); };
  auto alpha_mu = [&](std::int64_t k) { return s.alpha_at(k) * d.mu_at(k); };

  if (!vanishes(beta, horizon, tf, 0.01)) {
    throw Error(ErrorCode::IncompatiblePair, "alpha_k / mu_k does not decay on the tail");
  }

  ScheduleCertificate cert;
  cert.details.push_back({"alpha_vanishes", tail_loglog_slope(alpha, horizon, tf),
                          vanishes(alpha, horizon, tf, 0.01), "tail log-log slope"});
  cert.details.push_back({"mu_vanishes", tail_loglog_slope(mu, horizon, tf),
                          vanishes(mu, horizon, tf, 0.01), "tail log-log slope"});
  cert.details.push_back({"alpha_over_mu_vanishes", tail_loglog_slope(beta, horizon, tf), true,
                          "tail log-log slope"});
  const double sum_slope = partial_sum_slope(alpha_mu, horizon, tf);
  cert.divergence_ok = sum_slope >= options.divergence_slope;
  cert.details.push_back({"sum_alpha_mu_diverges", sum_slope, cert.divergence_ok,
                          "log-log slope of partial sums on the tail"});

  // mu_{k-1} - mu_k = L_mu alpha_k mu_k + o(alpha_k mu_k)
  {
    const std::int64_t k0 = std::max<std::int64_t>(2, tail_begin(1, horizon, tf));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (std::int64_t k = k0; k <= horizon; ++k) {
      const double r = (d.mu_at(k - 1) - d.mu_at(k)) / alpha_mu(k);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      sum += r;
    }
    const double L = sum / static_cast<double>(horizon - k0 + 1);
    const bool converged = hi - lo <= options.d0_rel_tol * std::abs(L) + options.d0_abs_tol;
    cert.L_mu_estimate = L;
    cert.details.push_back({"L_mu_limit", L, converged && L >= -options.d0_abs_tol,
                            "limit of (mu_k-1 - mu_k)/(alpha_k mu_k)"});
  }

  try {
    const auto slow = slow_condition(beta, alpha_mu, options.beta_h0, options.pair_samples, horizon,
                                     options.slope_tol);
    cert.h0_witness = options.beta_h0;
    cert.Ks_witness = slow.Ks_witness;
    cert.smallest_m = slow.smallest_m;
    cert.details.push_back({"beta_slow", slow.Ks_witness, slow.passed,
                            "h0 = " + std::to_string(options.beta_h0)});
  } catch (const Error& e) {
    cert.details.push_back({"beta_slow", 0.0, false, e.what()});
  }

  // The covariance recursion needs the relative change of beta to be small
  // against alpha_k mu_k: (beta_k - beta_k+1) / (beta_k alpha_k mu_k) -> 0.
  auto relative_decrease = [&](std::int64_t k) {
    return (beta(k) - beta(k + 1)) / (beta(k) * alpha_mu(k));
  };
  const bool rel_ok = vanishes(relative_decrease, horizon, tf, 0.01);
  cert.d0_estimate = std::max(0.0, relative_decrease(horizon));
  cert.sufficient_decrease_ok = rel_ok;
  cert.details.push_back({"beta_sufficient_decrease", relative_decrease(horizon), rel_ok,
                          "(beta_k - beta_k+1)/(beta_k alpha_k mu_k) at the horizon"});

  // Literal form (beta_k - beta_k+1)/alpha_k = o(alpha_k mu_k), reported only.
  auto literal_decrease = [&](std::int64_t k) {
    return (beta(k) - beta(k + 1)) / (alpha(k) * alpha_mu(k));
  };
  const bool literal_ok = vanishes(literal_decrease, horizon, tf, 0.01);
  cert.details.push_back({"beta_decrease_over_alpha", literal_decrease(horizon), true,
                          std::string("informational; ") + (literal_ok ? "vanishes" : "does not vanish")});
  return cert;
}

}  // namespace sgdclt
