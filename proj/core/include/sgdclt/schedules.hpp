#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sgdclt {

/// Learning-rate sequence alpha_k, k >= 1.
class Schedule {
 public:
  enum class Kind { PowerLaw, PowerLawLog, Custom };

  /// alpha_k = K k^(-a), K > 0, a in [0, 1].
  static Schedule power_law(double K, double a);
  /// alpha_k = C k^(-a) ln k with the argument clamped to k >= e so the log
  /// factor never drops below one (alpha_1 would otherwise vanish).
  static Schedule power_law_log(double C, double a);
  /// User-supplied sequence; `fn` must return a positive value for k >= 1.
  static Schedule custom(std::function<double(std::int64_t)> fn, std::string label);
  /// alpha_k = K r^(k-1): summable, used as the negative control.
  static Schedule geometric(double K, double ratio);
  static Schedule constant(double value);

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  double exponent() const noexcept { return exponent_; }
  const std::string& label() const noexcept { return label_; }

  double alpha_at(std::int64_t k) const;
  /// Closed form evaluated at a real index t >= 1. Custom schedules accept
  /// integral t only.
  double value_at(double t) const;
  /// alpha_k - alpha_{k+1}, free of cancellation for the closed forms.
  double decrement(std::int64_t k) const;

  std::string describe() const;

 private:
  Schedule(Kind kind, double scale, double exponent, std::string label,
           std::function<double(std::int64_t)> fn);

  Kind kind_;
  double scale_;
  double exponent_;
  std::string label_;
  std::function<double(std::int64_t)> fn_;
};

/// Damping sequence mu_k for the momentum methods.
class DampingSchedule {
 public:
  enum class Kind { Constant, PowerLaw, InversePartialSum };

  static DampingSchedule constant(double mu_tilde);
  /// mu_k = K_mu k^(-b), b in (0, 1).
  static DampingSchedule power_law(double K_mu, double b);
  /// mu_k = K_mu / sum_{j<=k} alpha_j, tabulated up to `horizon`.
  static DampingSchedule inverse_partial_sum(double K_mu, const Schedule& base, std::int64_t horizon);

  Kind kind() const noexcept { return kind_; }
  bool is_vanishing() const noexcept { return kind_ != Kind::Constant; }
  double scale() const noexcept { return scale_; }
  double exponent() const noexcept { return exponent_; }

  double mu_at(std::int64_t k) const;
  std::string describe() const;

 private:
  DampingSchedule(Kind kind, double scale, double exponent,
                  std::shared_ptr<const std::vector<double>> partial_sums);

  Kind kind_;
  double scale_;
  double exponent_;
  std::shared_ptr<const std::vector<double>> partial_sums_;
};

struct ConditionRecord {
  std::string name;
  double value = 0.0;
  bool passed = false;
  std::string note;
};

struct ScheduleCertificate {
  double d0_estimate = 0.0;
  /// First h0 > d0 on the grid d0 + {1e-3, 1e-2, 3e-2, 0.1, 0.3, 1} max(1, d0)
  /// that passes the finite-horizon slow check.
  double h0_witness = 0.0;
  double Ks_witness = 0.0;
  bool divergence_ok = false;
  bool sufficient_decrease_ok = false;
  std::optional<double> L_mu_estimate;
  /// Smallest sampled m from which the slow condition holds empirically.
  std::int64_t smallest_m = 0;
  std::vector<ConditionRecord> details;

  bool all_passed() const;
};

/// Knobs for the finite-horizon certification. The asymptotic conditions are
/// sampled on the last `tail_fraction` of the horizon.
struct CertifyOptions {
  std::int64_t horizon = 1'000'000;
  double tail_fraction = 0.2;
  double d0_rel_tol = 1e-3;
  double d0_abs_tol = 1e-3;
  /// Fraction of the log range sampled by estimate_d0.
  double d0_window = 0.5;
  int pair_samples = 256;
  double divergence_slope = 0.05;
  double slope_tol = 1e-3;
  /// Slow-condition constant for the beta sequence of vanishing damping.
  double beta_h0 = 1.0;
};

/// Limit of q_k = (alpha_k - alpha_{k+1}) / alpha_k^2, extrapolated from six
/// log-spaced samples over the last `tail_fraction` of the log range of
/// [k_begin, k_end] by two rounds of Aitken's delta-squared process (model
/// q_k = d0 + b k^(-p) + c k^(-p-1)). Throws NonConvergent when the
/// increments do not shrink or the early and late extrapolations differ by
/// more than rel_tol * |estimate| + abs_tol.
double estimate_d0(const Schedule& s, std::int64_t k_begin, std::int64_t k_end,
                   double rel_tol = 1e-3, double abs_tol = 1e-3, double tail_fraction = 0.5);

struct SlowCheck {
  bool passed = false;
  /// min over sampled pairs of (alpha_n/alpha_m) / prod(1 - h0 alpha_k).
  double Ks_witness = 0.0;
  /// Regression slope of the log ratio against the elapsed time sum alpha_k;
  /// negative means the ratio keeps decaying and no K_s exists.
  double slope = 0.0;
  std::int64_t smallest_m = 0;
};

/// (alpha_n / alpha_m) / prod_{k=m+1}^{n} (1 - h0 alpha_k). Equals 1 for m == n.
double h0_slow_ratio(const Schedule& s, double h0, std::int64_t m, std::int64_t n);

/// Samples `samples` log-spaced pairs with m >= horizon/10. Throws InvalidRange
/// if some factor 1 - h0 alpha_k is nonpositive on the sampled tail.
SlowCheck check_h0_slow(const Schedule& s, double h0, int samples, std::int64_t horizon,
                        double slope_tol = 1e-3);

/// Numeric proxy for lim alpha_k = 0 and sum alpha_k = infinity: alpha decays
/// by 10x over the horizon and the log-log slope of the partial sums on the
/// tail is at least `slope_threshold`.
bool check_divergence(const Schedule& s, std::int64_t horizon, double slope_threshold = 0.05);

ScheduleCertificate certify_schedule(const Schedule& s, const CertifyOptions& options = {});

/// Certifies the vanishing-damping conditions on the pair (alpha_k, mu_k).
/// Throws IncompatiblePair for constant damping or when alpha_k / mu_k does
/// not decay on the tail.
ScheduleCertificate check_vanishing_damping(const Schedule& s, const DampingSchedule& d,
                                            const CertifyOptions& options = {});

}  // namespace sgdclt
