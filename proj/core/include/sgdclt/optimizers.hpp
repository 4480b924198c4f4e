#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sgdclt/linalg.hpp"
#include "sgdclt/problems.hpp"
#include "sgdclt/rng.hpp"
#include "sgdclt/schedules.hpp"

namespace sgdclt {

enum class Method { VSGD, MSGD_Const, NASGD_Const, MSGD_Vanishing };

/// Config spelling: vsgd, msgd_const, nasgd_const, msgd_vanishing.
std::string_view to_string(Method m) noexcept;
Method method_from_string(std::string_view name);

/// Iterate x_k (absolute, not shifted by x*), velocity v_k (empty for vSGD)
/// and the index k of the last completed step.
struct OptState {
  Vector x;
  Vector v;
  std::int64_t k = 0;
  Method method = Method::VSGD;

  /// Z_k = (x_k - x*, v_k), or X_k = x_k - x* for vSGD.
  Vector deviation(const Vector& x_star) const;
};

OptState initial_state(Method method, const Vector& x0);

/// Everything a step needs besides the state and the random stream.
struct MethodSpec {
  Method method = Method::VSGD;
  double mu_tilde = 0.0;
  std::optional<DampingSchedule> damping;
};

/// In-place stepping with reusable scratch space; one instance per thread.
/// The problem and noise model are referenced and must outlive the stepper.
class Stepper {
 public:
  Stepper(const Problem& p, const NoiseModel& noise, const Schedule& s, MethodSpec spec);

  /// Advances `state` by one step. Throws NonFinite if the new state overflows.
  void step(OptState& state, Rng& rng);

  /// CLT normalization at step k: alpha_k, or alpha_k / mu_k for vanishing
  /// damping.
  double scale_at(std::int64_t k) const;

  const MethodSpec& spec() const noexcept { return spec_; }

 private:
  const Problem& p_;
  const NoiseModel& noise_;
  Schedule s_;
  MethodSpec spec_;
  GradientWorkspace ws_;
  Vector g_;
  Vector y_;
};

/// x_k = x_{k-1} - alpha_k g.
OptState step_vsgd(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s, Rng& rng);
/// v_k = (1 - mu~ alpha_k) v_{k-1} - alpha_k g, then x_k = x_{k-1} + alpha_k v_k.
OptState step_msgd_const(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s,
                         double mu_tilde, Rng& rng);
/// Gradient at the lookahead x_{k-1} + beta_k v_{k-1} with
/// beta_k = (1 - mu~ alpha_k) alpha_k / alpha_{k-1} and alpha_0 = alpha_1.
OptState step_nasgd_const(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s,
                          double mu_tilde, Rng& rng);
/// Momentum step with mu_k taken from the damping schedule.
OptState step_msgd_vanishing(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s,
                             const DampingSchedule& d, Rng& rng);

/// beta_k = (1 - mu~ alpha_k) alpha_k / alpha_{k-1}.
double nesterov_beta(const Schedule& s, double mu_tilde, std::int64_t k);

struct SystemMatrices {
  Matrix D;
  /// Second-order block; zero for NaSGD and vanishing damping.
  Matrix E;
  Matrix Dtilde;
  Matrix Etilde;
  /// min Re(spectrum of D).
  double lambda_D = 0.0;
  /// Checkable lower estimate of lambda_D (NaN where it is not defined).
  double h_D = 0.0;
  bool h_D_below_lambda_D = false;
};

/// Block matrices of the linearized momentum recursions. For vSGD, D = A.
/// Throws NotHurwitz if lambda_D <= 0 for the constant-damping methods.
SystemMatrices system_matrices(const Matrix& A, double mu, double L, Method method, double mu_tilde);
SystemMatrices system_matrices(const Problem& p, Method method, double mu_tilde);

/// Noise covariance lifted to the state space: blockdiag(0, Sigma), or Sigma
/// itself for vSGD.
Matrix lifted_sigma(const Matrix& Sigma, Method method);

}  // namespace sgdclt
