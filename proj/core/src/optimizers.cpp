#include "sgdclt/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sgdclt/errors.hpp"

namespace sgdclt {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::VSGD:
      return "vsgd";
    case Method::MSGD_Const:
      return "msgd_const";
    case Method::NASGD_Const:
      return "nasgd_const";
    case Method::MSGD_Vanishing:
      return "msgd_vanishing";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  for (auto m : {Method::VSGD, Method::MSGD_Const, Method::NASGD_Const, Method::MSGD_Vanishing}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::Config, "unknown method '" + std::string(name) + "'");
}

Vector OptState::deviation(const Vector& x_star) const {
  if (method == Method::VSGD) return x - x_star;
  Vector z(x.size() + v.size());
  z << x - x_star, v;
  return z;
}

OptState initial_state(Method method, const Vector& x0) {
  OptState s;
  s.x = x0;
  s.method = method;
  if (method != Method::VSGD) s.v = Vector::Zero(x0.size());
  return s;
}

// ------------------------------------------------------------------ Stepper

Stepper::Stepper(const Problem& p, const NoiseModel& noise, const Schedule& s, MethodSpec spec)
    : p_(p), noise_(noise), s_(s), spec_(std::move(spec)), ws_(p.dim()), g_(p.dim()), y_(p.dim()) {
  switch (spec_.method) {
    case Method::VSGD:
      break;
    case Method::MSGD_Const:
    case Method::NASGD_Const:
      if (!(spec_.mu_tilde > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu_tilde must be positive");
      break;
    case Method::MSGD_Vanishing:
      if (!spec_.damping) throw Error(ErrorCode::InvalidArgument, "vanishing damping needs a damping schedule");
      break;
  }
}

double Stepper::scale_at(std::int64_t k) const {
  const double a = s_.alpha_at(k);
  if (spec_.method == Method::MSGD_Vanishing) return a / spec_.damping->mu_at(k);
  return a;
}

void Stepper::step(OptState& st, Rng& rng) {
  if (st.method != spec_.method) throw Error(ErrorCode::InvalidArgument, "state and stepper disagree on the method");
  const std::int64_t k = st.k + 1;
  const double alpha = s_.alpha_at(k);
  switch (spec_.method) {
    case Method::VSGD:
      stochastic_gradient_into(p_, noise_, st.x, rng, ws_, g_);
      st.x.noalias() -= alpha * g_;
      break;
    case Method::MSGD_Const:
    case Method::MSGD_Vanishing: {
      const double mu = spec_.method == Method::MSGD_Const ? spec_.mu_tilde : spec_.damping->mu_at(k);
      stochastic_gradient_into(p_, noise_, st.x, rng, ws_, g_);
      st.v *= 1.0 - mu * alpha;
      st.v.noalias() -= alpha * g_;
      st.x.noalias() += alpha * st.v;
      break;
    }
    case Method::NASGD_Const: {
      const double beta = nesterov_beta(s_, spec_.mu_tilde, k);
      y_ = st.x;
      y_.noalias() += beta * st.v;
      stochastic_gradient_into(p_, noise_, y_, rng, ws_, g_);
      st.v *= 1.0 - spec_.mu_tilde * alpha;
      st.v.noalias() -= alpha * g_;
      st.x.noalias() += alpha * st.v;
      break;
    }
  }
  st.k = k;
  if (!st.x.allFinite() || (st.v.size() > 0 && !st.v.allFinite())) {
    std::ostringstream os;
    os << "iterate overflowed at step " << k;
    throw Error(ErrorCode::NonFinite, os.str());
  }
}

double nesterov_beta(const Schedule& s, double mu_tilde, std::int64_t k) {
  const double a = s.alpha_at(k);
  const double a_prev = k > 1 ? s.alpha_at(k - 1) : a;
  return (1.0 - mu_tilde * a) * a / a_prev;
}

OptState step_vsgd(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s, Rng& rng) {
  Stepper(p, noise, s, {Method::VSGD, 0.0, std::nullopt}).step(state, rng);
  return state;
}

OptState step_msgd_const(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s,
                         double mu_tilde, Rng& rng) {
  Stepper(p, noise, s, {Method::MSGD_Const, mu_tilde, std::nullopt}).step(state, rng);
  return state;
}

OptState step_nasgd_const(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s,
                          double mu_tilde, Rng& rng) {
  Stepper(p, noise, s, {Method::NASGD_Const, mu_tilde, std::nullopt}).step(state, rng);
  return state;
}

OptState step_msgd_vanishing(OptState state, const Problem& p, const NoiseModel& noise, const Schedule& s,
                             const DampingSchedule& d, Rng& rng) {
  Stepper(p, noise, s, {Method::MSGD_Vanishing, 0.0, d}).step(state, rng);
  return state;
}

// ----------------------------------------------------------- block matrices

SystemMatrices system_matrices(const Matrix& A, double mu, double L, Method method, double mu_tilde) {
  const auto d = A.rows();
  const Matrix I = Matrix::Identity(d, d);
  const Matrix Z = Matrix::Zero(d, d);
  SystemMatrices sm;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  sm.Dtilde.resize(2 * d, 2 * d);
  sm.Dtilde << Z, -I, A, Z;
  sm.Etilde.resize(2 * d, 2 * d);
  sm.Etilde << Z, Z, Z, I;

  switch (method) {
    case Method::VSGD:
      sm.D = A;
      sm.E = Matrix::Zero(d, d);
      sm.lambda_D = min_eigenvalue(symmetrize(A));
      sm.h_D = nan;
      return sm;
    case Method::MSGD_Vanishing:
      sm.D = sm.Dtilde;
      sm.E = sm.Etilde;
      sm.lambda_D = min_real_eigenvalue(sm.D);
      sm.h_D = nan;
      return sm;
    case Method::MSGD_Const: {
      sm.D.resize(2 * d, 2 * d);
      sm.D << Z, -I, A, mu_tilde * I;
      sm.E.resize(2 * d, 2 * d);
      sm.E << A, mu_tilde * I, Z, Z;
      const double zeta = mu / (2.0 * L + mu_tilde * mu_tilde);
      sm.h_D = std::min(2.0 / (zeta * mu), 2.0 * (1.0 + mu * zeta * zeta) / mu_tilde);
      break;
    }
    case Method::NASGD_Const: {
      sm.D.resize(2 * d, 2 * d);
      sm.D << Z, -I, A, mu_tilde * I + A;
      sm.E = Matrix::Zero(2 * d, 2 * d);
      const double zeta = (mu + mu_tilde) / (2.0 * L + mu_tilde * mu_tilde);
      sm.h_D = std::min(2.0 / zeta, 2.0 * (1.0 + mu * zeta * zeta) / mu_tilde);
      break;
    }
  }
  sm.lambda_D = min_real_eigenvalue(sm.D);
  sm.h_D_below_lambda_D = sm.h_D <= sm.lambda_D;
  if (!(sm.lambda_D > 0.0)) {
    std::ostringstream os;
    os << "min Re eig(D) = " << sm.lambda_D;
    throw Error(ErrorCode::NotHurwitz, os.str());
  }
  return sm;
}

SystemMatrices system_matrices(const Problem& p, Method method, double mu_tilde) {
  return system_matrices(p.hessian(), p.mu(), p.L(), method, mu_tilde);
}

Matrix lifted_sigma(const Matrix& Sigma, Method method) {
  if (method == Method::VSGD) return Sigma;
  const auto d = Sigma.rows();
  Matrix out = Matrix::Zero(2 * d, 2 * d);
  out.bottomRightCorner(d, d) = Sigma;
  return out;
}

}  // namespace sgdclt
