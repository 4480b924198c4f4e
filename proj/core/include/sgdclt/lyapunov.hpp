#pragma once

#include <string_view>

#include "sgdclt/linalg.hpp"

namespace sgdclt {

enum class LyapunovMethod { Kronecker, ClosedFormVSGD, ClosedFormMSGD, ClosedFormVanishing, IntegralOracle };

std::string_view to_string(LyapunovMethod m) noexcept;

struct LyapunovSolution {
  Matrix W;
  /// ||M W + W M^T - d0 W - S||_F for the equation the solution claims to solve.
  double residual = 0.0;
  LyapunovMethod method = LyapunovMethod::Kronecker;
};

/// ||M W + W M^T - d0 W - S||_F.
double lyapunov_residual(const Matrix& M, const Matrix& W, const Matrix& S, double d0);

/// Solves M W + W M^T - d0 W = S for symmetric W by linearizing over the
/// n(n+1)/2 free entries. Throws NotStable unless every eigenvalue of
/// M - (d0/2) I has positive real part, SingularSystem if the linear system is
/// numerically singular, and NoConvergence if the residual certificate
/// 1e-9 max(1, ||S||_F) is missed.
LyapunovSolution solve_general(const Matrix& M, const Matrix& S, double d0);

/// Eigenbasis formula W_ij = S_ij / (lambda_i + lambda_j - 2 d0) in the basis
/// of A, which solves A W + W A - 2 d0 W = Sigma. Throws DenominatorVanishes
/// when some lambda_i + lambda_j - 2 d0 <= 1e-10.
LyapunovSolution vsgd_eigenbasis_formula(const Matrix& A, const Matrix& Sigma, double d0);

/// Limit covariance of vSGD, the solution of A W + W A - d0 W = Sigma,
/// computed with the eigenbasis formula at d0/2.
LyapunovSolution vsgd_limit_cov(const Matrix& A, const Matrix& Sigma, double d0);

/// Closed-form 2d x 2d limit covariance of momentum SGD with constant damping
/// mu~ and d0 = 0, blocks H (position), J (velocity) and B~ (cross).
/// Throws DenominatorVanishes.
LyapunovSolution msgd_limit_cov(const Matrix& A, const Matrix& Sigma, double mu_tilde);

/// (1/2) blockdiag(A^-1 Sigma, Sigma). Throws NonCommuting unless
/// ||A Sigma - Sigma A||_F <= 1e-10 ||A|| ||Sigma||.
LyapunovSolution vanishing_limit_cov(const Matrix& A, const Matrix& Sigma);

/// Symmetric S^(-1/2). Throws NotSPD when lambda_min(S) <= 1e-12.
Matrix inv_sqrt(const Matrix& S);

/// int_0^inf exp(-t M') S exp(-t M'^T) dt with M' = M - (d0/2) I, evaluated
/// by Gauss-Legendre on a short interval and repeated doubling, refined until
/// the Lyapunov residual is at most `tol`. Throws NotStable or NoConvergence.
Matrix integral_oracle(const Matrix& M, const Matrix& S, double d0 = 0.0, double tol = 1e-6);

}  // namespace sgdclt
