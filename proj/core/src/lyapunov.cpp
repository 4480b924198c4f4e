#include "sgdclt/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "sgdclt/errors.hpp"

namespace sgdclt {

namespace {

double certificate(const Matrix& S) { return 1e-9 * std::max(1.0, S.norm()); }

void require_square(const Matrix& M, const Matrix& S) {
  if (M.rows() != M.cols() || S.rows() != M.rows() || S.cols() != M.cols()) {
    throw Error(ErrorCode::InvalidArgument, "Lyapunov operands must be square and of equal size");
  }
}

void require_shifted_stable(const Matrix& M, double d0) {
  const Matrix shifted = M - 0.5 * d0 * Matrix::Identity(M.rows(), M.cols());
  const double re = min_real_eigenvalue(shifted);
  if (!(re > 0.0)) {
    std::ostringstream os;
    os << "min Re eig(M - d0/2 I) = " << re;
    throw Error(ErrorCode::NotStable, os.str());
  }
}

struct Eigenbasis {
  Vector lambda;
  Matrix V;  // A = V diag(lambda) V^T
};

Eigenbasis eigenbasis(const Matrix& A) {
  if (!is_spd(A)) throw Error(ErrorCode::NotSPD, "Hessian must be SPD");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(A));
  return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace

std::string_view to_string(LyapunovMethod m) noexcept {
  switch (m) {
    case LyapunovMethod::Kronecker:
      return "Kronecker";
    case LyapunovMethod::ClosedFormVSGD:
      return "ClosedFormVSGD";
    case LyapunovMethod::ClosedFormMSGD:
      return "ClosedFormMSGD";
    case LyapunovMethod::ClosedFormVanishing:
      return "ClosedFormVanishing";
    case LyapunovMethod::IntegralOracle:
      return "IntegralOracle";
  }
  return "unknown";
}

double lyapunov_residual(const Matrix& M, const Matrix& W, const Matrix& S, double d0) {
  return (M * W + W * M.transpose() - d0 * W - S).norm();
}

LyapunovSolution solve_general(const Matrix& M, const Matrix& S, double d0) {
  require_square(M, S);
  if (!is_symmetric(S, 1e-10)) throw Error(ErrorCode::InvalidArgument, "right-hand side must be symmetric");
  if (M.rows() > 64) throw Error(ErrorCode::InvalidArgument, "solve_general is limited to n <= 64");
  require_shifted_stable(M, d0);

  const auto n = M.rows();
  const auto m = n * (n + 1) / 2;
  // Packed index of the symmetric pair (i, j).
  auto idx = [n](Eigen::Index i, Eigen::Index j) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i - 1) / 2 + (j - i);
  };
  Matrix K = Matrix::Zero(m, m);
  Vector rhs(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto row = idx(i, j);
      rhs(row) = 0.5 * (S(i, j) + S(j, i));
      // (M W)_ij = sum_l M_il W_lj, (W M^T)_ij = sum_l W_il M_jl.
      for (Eigen::Index l = 0; l < n; ++l) {
        K(row, idx(l, j)) += M(i, l);
        K(row, idx(i, l)) += M(j, l);
      }
      K(row, idx(i, j)) -= d0;
    }
  }
  Eigen::PartialPivLU<Matrix> lu(K);
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorCode::SingularSystem, "Lyapunov operator is numerically singular");
  Vector w = lu.solve(rhs);
  // One step of iterative refinement tightens the certificate on
  // ill-conditioned instances.
  w += lu.solve(rhs - K * w);

  LyapunovSolution sol;
  sol.W.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) sol.W(i, j) = sol.W(j, i) = w(idx(i, j));
  }
  sol.residual = lyapunov_residual(M, sol.W, S, d0);
  sol.method = LyapunovMethod::Kronecker;
  if (!(sol.residual <= certificate(S))) {
    std::ostringstream os;
    os << "residual " << sol.residual << " above certificate " << certificate(S);
    throw Error(ErrorCode::SingularSystem, os.str());
  }
  return sol;
}

LyapunovSolution vsgd_eigenbasis_formula(const Matrix& A, const Matrix& Sigma, double d0) {
  require_square(A, Sigma);
  const auto eb = eigenbasis(A);
  const auto n = A.rows();
  const Matrix St = eb.V.transpose() * Sigma * eb.V;
  Matrix L(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double den = eb.lambda(i) + eb.lambda(j) - 2.0 * d0;
      if (!(den > 1e-10)) throw Error(ErrorCode::DenominatorVanishes, "lambda_i + lambda_j - 2 d0 <= 1e-10");
      L(i, j) = St(i, j) / den;
    }
  }
  LyapunovSolution sol;
  sol.W = symmetrize(eb.V * L * eb.V.transpose());
  sol.residual = lyapunov_residual(A, sol.W, Sigma, 2.0 * d0);
  sol.method = LyapunovMethod::ClosedFormVSGD;
  return sol;
}

LyapunovSolution vsgd_limit_cov(const Matrix& A, const Matrix& Sigma, double d0) {
  auto sol = vsgd_eigenbasis_formula(A, Sigma, 0.5 * d0);
  sol.residual = lyapunov_residual(A, sol.W, Sigma, d0);
  return sol;
}

LyapunovSolution msgd_limit_cov(const Matrix& A, const Matrix& Sigma, double mu_tilde) {
  require_square(A, Sigma);
  if (!(mu_tilde > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu_tilde must be positive");
  const auto eb = eigenbasis(A);
  const auto n = A.rows();
  const Matrix St = eb.V.transpose() * Sigma * eb.V;
  Matrix H(n, n), J(n, n), B(n, n);
  const double m2 = mu_tilde * mu_tilde;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double li = eb.lambda(i);
      const double lj = eb.lambda(j);
      const double den = 2.0 * m2 * (li + lj) + (li - lj) * (li - lj);
      if (!(den > 1e-12)) throw Error(ErrorCode::DenominatorVanishes, "2 mu~^2 (l_i + l_j) + (l_i - l_j)^2 <= 1e-12");
      H(i, j) = 2.0 * mu_tilde * St(i, j) / den;
      J(i, j) = mu_tilde * (li + lj) * St(i, j) / den;
      B(i, j) = St(i, j) * (lj - li) / den;
    }
  }
  Matrix Wt(2 * n, 2 * n);
  Wt << H, B.transpose(), B, J;
  const Matrix Q = block_diag(eb.V, eb.V);

  LyapunovSolution sol;
  sol.W = symmetrize(Q * Wt * Q.transpose());
  Matrix D(2 * n, 2 * n);
  D << Matrix::Zero(n, n), -Matrix::Identity(n, n), A, mu_tilde * Matrix::Identity(n, n);
  Matrix S = Matrix::Zero(2 * n, 2 * n);
  S.bottomRightCorner(n, n) = Sigma;
  sol.residual = lyapunov_residual(D, sol.W, S, 0.0);
  sol.method = LyapunovMethod::ClosedFormMSGD;
  return sol;
}

LyapunovSolution vanishing_limit_cov(const Matrix& A, const Matrix& Sigma) {
  require_square(A, Sigma);
  if (!is_spd(A)) throw Error(ErrorCode::NotSPD, "Hessian must be SPD");
  const double gap = (A * Sigma - Sigma * A).norm();
  if (gap > 1e-10 * A.norm() * Sigma.norm()) {
    std::ostringstream os;
    os << "||A Sigma - Sigma A||_F = " << gap;
    throw Error(ErrorCode::NonCommuting, os.str());
  }
  const auto n = A.rows();
  LyapunovSolution sol;
  sol.W = 0.5 * block_diag(symmetrize(A.ldlt().solve(Sigma)), Sigma);
  Matrix Dt(2 * n, 2 * n), Et = Matrix::Zero(2 * n, 2 * n), St = Matrix::Zero(2 * n, 2 * n);
  Dt << Matrix::Zero(n, n), -Matrix::Identity(n, n), A, Matrix::Zero(n, n);
  Et.bottomRightCorner(n, n).setIdentity();
  St.bottomRightCorner(n, n) = Sigma;
  // Both stationarity conditions: Dt W + W Dt^T = 0 and Et W + W Et = St.
  sol.residual = (Dt * sol.W + sol.W * Dt.transpose()).norm() + (Et * sol.W + sol.W * Et - St).norm();
  sol.method = LyapunovMethod::ClosedFormVanishing;
  return sol;
}

Matrix inv_sqrt(const Matrix& S) {
  if (S.rows() == 0 || S.rows() != S.cols() || !is_symmetric(S, 1e-10)) {
    throw Error(ErrorCode::NotSPD, "inv_sqrt needs a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  if (!(es.eigenvalues().minCoeff() > 1e-12)) throw Error(ErrorCode::NotSPD, "lambda_min <= 1e-12");
  return symmetrize(es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose());
}

Matrix integral_oracle(const Matrix& M, const Matrix& S, double d0, double tol) {
  require_square(M, S);
  require_shifted_stable(M, d0);
  const auto n = M.rows();
  const Matrix Mp = M - 0.5 * d0 * Matrix::Identity(n, n);
  using Rule = boost::math::quadrature::gauss<double, 20>;
  const auto& nodes = Rule::abscissa();
  const auto& weights = Rule::weights();

  const double h = 1.0 / std::max(1.0, Mp.norm());
  for (int panels = 1; panels <= 1024; panels *= 2) {
    // W(h) by composite Gauss-Legendre on [0, h].
    Matrix W = Matrix::Zero(n, n);
    const double width = h / panels;
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * width;
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        for (int sign : {-1, 1}) {
          if (nodes[q] == 0.0 && sign > 0) continue;
          const double t = mid + sign * 0.5 * width * nodes[q];
          const Matrix F = (-t * Mp).exp();
          W += 0.5 * width * weights[q] * F * S * F.transpose();
        }
      }
    }
    // W(2T) = W(T) + F(T) W(T) F(T)^T with F(T) = exp(-T M').
    Matrix F = (-h * Mp).exp();
    for (int doubling = 0; doubling < 200; ++doubling) {
      W += F * W * F.transpose();
      F = F * F;
      if (F.norm() < 1e-18) break;
    }
    W = symmetrize(W);
    if (lyapunov_residual(M, W, S, d0) <= tol) return W;
  }
  throw Error(ErrorCode::NoConvergence, "integral oracle missed its residual target");
}

}  // namespace sgdclt
