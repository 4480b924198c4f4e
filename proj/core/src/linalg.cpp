#include "sgdclt/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "sgdclt/errors.hpp"

namespace sgdclt {

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_spd(const Matrix& m, double floor) {
  if (m.rows() == 0 || !is_symmetric(m, 1e-10)) return false;
  if (!m.allFinite()) return false;
  return min_eigenvalue(symmetrize(m)) > floor;
}

double min_real_eigenvalue(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().real().minCoeff();
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double relative_frobenius_error(const Matrix& a, const Matrix& b) {
  const double denom = b.norm();
  if (denom == 0.0) return a.norm();
  return (a - b).norm() / denom;
}

Matrix sample_covariance(const Matrix& samples) {
  const auto n = samples.rows();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "sample_covariance needs at least two rows");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mean;
  return symmetrize(centered.transpose() * centered / static_cast<double>(n - 1));
}

Matrix second_moment(const Matrix& samples) {
  const auto n = samples.rows();
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "second_moment needs at least one row");
  return symmetrize(samples.transpose() * samples / static_cast<double>(n));
}

Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace sgdclt
