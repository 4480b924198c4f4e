#pragma once

#include <Eigen/Dense>

namespace sgdclt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Small dense helpers shared by the modules. Everything here works on
// symmetric matrices unless stated otherwise.

double min_eigenvalue(const Matrix& symmetric);
double max_eigenvalue(const Matrix& symmetric);

/// True when `m` is symmetric to `tol` (relative to its largest entry).
bool is_symmetric(const Matrix& m, double tol = 1e-12);

/// Symmetric with all eigenvalues above `floor`.
bool is_spd(const Matrix& m, double floor = 0.0);

/// Minimum real part over the spectrum of a general square matrix.
double min_real_eigenvalue(const Matrix& m);

Matrix symmetrize(const Matrix& m);

/// ||a - b||_F / ||b||_F; returns ||a||_F when b vanishes.
double relative_frobenius_error(const Matrix& a, const Matrix& b);

/// Unbiased sample covariance of the rows of `samples` (n x d), centered at
/// the sample mean.
Matrix sample_covariance(const Matrix& samples);

/// Uncentered second moment (1/n) sum x x^T of the rows of `samples`.
Matrix second_moment(const Matrix& samples);

Matrix block_diag(const Matrix& a, const Matrix& b);

}  // namespace sgdclt
