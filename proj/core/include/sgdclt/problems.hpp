#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sgdclt/linalg.hpp"
#include "sgdclt/rng.hpp"

namespace sgdclt {

/// Finite-sum logistic regression with ridge penalty:
///   f(x) = (1/N) sum_i [ln(1 + exp(w_i.x)) - y_i w_i.x] + (beta/2) |x|^2.
struct LogisticDataset {
  Matrix features;  // N x d, row i is w_i
  Vector labels;    // N entries in {0, 1}
  double beta = 0.0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Synthetic dataset: w_ij = s_j z_ij with z_ij standard normal and s =
/// `feature_scales` (empty means all ones), and labels are
/// Bernoulli(sigmoid(w_i.theta)) for a hidden theta ~ N(0, I).
/// Deterministic in `seed`.
LogisticDataset generate_logistic(int d, int N, double beta, std::uint64_t seed,
                                  const Vector& feature_scales = Vector());

/// CSV with header `w_1,...,w_d,y`, one row per sample.
LogisticDataset load_logistic_csv(const std::string& path, double beta);
void save_logistic_csv(const LogisticDataset& data, const std::string& path);

double logistic_value(const LogisticDataset& data, const Vector& x);
Vector logistic_gradient(const LogisticDataset& data, const Vector& x);
Matrix logistic_hessian(const LogisticDataset& data, const Vector& x);
/// Gradient of the i-th summand, penalty included: w_i (sigmoid(w_i.x) - y_i) + beta x.
void logistic_component_gradient(const LogisticDataset& data, Eigen::Index i, const Vector& x,
                                 Vector& out);

struct Minimizer {
  Vector x;
  Matrix hessian;
  double grad_norm = 0.0;
  int iterations = 0;
};

/// Damped Newton iteration down to |grad f| <= tol. Throws NoConvergence when
/// the iteration budget runs out.
Minimizer solve_minimizer(const LogisticDataset& data, double tol = 1e-10, int max_iter = 200);

enum class ProblemKind { Quadratic, Logistic, Counterexample };

/// Objective with known minimizer and Hessian there.
class Problem {
 public:
  ProblemKind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return x_star_.size(); }
  const Vector& x_star() const noexcept { return x_star_; }
  /// Hessian at the minimizer.
  const Matrix& hessian() const noexcept { return A_; }
  double mu() const noexcept { return mu_; }
  double L() const noexcept { return L_; }
  /// False for the counterexample, whose mu is only the curvature at x* = 0.
  bool globally_convex() const noexcept { return globally_convex_; }
  const std::shared_ptr<const LogisticDataset>& dataset() const noexcept { return data_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  /// Allocation-free gradient for the inner loop; `out` must have size dim().
  void gradient_into(const Vector& x, Vector& out) const;

  friend Problem make_quadratic(const Matrix& A);
  friend Problem make_logistic(std::shared_ptr<const LogisticDataset> data);
  friend Problem make_counterexample();

 private:
  Problem() = default;

  ProblemKind kind_ = ProblemKind::Quadratic;
  Vector x_star_;
  Matrix A_;
  double mu_ = 0.0;
  double L_ = 0.0;
  bool globally_convex_ = true;
  std::shared_ptr<const LogisticDataset> data_;
};

/// f(x) = x^T A x / 2, x* = 0. Throws NotSPD.
Problem make_quadratic(const Matrix& A);
/// Solves for the minimizer; mu = beta, L = lambda_max(W^T W / N) / 4 + beta.
Problem make_logistic(std::shared_ptr<const LogisticDataset> data);
/// Scalar f(x) = x^2/2 + x^3/sqrt(1 + x^6); x* = 0 with f''(0) = 1.
Problem make_counterexample();

/// phi(x) = x^3 / sqrt(1 + x^6) and its derivative 3x^2 / (1 + x^6)^(3/2).
double counterexample_phi(double x);
double counterexample_phi_prime(double x);

enum class NoiseKind { None, Additive, MiniBatch };
enum class NoiseDistribution { Gaussian, BoundedUniform };

/// Source of the martingale difference xi_k in g = grad f(x) - xi.
class NoiseModel {
 public:
  static NoiseModel none();
  /// xi = -chol(Sigma) u with u standard normal or uniform on [-sqrt 3, sqrt 3]
  /// (unit variance, bounded). Throws NotSPD unless Sigma is symmetric PSD
  /// with a Cholesky factor.
  static NoiseModel additive(const Matrix& Sigma, NoiseDistribution dist);
  /// Averages `batch_size` summand gradients drawn uniformly without
  /// replacement. Only valid with logistic problems.
  static NoiseModel minibatch(int batch_size);

  NoiseKind kind() const noexcept { return kind_; }
  NoiseDistribution distribution() const noexcept { return dist_; }
  const Matrix& sigma() const noexcept { return Sigma_; }
  const Matrix& factor() const noexcept { return chol_; }
  int batch_size() const noexcept { return batch_; }

 private:
  NoiseKind kind_ = NoiseKind::None;
  NoiseDistribution dist_ = NoiseDistribution::Gaussian;
  Matrix Sigma_;
  Matrix chol_;
  int batch_ = 1;
};

/// Scratch buffers reused across calls to keep the step loop allocation-free.
struct GradientWorkspace {
  Vector grad;
  Vector tmp;
  Vector u;
  std::vector<Eigen::Index> batch;

  explicit GradientWorkspace(Eigen::Index d) : grad(d), tmp(d), u(d) {}
};

/// g = grad f(x) - xi with E[xi | x] = 0. Writes g into `g_out`.
void stochastic_gradient_into(const Problem& p, const NoiseModel& noise, const Vector& x, Rng& rng,
                              GradientWorkspace& ws, Vector& g_out);

/// Returns (g, xi) with xi = grad f(x) - g.
std::pair<Vector, Vector> sample_stochastic_gradient(const Problem& p, const NoiseModel& noise,
                                                     const Vector& x, Rng& rng);

/// Covariance of the noise at x*. For mini-batches this is the population
/// covariance of the summand gradients at x*, scaled by (N-b)/(b(N-1)) for
/// sampling without replacement. Throws DegenerateSigma when
/// lambda_min <= 1e-12.
Matrix sigma_at_min(const Problem& p, const NoiseModel& noise);
/// Same without the degeneracy check.
Matrix sigma_at_min_unchecked(const Problem& p, const NoiseModel& noise);

}  // namespace sgdclt
