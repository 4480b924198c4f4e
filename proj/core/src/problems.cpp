#include "sgdclt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sgdclt/errors.hpp"

namespace sgdclt {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// ln(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double counterexample_phi_second(double x) {
  const double q = 1.0 + std::pow(x, 6);
  return 6.0 * x * std::pow(q, -1.5) - 27.0 * std::pow(x, 7) * std::pow(q, -2.5);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& path) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw Error(ErrorCode::Config, path + ": bad number '" + s + "'");
  return v;
}

}  // namespace

// ---------------------------------------------------------------- datasets

LogisticDataset generate_logistic(int d, int N, double beta, std::uint64_t seed, const Vector& feature_scales) {
  if (d < 1 || N < d) throw Error(ErrorCode::InvalidArgument, "generate_logistic needs d >= 1 and N >= d");
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, "penalty beta must be positive");
  const Vector scales = feature_scales.size() == 0 ? Vector::Ones(d) : feature_scales;
  if (scales.size() != d || !(scales.array() > 0.0).all()) {
    throw Error(ErrorCode::InvalidArgument, "feature_scales must hold d positive entries");
  }
  Rng rng(seed, kAuxStreamBase + 1);
  Vector theta(d);
  for (int j = 0; j < d; ++j) theta(j) = rng.normal();
  LogisticDataset data;
  data.beta = beta;
  data.features.resize(N, d);
  data.labels.resize(N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < d; ++j) data.features(i, j) = scales(j) * rng.normal();
    const double prob = sigmoid(data.features.row(i).dot(theta));
    data.labels(i) = rng.uniform01() < prob ? 1.0 : 0.0;
  }
  return data;
}

LogisticDataset load_logistic_csv(const std::string& path, double beta) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Config, path + ": empty dataset file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "y") {
    throw Error(ErrorCode::Config, path + ": header must be w_1,...,w_d,y");
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (header[j] != "w_" + std::to_string(j + 1)) {
      throw Error(ErrorCode::Config, path + ": header must be w_1,...,w_d,y");
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != d + 1) {
      throw Error(ErrorCode::Config, path + ": row " + std::to_string(rows.size() + 1) + " has wrong width");
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, path));
    if (row.back() != 0.0 && row.back() != 1.0) throw Error(ErrorCode::Config, path + ": labels must be 0 or 1");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::Config, path + ": no samples");
  LogisticDataset data;
  data.beta = beta;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  data.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.features(static_cast<Eigen::Index>(i), j) = rows[i][j];
    data.labels(static_cast<Eigen::Index>(i)) = rows[i].back();
  }
  return data;
}

void save_logistic_csv(const LogisticDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << "w_" << j + 1 << ',';
  out << "y\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << data.features(i, j) << ',';
    out << static_cast<int>(data.labels(i)) << '\n';
  }
}

double logistic_value(const LogisticDataset& data, const Vector& x) {
  const Vector z = data.features * x;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) sum += softplus(z(i)) - data.labels(i) * z(i);
  return sum / static_cast<double>(data.size()) + 0.5 * data.beta * x.squaredNorm();
}

Vector logistic_gradient(const LogisticDataset& data, const Vector& x) {
  Vector r = data.features * x;
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = sigmoid(r(i)) - data.labels(i);
  return data.features.transpose() * r / static_cast<double>(data.size()) + data.beta * x;
}

Matrix logistic_hessian(const LogisticDataset& data, const Vector& x) {
  Vector weights = data.features * x;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double s = sigmoid(weights(i));
    weights(i) = s * (1.0 - s);
  }
  Matrix h = data.features.transpose() * weights.asDiagonal() * data.features / static_cast<double>(data.size());
  h.diagonal().array() += data.beta;
  return symmetrize(h);
}

void logistic_component_gradient(const LogisticDataset& data, Eigen::Index i, const Vector& x, Vector& out) {
  const double r = sigmoid(data.features.row(i).dot(x)) - data.labels(i);
  out.noalias() = r * data.features.row(i).transpose();
  out.noalias() += data.beta * x;
}

Minimizer solve_minimizer(const LogisticDataset& data, double tol, int max_iter) {
  Minimizer m;
  m.x = Vector::Zero(data.dim());
  Vector g = logistic_gradient(data, m.x);
  double f = logistic_value(data, m.x);
  for (int it = 0; it < max_iter; ++it) {
    m.grad_norm = g.norm();
    if (m.grad_norm <= tol) {
      m.iterations = it;
      m.hessian = logistic_hessian(data, m.x);
      return m;
    }
    const Matrix h = logistic_hessian(data, m.x);
    const Vector step = h.ldlt().solve(-g);
    const double slope = g.dot(step);
    double t = 1.0;
    Vector trial = m.x + step;
    double f_trial = logistic_value(data, trial);
    Vector g_trial = logistic_gradient(data, trial);
    // Armijo backtracking. Close to the optimum the change in f drowns in
    // rounding, so a full step that shrinks the gradient is accepted as well.
    while (f_trial > f + 1e-4 * t * slope && !(t == 1.0 && g_trial.norm() < m.grad_norm) && t > 1e-12) {
      t *= 0.5;
      trial = m.x + t * step;
      f_trial = logistic_value(data, trial);
      g_trial = logistic_gradient(data, trial);
    }
    m.x = trial;
    f = f_trial;
    g = g_trial;
  }
  m.grad_norm = g.norm();
  if (m.grad_norm <= tol) {
    m.iterations = max_iter;
    m.hessian = logistic_hessian(data, m.x);
    return m;
  }
  std::ostringstream os;
  os << "gradient norm " << m.grad_norm << " after " << max_iter << " Newton steps";
  throw Error(ErrorCode::NoConvergence, os.str());
}

// ---------------------------------------------------------------- problems

double Problem::value(const Vector& x) const {
  switch (kind_) {
    case ProblemKind::Quadratic:
      return 0.5 * x.dot(A_ * x);
    case ProblemKind::Logistic:
      return logistic_value(*data_, x);
    case ProblemKind::Counterexample:
      return 0.5 * x(0) * x(0) + counterexample_phi(x(0));
  }
  return 0.0;
}

Vector Problem::gradient(const Vector& x) const {
  Vector out(dim());
  gradient_into(x, out);
  return out;
}

void Problem::gradient_into(const Vector& x, Vector& out) const {
  switch (kind_) {
    case ProblemKind::Quadratic:
      out.noalias() = A_ * x;
      return;
    case ProblemKind::Logistic: {
      const auto& w = data_->features;
      out.setZero();
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        out.noalias() += (sigmoid(w.row(i).dot(x)) - data_->labels(i)) * w.row(i).transpose();
      }
      out /= static_cast<double>(w.rows());
      out.noalias() += data_->beta * x;
      return;
    }
    case ProblemKind::Counterexample:
      out(0) = x(0) + counterexample_phi_prime(x(0));
      return;
  }
}

Problem make_quadratic(const Matrix& A) {
  if (A.rows() == 0 || !is_spd(A)) throw Error(ErrorCode::NotSPD, "quadratic Hessian must be SPD");
  Problem p;
  p.kind_ = ProblemKind::Quadratic;
  p.A_ = symmetrize(A);
  p.x_star_ = Vector::Zero(A.rows());
  p.mu_ = min_eigenvalue(p.A_);
  p.L_ = max_eigenvalue(p.A_);
  return p;
}

Problem make_logistic(std::shared_ptr<const LogisticDataset> data) {
  if (!data) throw Error(ErrorCode::InvalidArgument, "null dataset");
  const auto sol = solve_minimizer(*data);
  Problem p;
  p.kind_ = ProblemKind::Logistic;
  p.x_star_ = sol.x;
  p.A_ = sol.hessian;
  p.mu_ = data->beta;
  const Matrix gram = data->features.transpose() * data->features / static_cast<double>(data->size());
  p.L_ = 0.25 * max_eigenvalue(symmetrize(gram)) + data->beta;
  p.data_ = std::move(data);
  return p;
}

double counterexample_phi(double x) { return x * x * x / std::sqrt(1.0 + std::pow(x, 6)); }

double counterexample_phi_prime(double x) { return 3.0 * x * x * std::pow(1.0 + std::pow(x, 6), -1.5); }

Problem make_counterexample() {
  Problem p;
  p.kind_ = ProblemKind::Counterexample;
  p.x_star_ = Vector::Zero(1);
  p.A_ = Matrix::Identity(1, 1);
  p.mu_ = 1.0;
  // |f''| is largest within |x| < 2; sample it finely there.
  double L = 1.0;
  for (int i = -40000; i <= 40000; ++i) {
    const double x = i * 5e-5;
    L = std::max(L, std::abs(1.0 + counterexample_phi_second(x)));
  }
  p.L_ = L;
  p.globally_convex_ = false;
  return p;
}

// ------------------------------------------------------------------- noise

NoiseModel NoiseModel::none() { return NoiseModel(); }

NoiseModel NoiseModel::additive(const Matrix& Sigma, NoiseDistribution dist) {
  if (Sigma.rows() == 0 || !is_symmetric(Sigma, 1e-10) || !Sigma.allFinite()) {
    throw Error(ErrorCode::NotSPD, "noise covariance must be symmetric");
  }
  NoiseModel n;
  n.kind_ = NoiseKind::Additive;
  n.dist_ = dist;
  n.Sigma_ = symmetrize(Sigma);
  Eigen::LLT<Matrix> llt(n.Sigma_);
  if (llt.info() == Eigen::Success) {
    n.chol_ = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(n.Sigma_);
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
      throw Error(ErrorCode::NotSPD, "noise covariance has a negative eigenvalue");
    }
    n.chol_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  return n;
}

NoiseModel NoiseModel::minibatch(int batch_size) {
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  NoiseModel n;
  n.kind_ = NoiseKind::MiniBatch;
  n.batch_ = batch_size;
  return n;
}

void stochastic_gradient_into(const Problem& p, const NoiseModel& noise, const Vector& x, Rng& rng,
                              GradientWorkspace& ws, Vector& g_out) {
  switch (noise.kind()) {
    case NoiseKind::None:
      p.gradient_into(x, g_out);
      return;
    case NoiseKind::Additive: {
      p.gradient_into(x, g_out);
      if (noise.distribution() == NoiseDistribution::Gaussian) {
        for (Eigen::Index j = 0; j < ws.u.size(); ++j) ws.u(j) = rng.normal();
      } else {
        const double h = std::sqrt(3.0);
        for (Eigen::Index j = 0; j < ws.u.size(); ++j) ws.u(j) = h * (2.0 * rng.uniform01() - 1.0);
      }
      g_out.noalias() += noise.factor() * ws.u;
      return;
    }
    case NoiseKind::MiniBatch: {
      const auto& data = p.dataset();
      if (!data) throw Error(ErrorCode::IncompatiblePair, "mini-batch noise needs a dataset-backed problem");
      const auto N = data->size();
      const auto b = static_cast<Eigen::Index>(noise.batch_size());
      if (b > N) throw Error(ErrorCode::InvalidArgument, "batch size exceeds dataset size");
      if (b == 1) {
        logistic_component_gradient(*data, static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(N))), x,
                                    g_out);
        return;
      }
      // Floyd's algorithm: b distinct indices, then summed in index order.
      ws.batch.clear();
      for (Eigen::Index j = N - b; j < N; ++j) {
        const auto t = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(j + 1)));
        if (std::find(ws.batch.begin(), ws.batch.end(), t) == ws.batch.end()) {
          ws.batch.push_back(t);
        } else {
          ws.batch.push_back(j);
        }
      }
      std::sort(ws.batch.begin(), ws.batch.end());
      g_out.setZero();
      for (auto i : ws.batch) {
        logistic_component_gradient(*data, i, x, ws.tmp);
        g_out += ws.tmp;
      }
      g_out /= static_cast<double>(b);
      return;
    }
  }
}

std::pair<Vector, Vector> sample_stochastic_gradient(const Problem& p, const NoiseModel& noise, const Vector& x,
                                                     Rng& rng) {
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "stochastic gradient requested at a non-finite point");
  GradientWorkspace ws(p.dim());
  Vector g(p.dim());
  stochastic_gradient_into(p, noise, x, rng, ws, g);
  Vector xi = p.gradient(x) - g;
  return {std::move(g), std::move(xi)};
}

Matrix sigma_at_min_unchecked(const Problem& p, const NoiseModel& noise) {
  const auto d = p.dim();
  switch (noise.kind()) {
    case NoiseKind::None:
      return Matrix::Zero(d, d);
    case NoiseKind::Additive:
      if (noise.sigma().rows() != d) throw Error(ErrorCode::InvalidArgument, "noise covariance has wrong size");
      return noise.sigma();
    case NoiseKind::MiniBatch: {
      const auto& data = p.dataset();
      if (!data) throw Error(ErrorCode::IncompatiblePair, "mini-batch noise needs a dataset-backed problem");
      const auto N = data->size();
      Matrix grads(N, d);
      Vector tmp(d);
      for (Eigen::Index i = 0; i < N; ++i) {
        logistic_component_gradient(*data, i, p.x_star(), tmp);
        grads.row(i) = tmp.transpose();
      }
      const Eigen::RowVectorXd mean = grads.colwise().mean();
      const Matrix centered = grads.rowwise() - mean;
      Matrix pop = centered.transpose() * centered / static_cast<double>(N);
      const double b = noise.batch_size();
      const double factor = N > 1 ? (static_cast<double>(N) - b) / (b * (static_cast<double>(N) - 1.0)) : 0.0;
      return symmetrize(factor * pop);
    }
  }
  return Matrix::Zero(d, d);
}

Matrix sigma_at_min(const Problem& p, const NoiseModel& noise) {
  Matrix s = sigma_at_min_unchecked(p, noise);
  const double lmin = min_eigenvalue(s);
  if (!(lmin > 1e-12)) {
    std::ostringstream os;
    os << "noise covariance at x* has lambda_min = " << lmin;
    throw Error(ErrorCode::DegenerateSigma, os.str());
  }
  return s;
}

}  // namespace sgdclt
