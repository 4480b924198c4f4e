#include "sgdclt/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "sgdclt/ensemble.hpp"
#include "sgdclt/errors.hpp"
#include "sgdclt/stats.hpp"

#ifndef SGDCLT_VERSION
#define SGDCLT_VERSION "unknown"
#endif

namespace sgdclt {

namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------ json helpers

void allow_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw Error(ErrorCode::Config, where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw Error(ErrorCode::Config, "unknown key '" + key + "' in " + where);
  }
}

const Json* find(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double num(const Json& obj, const char* key, const std::string& where) {
  const Json* v = find(obj, key);
  if (!v) throw Error(ErrorCode::Config, where + "." + key + " is required");
  if (!v->is_number()) throw Error(ErrorCode::Config, where + "." + key + " must be a number");
  return v->get<double>();
}

double num_or(const Json& obj, const char* key, double fallback, const std::string& where) {
  return find(obj, key) ? num(obj, key, where) : fallback;
}

std::int64_t integer(const Json& obj, const char* key, const std::string& where) {
  const Json* v = find(obj, key);
  if (!v) throw Error(ErrorCode::Config, where + "." + key + " is required");
  if (v->is_number_integer()) return v->get<std::int64_t>();
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw Error(ErrorCode::Config, where + "." + key + " must be an integer");
}

std::int64_t integer_or(const Json& obj, const char* key, std::int64_t fallback, const std::string& where) {
  return find(obj, key) ? integer(obj, key, where) : fallback;
}

std::string str(const Json& obj, const char* key, const std::string& where) {
  const Json* v = find(obj, key);
  if (!v) throw Error(ErrorCode::Config, where + "." + key + " is required");
  if (!v->is_string()) throw Error(ErrorCode::Config, where + "." + key + " must be a string");
  return v->get<std::string>();
}

std::string str_or(const Json& obj, const char* key, const std::string& fallback, const std::string& where) {
  return find(obj, key) ? str(obj, key, where) : fallback;
}

bool flag_or(const Json& obj, const char* key, bool fallback, const std::string& where) {
  const Json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw Error(ErrorCode::Config, where + "." + key + " must be true or false");
  return v->get<bool>();
}

const Json& section(const ExperimentConfig& cfg, const char* key) {
  static const Json empty = Json::object();
  const Json* v = find(cfg.raw, key);
  return v ? *v : empty;
}

const Json& required_section(const ExperimentConfig& cfg, const char* key) {
  const Json* v = find(cfg.raw, key);
  if (!v) throw Error(ErrorCode::Config, std::string("section '") + key + "' is required");
  return *v;
}

std::vector<double> num_list(const Json& obj, const char* key, std::vector<double> fallback, const std::string& where) {
  const Json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_array()) throw Error(ErrorCode::Config, where + "." + key + " must be an array");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) throw Error(ErrorCode::Config, where + "." + key + " must hold numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// -------------------------------------------------------------- validation

void validate(const ExperimentConfig& cfg) {
  allow_keys(cfg.raw, "config",
             {"name", "description", "seed", "output_dir", "problem", "noise", "method", "schedule", "damping",
              "ensemble", "d0", "certify", "toggles", "table1", "time_average", "normality", "histogram", "check"});
  if (const Json* p = find(cfg.raw, "problem")) {
    const auto kind = str(*p, "kind", "problem");
    if (kind == "quadratic") {
      allow_keys(*p, "problem", {"kind", "A"});
    } else if (kind == "logistic") {
      allow_keys(*p, "problem", {"kind", "dimension", "samples", "beta", "seed", "feature_scales", "dataset"});
    } else if (kind == "counterexample") {
      allow_keys(*p, "problem", {"kind"});
    } else {
      throw Error(ErrorCode::Config, "problem.kind must be quadratic, logistic or counterexample");
    }
  }
  if (const Json* n = find(cfg.raw, "noise")) {
    const auto kind = str(*n, "kind", "noise");
    if (kind == "none") {
      allow_keys(*n, "noise", {"kind"});
    } else if (kind == "additive") {
      allow_keys(*n, "noise", {"kind", "sigma", "distribution", "b_bound"});
    } else if (kind == "minibatch") {
      allow_keys(*n, "noise", {"kind", "batch_size"});
    } else {
      throw Error(ErrorCode::Config, "noise.kind must be none, additive or minibatch");
    }
  }
  if (const Json* m = find(cfg.raw, "method")) allow_keys(*m, "method", {"name", "mu_tilde"});
  if (const Json* s = find(cfg.raw, "schedule")) {
    allow_keys(*s, "schedule", {"kind", "K", "a", "C", "ratio", "value"});
  }
  if (const Json* d = find(cfg.raw, "damping")) allow_keys(*d, "damping", {"kind", "K_mu", "b"});
  if (const Json* e = find(cfg.raw, "ensemble")) {
    allow_keys(*e, "ensemble",
               {"replicas", "n_steps", "checkpoint_every", "init_scale", "estimator", "scale_rule"});
  }
  if (const Json* c = find(cfg.raw, "certify")) {
    allow_keys(*c, "certify",
               {"horizon", "tail_fraction", "d0_rel_tol", "d0_abs_tol", "d0_window", "pair_samples", "divergence_slope",
                "slope_tol", "beta_h0", "h0_grid"});
  }
  if (const Json* t = find(cfg.raw, "toggles")) {
    allow_keys(*t, "toggles", {"ensemble", "normality", "lp", "histogram", "time_average", "table1"});
  }
  if (const Json* t = find(cfg.raw, "table1")) allow_keys(*t, "table1", {"exponents", "replica_counts", "K", "repetitions"});
  if (const Json* t = find(cfg.raw, "time_average")) {
    allow_keys(*t, "time_average", {"replicas", "n_steps", "report_at", "init_scale", "linear_control"});
  }
  if (const Json* n = find(cfg.raw, "normality")) allow_keys(*n, "normality", {"significance", "reference"});
  if (const Json* h = find(cfg.raw, "histogram")) allow_keys(*h, "histogram", {"bins", "component"});
  if (const Json* c = find(cfg.raw, "check")) {
    allow_keys(*c, "check",
               {"max_rel_err", "min_rel_err", "require_normality", "table1_band", "table1_ratio_range",
                "table1_bias_ratio", "max_time_average_rel_err", "min_drift_growth", "max_control_growth"});
  }
  if (const Json* d0 = find(cfg.raw, "d0"); d0 && !d0->is_number()) {
    throw Error(ErrorCode::Config, "d0 must be a number");
  }
}

CertifyOptions certify_options(const ExperimentConfig& cfg) {
  const Json& c = section(cfg, "certify");
  CertifyOptions o;
  o.horizon = integer_or(c, "horizon", o.horizon, "certify");
  o.tail_fraction = num_or(c, "tail_fraction", o.tail_fraction, "certify");
  o.d0_rel_tol = num_or(c, "d0_rel_tol", o.d0_rel_tol, "certify");
  o.d0_abs_tol = num_or(c, "d0_abs_tol", o.d0_abs_tol, "certify");
  o.d0_window = num_or(c, "d0_window", o.d0_window, "certify");
  o.pair_samples = static_cast<int>(integer_or(c, "pair_samples", o.pair_samples, "certify"));
  o.divergence_slope = num_or(c, "divergence_slope", o.divergence_slope, "certify");
  o.slope_tol = num_or(c, "slope_tol", o.slope_tol, "certify");
  o.beta_h0 = num_or(c, "beta_h0", o.beta_h0, "certify");
  if (o.horizon < 1000) throw Error(ErrorCode::Config, "certify.horizon must be >= 1000");
  return o;
}

/// d0 from the certificate; estimates within tolerance of zero count as zero.
double resolve_d0(const ExperimentConfig& cfg, const Schedule& s) {
  if (const Json* d0 = find(cfg.raw, "d0")) return d0->get<double>();
  const auto o = certify_options(cfg);
  const double est = estimate_d0(s, 1, o.horizon, o.d0_rel_tol, o.d0_abs_tol, o.d0_window);
  return std::abs(est) <= o.d0_abs_tol ? 0.0 : est;
}

std::string resolve_path(const ExperimentConfig& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(cfg.base_dir) / path).string();
}

ScaleRule scale_rule_of(const ExperimentConfig& cfg, Method method) {
  const auto rule = str_or(section(cfg, "ensemble"), "scale_rule", "natural", "ensemble");
  if (rule == "natural") return natural_scale_rule(method);
  if (rule == "alpha") return ScaleRule::Alpha;
  if (rule == "beta") return ScaleRule::Beta;
  throw Error(ErrorCode::Config, "ensemble.scale_rule must be natural, alpha or beta");
}

Estimator estimator_of(const ExperimentConfig& cfg) {
  const auto e = str_or(section(cfg, "ensemble"), "estimator", "centered", "ensemble");
  if (e == "centered") return Estimator::Centered;
  if (e == "uncentered") return Estimator::Uncentered;
  throw Error(ErrorCode::Config, "ensemble.estimator must be centered or uncentered");
}

// ------------------------------------------------------------------ output

class OutputSet {
 public:
  explicit OutputSet(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir_);
  }

  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& rows) {
    write_csv(path(name), header, rows);
    files_.push_back(name);
  }

  void json(const std::string& name, const Json& j) {
    write_text(path(name), dump_json(j));
    files_.push_back(name);
  }

  Json manifest_files() const {
    Json out = Json::array();
    for (const auto& f : files_) out.push_back({{"file", f}, {"sha256", sha256_file(path(f))}});
    return out;
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  std::string dir_;
  std::vector<std::string> files_;
};

/// Published vSGD relative errors on the logistic problem: rows a = 0.25,
/// 0.5, 0.75 against M = 100, 250, 500, 1000, 2000.
double published_table1(double a, std::int64_t M) {
  static const std::array<std::int64_t, 5> Ms{100, 250, 500, 1000, 2000};
  static const std::array<std::array<double, 5>, 3> values{{{0.122, 0.0761, 0.0545, 0.0385, 0.0274},
                                                            {0.123, 0.0791, 0.0535, 0.0400, 0.0268},
                                                            {0.151, 0.102, 0.0957, 0.0808, 0.0646}}};
  const std::array<double, 3> as{0.25, 0.5, 0.75};
  for (std::size_t i = 0; i < as.size(); ++i) {
    if (std::abs(a - as[i]) > 1e-12) continue;
    for (std::size_t j = 0; j < Ms.size(); ++j) {
      if (Ms[j] == M) return values[i][j];
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Json normality_json(const NormalityReport& r) {
  return {{"statistic", r.statistic}, {"p_value", r.p_value},   {"significance", r.significance},
          {"rho", r.rho},             {"passed", r.passed},     {"edf", r.edf},
          {"per_dimension_W", r.per_dimension_W}, {"n", r.n}, {"d", r.d}};
}

}  // namespace

// --------------------------------------------------------------- loading

ExperimentConfig parse_config(const Json& raw, const std::string& base_dir) {
  ExperimentConfig cfg;
  cfg.raw = raw;
  cfg.base_dir = base_dir;
  if (!raw.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  validate(cfg);
  cfg.name = str_or(raw, "name", "experiment", "config");
  cfg.seed = static_cast<std::uint64_t>(integer_or(raw, "seed", 1, "config"));
  cfg.output_dir = str_or(raw, "output_dir", (fs::path("out") / cfg.name).string(), "config");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text(path);
  Json raw;
  try {
    raw = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Config, path + ": " + e.what());
  }
  auto cfg = parse_config(raw, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
  cfg.path = path;
  return cfg;
}

int exit_code_for(const Error& e) noexcept { return is_config_error(e.code()) ? 2 : 3; }

// ----------------------------------------------------------------- builders

Schedule build_schedule(const Json& s) {
  const auto kind = str(s, "kind", "schedule");
  if (kind == "power_law") return Schedule::power_law(num(s, "K", "schedule"), num(s, "a", "schedule"));
  if (kind == "power_law_log") return Schedule::power_law_log(num(s, "C", "schedule"), num(s, "a", "schedule"));
  if (kind == "geometric") return Schedule::geometric(num(s, "K", "schedule"), num(s, "ratio", "schedule"));
  if (kind == "constant") return Schedule::constant(num(s, "value", "schedule"));
  throw Error(ErrorCode::Config, "schedule.kind must be power_law, power_law_log, geometric or constant");
}

std::optional<DampingSchedule> build_damping(const ExperimentConfig& cfg, const Schedule& s, std::int64_t horizon) {
  const Json* d = find(cfg.raw, "damping");
  if (!d) return std::nullopt;
  const auto kind = str(*d, "kind", "damping");
  if (kind == "power_law") return DampingSchedule::power_law(num(*d, "K_mu", "damping"), num(*d, "b", "damping"));
  if (kind == "inverse_partial_sum") {
    return DampingSchedule::inverse_partial_sum(num(*d, "K_mu", "damping"), s, horizon);
  }
  throw Error(ErrorCode::Config, "damping.kind must be power_law or inverse_partial_sum");
}

MethodSpec build_method(const ExperimentConfig& cfg, const Schedule& s, std::int64_t horizon) {
  const Json& m = required_section(cfg, "method");
  MethodSpec spec;
  spec.method = method_from_string(str(m, "name", "method"));
  switch (spec.method) {
    case Method::VSGD:
      break;
    case Method::MSGD_Const:
    case Method::NASGD_Const:
      spec.mu_tilde = num(m, "mu_tilde", "method");
      break;
    case Method::MSGD_Vanishing:
      spec.damping = build_damping(cfg, s, horizon);
      if (!spec.damping) throw Error(ErrorCode::Config, "msgd_vanishing needs a damping section");
      break;
  }
  return spec;
}

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  const Json& p = required_section(cfg, "problem");
  const auto kind = str(p, "kind", "problem");
  BuiltProblem out;
  if (kind == "quadratic") {
    const Json* A = find(p, "A");
    if (!A) throw Error(ErrorCode::Config, "problem.A is required");
    out.problem = std::make_shared<const Problem>(make_quadratic(matrix_from_json(*A)));
  } else if (kind == "logistic") {
    const double beta = num(p, "beta", "problem");
    std::shared_ptr<LogisticDataset> data;
    if (const Json* path = find(p, "dataset")) {
      if (!path->is_string()) throw Error(ErrorCode::Config, "problem.dataset must be a path");
      const auto resolved = resolve_path(cfg, path->get<std::string>());
      if (!fs::exists(resolved)) throw Error(ErrorCode::Config, "dataset file not found: " + resolved);
      data = std::make_shared<LogisticDataset>(load_logistic_csv(resolved, beta));
    } else {
      const int d = static_cast<int>(integer(p, "dimension", "problem"));
      Vector scales;
      if (const Json* s = find(p, "feature_scales")) {
        if (!s->is_array()) throw Error(ErrorCode::Config, "problem.feature_scales must be a list");
        scales.resize(static_cast<Eigen::Index>(s->size()));
        for (std::size_t j = 0; j < s->size(); ++j) {
          if (!(*s)[j].is_number()) throw Error(ErrorCode::Config, "problem.feature_scales must hold numbers");
          scales(static_cast<Eigen::Index>(j)) = (*s)[j].get<double>();
        }
        if (scales.size() != d) throw Error(ErrorCode::Config, "problem.feature_scales needs one entry per dimension");
      }
      data = std::make_shared<LogisticDataset>(generate_logistic(
          d, static_cast<int>(integer(p, "samples", "problem")), beta,
          static_cast<std::uint64_t>(integer_or(p, "seed", 7, "problem")), scales));
    }
    out.problem = std::make_shared<const Problem>(make_logistic(std::move(data)));
  } else {
    out.problem = std::make_shared<const Problem>(make_counterexample());
  }

  const auto d = out.problem->dim();
  const Json& n = required_section(cfg, "noise");
  const auto nkind = str(n, "kind", "noise");
  if (nkind == "none") {
    out.noise = NoiseModel::none();
  } else if (nkind == "minibatch") {
    if (out.problem->kind() != ProblemKind::Logistic) {
      throw Error(ErrorCode::IncompatiblePair, "mini-batch noise needs the logistic problem");
    }
    out.noise = NoiseModel::minibatch(static_cast<int>(integer_or(n, "batch_size", 1, "noise")));
  } else {
    const auto dist = str_or(n, "distribution", "gaussian", "noise");
    if (dist != "gaussian" && dist != "uniform") throw Error(ErrorCode::Config, "noise.distribution must be gaussian or uniform");
    Matrix Sigma;
    if (const Json* b = find(n, "b_bound")) {
      if (find(n, "sigma")) throw Error(ErrorCode::Config, "give either noise.sigma or noise.b_bound");
      if (dist != "uniform" || !b->is_number()) throw Error(ErrorCode::Config, "noise.b_bound needs the uniform distribution");
      const double bb = b->get<double>();
      // Uniform on [-b, b] has variance b^2 / 3.
      Sigma = Matrix::Identity(d, d) * (bb * bb / 3.0);
    } else {
      const Json* s = find(n, "sigma");
      if (!s) throw Error(ErrorCode::Config, "noise.sigma is required for additive noise");
      Sigma = matrix_from_json(*s);
    }
    if (Sigma.rows() != d || Sigma.cols() != d) throw Error(ErrorCode::Config, "noise.sigma has the wrong size");
    out.noise = NoiseModel::additive(
        Sigma, dist == "gaussian" ? NoiseDistribution::Gaussian : NoiseDistribution::BoundedUniform);
  }
  out.Sigma = sigma_at_min_unchecked(*out.problem, out.noise);
  return out;
}

LimitCovariance compute_limit_covariance(const Problem& p, const Matrix& Sigma, const MethodSpec& spec, double d0) {
  LimitCovariance lc;
  lc.d0 = d0;
  const Matrix& A = p.hessian();
  switch (spec.method) {
    case Method::VSGD: {
      lc.d0_admissible = d0 < 2.0 * p.mu();
      lc.solution = vsgd_limit_cov(A, Sigma, d0);
      lc.cross_check_rel_diff = relative_frobenius_error(lc.solution.W, solve_general(A, Sigma, d0).W);
      lc.system = system_matrices(p, spec.method, 0.0);
      break;
    }
    case Method::MSGD_Const:
    case Method::NASGD_Const: {
      lc.system = system_matrices(p, spec.method, spec.mu_tilde);
      lc.d0_admissible = d0 < 2.0 * lc.system->lambda_D;
      const Matrix S = lifted_sigma(Sigma, spec.method);
      const auto general = solve_general(lc.system->D, S, d0);
      if (spec.method == Method::MSGD_Const && d0 == 0.0) {
        lc.solution = msgd_limit_cov(A, Sigma, spec.mu_tilde);
        lc.cross_check_rel_diff = relative_frobenius_error(lc.solution.W, general.W);
      } else {
        lc.solution = general;
        lc.cross_check_rel_diff = std::numeric_limits<double>::quiet_NaN();
      }
      break;
    }
    case Method::MSGD_Vanishing:
      lc.system = system_matrices(p, spec.method, 0.0);
      lc.solution = vanishing_limit_cov(A, Sigma);
      lc.cross_check_rel_diff = std::numeric_limits<double>::quiet_NaN();
      break;
  }
  return lc;
}

// ------------------------------------------------------------- certificates

Json to_json(const ScheduleCertificate& cert) {
  Json details = Json::array();
  for (const auto& c : cert.details) {
    details.push_back({{"name", c.name}, {"value", c.value}, {"passed", c.passed}, {"note", c.note}});
  }
  Json j{{"d0_estimate", cert.d0_estimate},
         {"h0_witness", cert.h0_witness},
         {"Ks_witness", cert.Ks_witness},
         {"divergence_ok", cert.divergence_ok},
         {"sufficient_decrease_ok", cert.sufficient_decrease_ok},
         {"smallest_m", cert.smallest_m},
         {"all_passed", cert.all_passed()},
         {"details", details}};
  if (cert.L_mu_estimate) j["L_mu_estimate"] = *cert.L_mu_estimate;
  return j;
}

Json certify_report(const ExperimentConfig& cfg) {
  const auto s = build_schedule(required_section(cfg, "schedule"));
  const auto o = certify_options(cfg);
  Json report{{"schedule", s.describe()}, {"horizon", o.horizon}};
  report["certificate"] = to_json(certify_schedule(s, o));
  const auto grid = num_list(section(cfg, "certify"), "h0_grid", {}, "certify");
  if (!grid.empty()) {
    Json rows = Json::array();
    for (double h0 : grid) {
      try {
        const auto r = check_h0_slow(s, h0, o.pair_samples, o.horizon, o.slope_tol);
        rows.push_back({{"h0", h0}, {"passed", r.passed}, {"Ks_witness", r.Ks_witness}, {"slope", r.slope}});
      } catch (const Error& e) {
        rows.push_back({{"h0", h0}, {"passed", false}, {"error", e.what()}});
      }
    }
    report["h0_grid"] = rows;
  }
  if (find(cfg.raw, "damping")) {
    const auto d = build_damping(cfg, s, o.horizon + 1);
    report["damping"] = d->describe();
    report["damping_certificate"] = to_json(check_vanishing_damping(s, *d, o));
  }
  return report;
}

Json wstar_report(const ExperimentConfig& cfg) {
  const auto built = build_problem(cfg);
  double d0 = 0.0;
  std::optional<Schedule> s;
  if (find(cfg.raw, "schedule")) s = build_schedule(required_section(cfg, "schedule"));
  if (find(cfg.raw, "d0")) {
    d0 = cfg.raw["d0"].get<double>();
  } else if (s) {
    d0 = resolve_d0(cfg, *s);
  }
  const auto spec = build_method(cfg, s ? *s : Schedule::constant(1.0), certify_options(cfg).horizon + 1);
  const Matrix Sigma = sigma_at_min(*built.problem, built.noise);
  const auto lc = compute_limit_covariance(*built.problem, Sigma, spec, d0);
  Json j{{"method", std::string(to_string(spec.method))},
         {"d0", d0},
         {"W_star", to_json(lc.solution.W)},
         {"residual", lc.solution.residual},
         {"solver", std::string(to_string(lc.solution.method))},
         {"cross_check_rel_diff", lc.cross_check_rel_diff},
         {"mu", built.problem->mu()},
         {"L", built.problem->L()},
         {"x_star", to_json(built.problem->x_star())},
         {"hessian", to_json(built.problem->hessian())},
         {"Sigma", to_json(Sigma)}};
  if (lc.system) {
    j["lambda_D"] = lc.system->lambda_D;
    j["h_D"] = lc.system->h_D;
    if (spec.method == Method::MSGD_Const || spec.method == Method::NASGD_Const) {
      j["h_D_below_lambda_D"] = lc.system->h_D_below_lambda_D;
    }
  }
  const double bound = spec.method == Method::VSGD ? 2.0 * built.problem->mu()
                                                   : 2.0 * (lc.system ? lc.system->lambda_D : 0.0);
  j["d0_admissibility"] = {{"condition", spec.method == Method::VSGD ? "d0 < 2 mu" : "d0 < 2 lambda_D"},
                           {"bound", bound},
                           {"passed", lc.d0_admissible}};
  return j;
}

// ---------------------------------------------------------------------- run

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunResult result;
  const Json& toggles = section(cfg, "toggles");
  const Json& check = section(cfg, "check");
  OutputSet out(opt.out_dir ? *opt.out_dir : cfg.output_dir);
  result.output_dir = out.dir();
  Json summary{{"name", cfg.name}, {"seed", cfg.seed}};
  auto fail = [&](const std::string& what) { result.check_failures.push_back(what); };

  const auto built = build_problem(cfg);
  const Problem& p = *built.problem;
  summary["problem"] = {{"dimension", p.dim()}, {"mu", p.mu()}, {"L", p.L()}, {"x_star", to_json(p.x_star())}};

  // Replica-count sweep: vSGD over several exponents with nested replica prefixes.
  if (flag_or(toggles, "table1", false, "toggles")) {
    const Json& t = section(cfg, "table1");
    const auto exponents = num_list(t, "exponents", {0.25, 0.5, 0.75}, "table1");
    std::vector<std::int64_t> Ms;
    for (double m : num_list(t, "replica_counts", {100, 250, 500, 1000, 2000}, "table1")) {
      Ms.push_back(static_cast<std::int64_t>(m));
    }
    std::sort(Ms.begin(), Ms.end());
    const double K = num_or(t, "K", 0.1, "table1");
    const auto repetitions = static_cast<int>(integer_or(t, "repetitions", 1, "table1"));
    if (repetitions < 1) throw Error(ErrorCode::Config, "table1.repetitions must be >= 1");
    const Json& e = section(cfg, "ensemble");
    const Matrix Sigma = sigma_at_min(p, built.noise);
    const double band = num_or(check, "table1_band", 2.0, "check");
    const auto range = num_list(check, "table1_ratio_range", {0.55, 0.85}, "check");
    const double bias_ratio = num_or(check, "table1_bias_ratio", 0.85, "check");

    std::vector<std::vector<double>> rows;
    Json sweep = Json::array();
    for (double a : exponents) {
      const auto s = Schedule::power_law(K, a);
      const auto W = vsgd_limit_cov(p.hessian(), Sigma, 0.0);
      EnsembleConfig ec;
      ec.problem = &p;
      ec.noise = &built.noise;
      ec.schedule = s;
      ec.method = {Method::VSGD, 0.0, std::nullopt};
      // Independent ensembles side by side; cells average rel_err over them.
      ec.replicas = Ms.back() * repetitions;
      ec.n_steps = integer_or(e, "n_steps", 200000, "ensemble");
      ec.checkpoint_every = integer_or(e, "checkpoint_every", ec.n_steps, "ensemble");
      ec.master_seed = cfg.seed;
      ec.init_scale = num_or(e, "init_scale", 0.0, "ensemble");
      ec.estimator = Estimator::Uncentered;
      ec.W_star = W.W;
      ec.threads = opt.threads;
      const auto trace = run_ensemble(ec);
      if (!trace.failed_ids.empty()) throw Error(ErrorCode::NonFinite, "table1 sweep lost replicas");
      const auto table = sampling_error_scaling(trace, Ms, W.W, repetitions);
      Json row{{"a", a}, {"repetitions", repetitions}, {"mean_ratio", table.mean_ratio}, {"ratios", table.ratios}};
      Json cells = Json::array();
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const double published = published_table1(a, table.rows[i].M);
        const double ratio = i > 0 ? table.ratios[i - 1] : std::numeric_limits<double>::quiet_NaN();
        rows.push_back({a, static_cast<double>(table.rows[i].M), table.rows[i].rel_err, published, ratio});
        cells.push_back({{"M", table.rows[i].M}, {"rel_err", table.rows[i].rel_err}, {"published", published}});
        if (a <= 0.5 && std::isfinite(published) &&
            (table.rows[i].rel_err > band * published || table.rows[i].rel_err < published / band)) {
          std::ostringstream os;
          os << "table1 a=" << a << " M=" << table.rows[i].M << ": rel_err " << table.rows[i].rel_err
             << " outside factor " << band << " of " << published;
          fail(os.str());
        }
      }
      row["cells"] = cells;
      if (a <= 0.5 && (table.mean_ratio < range.at(0) || table.mean_ratio > range.at(1))) {
        std::ostringstream os;
        os << "table1 a=" << a << ": mean ratio " << table.mean_ratio << " outside [" << range[0] << ", " << range[1] << "]";
        fail(os.str());
      }
      if (a > 0.5 && std::none_of(table.ratios.begin(), table.ratios.end(), [&](double r) { return r > bias_ratio; })) {
        std::ostringstream os;
        os << "table1 a=" << a << ": no ratio above " << bias_ratio;
        fail(os.str());
      }
      sweep.push_back(row);
    }
    out.csv("table1.csv", {"a", "M", "rel_err", "published", "ratio_to_previous"}, rows);
    summary["table1"] = sweep;
  }

  // Main ensemble run.
  const bool have_schedule = find(cfg.raw, "schedule") != nullptr;
  if (flag_or(toggles, "ensemble", have_schedule && find(cfg.raw, "ensemble"), "toggles")) {
    const auto s = build_schedule(required_section(cfg, "schedule"));
    const Json& e = required_section(cfg, "ensemble");
    const std::int64_t n_steps = integer(e, "n_steps", "ensemble");
    const auto spec = build_method(cfg, s, n_steps + 1);
    const auto o = certify_options(cfg);

    Json cert = to_json(certify_schedule(s, o));
    if (spec.method == Method::MSGD_Vanishing) {
      cert["damping"] = to_json(check_vanishing_damping(s, *spec.damping, o));
    }
    out.json("certificate.json", cert);

    const double d0 = resolve_d0(cfg, s);
    const Matrix Sigma = sigma_at_min(p, built.noise);
    const auto lc = compute_limit_covariance(p, Sigma, spec, d0);
    Json wj{{"W_star", to_json(lc.solution.W)},
            {"residual", lc.solution.residual},
            {"solver", std::string(to_string(lc.solution.method))},
            {"d0", d0},
            {"d0_admissible", lc.d0_admissible},
            {"cross_check_rel_diff", lc.cross_check_rel_diff}};
    if (lc.system) {
      wj["lambda_D"] = lc.system->lambda_D;
      wj["h_D"] = lc.system->h_D;
    }
    out.json("wstar.json", wj);

    EnsembleConfig ec;
    ec.problem = &p;
    ec.noise = &built.noise;
    ec.schedule = s;
    ec.method = spec;
    ec.replicas = integer(e, "replicas", "ensemble");
    ec.n_steps = n_steps;
    ec.checkpoint_every = integer_or(e, "checkpoint_every", 10000, "ensemble");
    ec.master_seed = cfg.seed;
    ec.init_scale = num_or(e, "init_scale", 1.0, "ensemble");
    ec.scale_rule = scale_rule_of(cfg, spec.method);
    ec.estimator = estimator_of(cfg);
    ec.W_star = lc.solution.W;
    ec.threads = opt.threads;
    const auto trace = run_ensemble(ec);

    std::vector<std::vector<double>> rows;
    for (const auto& cp : trace.checkpoints) {
      rows.push_back({static_cast<double>(cp.k), cp.scale, cp.rel_err, cp.frob_V, cp.mean.norm()});
    }
    out.csv("trace.csv", {"k", "scale_k", "rel_err", "frob_Vk", "mean_norm"}, rows);
    const auto& last = trace.checkpoints.back();
    out.json("trace.json", {{"k", last.k},
                            {"scale_k", last.scale},
                            {"scale_rule", trace.scale_rule == ScaleRule::Alpha ? "alpha" : "beta"},
                            {"estimator", trace.estimator == Estimator::Centered ? "centered" : "uncentered"},
                            {"replicas", trace.replicas},
                            {"failed_replicas", trace.failed_replicas},
                            {"rel_err", last.rel_err},
                            {"V_k", to_json(last.V)},
                            {"W_k", to_json(last.W)},
                            {"W_star", to_json(lc.solution.W)},
                            {"mean_k", to_json(last.mean)}});
    summary["final_rel_err"] = last.rel_err;
    summary["failed_replicas"] = trace.failed_replicas;

    if (const Json* v = find(check, "max_rel_err"); v && !(last.rel_err <= v->get<double>())) {
      fail("final rel_err " + format_double(last.rel_err) + " above " + format_double(v->get<double>()));
    }
    if (const Json* v = find(check, "min_rel_err"); v && !(last.rel_err > v->get<double>())) {
      fail("final rel_err " + format_double(last.rel_err) + " not above " + format_double(v->get<double>()));
    }

    if (flag_or(toggles, "histogram", true, "toggles")) {
      const Json& h = section(cfg, "histogram");
      const auto comp = static_cast<Eigen::Index>(integer_or(h, "component", 0, "histogram"));
      const auto& snap = trace.snapshots.back();
      if (comp < 0 || comp >= snap.cols()) throw Error(ErrorCode::Config, "histogram.component out of range");
      std::vector<double> sample(static_cast<std::size_t>(snap.rows()));
      for (Eigen::Index i = 0; i < snap.rows(); ++i) sample[static_cast<std::size_t>(i)] = snap(i, comp);
      const auto hist = histogram_summary(sample, static_cast<int>(integer_or(h, "bins", 50, "histogram")));
      std::vector<std::vector<double>> hrows;
      for (std::size_t b = 0; b < hist.counts.size(); ++b) {
        hrows.push_back({hist.edges[b], hist.edges[b + 1], static_cast<double>(hist.counts[b]), hist.mean, hist.sd});
      }
      out.csv("histogram.csv", {"left", "right", "count", "fit_mean", "fit_sd"}, hrows);
    }

    if (flag_or(toggles, "normality", true, "toggles")) {
      const Json& nj = section(cfg, "normality");
      const double sig = num_or(nj, "significance", 0.05, "normality");
      const auto reference = str_or(nj, "reference", "empirical", "normality");
      if (reference != "empirical" && reference != "wstar" && reference != "both") {
        throw Error(ErrorCode::Config, "normality.reference must be empirical, wstar or both");
      }
      Json per = Json::array();
      bool final_passed = false;
      for (std::size_t c = 0; c < trace.checkpoints.size(); ++c) {
        const auto& cp = trace.checkpoints[c];
        Json entry{{"k", cp.k}};
        try {
          if (reference != "wstar") {
            const auto rep = whiten_and_test(trace.snapshots[c], sample_covariance(trace.snapshots[c]), sig);
            entry["empirical"] = normality_json(rep);
            if (c + 1 == trace.checkpoints.size()) final_passed = rep.passed;
          }
          if (reference != "empirical") {
            const auto rep = whiten_and_test(trace.snapshots[c], lc.solution.W * cp.scale, sig);
            entry["wstar"] = normality_json(rep);
            if (c + 1 == trace.checkpoints.size() && reference == "wstar") final_passed = rep.passed;
          }
        } catch (const Error& err) {
          entry["error"] = err.what();
        }
        per.push_back(entry);
      }
      out.json("normality.json", {{"significance", sig}, {"reference", reference}, {"checkpoints", per}});
      summary["final_normality_passed"] = final_passed;
      if (flag_or(check, "require_normality", false, "check") && !final_passed) fail("final snapshot fails normality");
    }

    if (flag_or(toggles, "lp", true, "toggles") && trace.checkpoints.size() >= 5) {
      const auto lp = lp_bound_diagnostic(trace);
      std::vector<std::vector<double>> lrows;
      for (const auto& r : lp.rows) lrows.push_back({static_cast<double>(r.k), r.ratio[0], r.ratio[1]});
      out.csv("lp.csv", {"k", "p1_ratio", "p1.5_ratio"}, lrows);
      summary["lp_bounded"] = {lp.bounded[0], lp.bounded[1]};
    }
  }

  // Time-average CLT.
  if (flag_or(toggles, "time_average", false, "toggles")) {
    const auto s = build_schedule(required_section(cfg, "schedule"));
    if (const Json* m = find(cfg.raw, "method"); m && str(*m, "name", "method") != "vsgd") {
      throw Error(ErrorCode::IncompatiblePair, "the time average is defined for vsgd");
    }
    const Json& t = section(cfg, "time_average");
    TimeAverageConfig tc;
    tc.problem = &p;
    tc.noise = &built.noise;
    tc.schedule = s;
    tc.replicas = integer_or(t, "replicas", 1000, "time_average");
    tc.n_steps = integer_or(t, "n_steps", 100000, "time_average");
    for (double n : num_list(t, "report_at", {}, "time_average")) tc.report_at.push_back(static_cast<std::int64_t>(n));
    tc.master_seed = cfg.seed;
    tc.init_scale = num_or(t, "init_scale", 0.0, "time_average");
    tc.threads = opt.threads;
    const auto rep = time_average_experiment(tc);

    auto rows_of = [](const TimeAverageReport& r) {
      std::vector<std::vector<double>> rows;
      for (const auto& pt : r.points) {
        rows.push_back({static_cast<double>(pt.n), pt.T, pt.S, pt.drift_stat, pt.rms_scaled, pt.cov_scaled.trace(),
                        pt.rel_err});
      }
      return rows;
    };
    const std::vector<std::string> header{"n", "T_n", "S_n", "drift_stat", "rms_scaled", "trace_cov", "rel_err"};
    out.csv("time_average.csv", header, rows_of(rep));
    const auto& last = rep.points.back();
    Json tj{{"target", to_json(rep.target)},
            {"cov_scaled", to_json(last.cov_scaled)},
            {"mean_scaled", to_json(last.mean_scaled)},
            {"rel_err", last.rel_err},
            {"drift_growth", last.drift_stat / rep.points.front().drift_stat},
            {"failed_replicas", rep.failed_replicas}};
    if (const Json* v = find(check, "max_time_average_rel_err"); v && !(last.rel_err <= v->get<double>())) {
      fail("time-average rel_err " + format_double(last.rel_err) + " above " + format_double(v->get<double>()));
    }
    if (const Json* v = find(check, "min_drift_growth")) {
      const double growth = last.drift_stat / rep.points.front().drift_stat;
      if (!(growth >= v->get<double>())) fail("drift growth " + format_double(growth) + " below " + format_double(v->get<double>()));
    }
    if (flag_or(t, "linear_control", false, "time_average")) {
      // Same schedule and noise on f(x) = |x|^2 / 2.
      const Problem control = make_quadratic(Matrix::Identity(p.dim(), p.dim()));
      TimeAverageConfig cc = tc;
      cc.problem = &control;
      const auto crep = time_average_experiment(cc);
      out.csv("time_average_control.csv", header, rows_of(crep));
      const double growth = crep.points.back().rms_scaled / crep.points.front().rms_scaled;
      tj["control_rms_growth"] = growth;
      tj["control_rel_err"] = crep.points.back().rel_err;
      if (const Json* v = find(check, "max_control_growth"); v && !(growth <= v->get<double>())) {
        fail("control rms growth " + format_double(growth) + " above " + format_double(v->get<double>()));
      }
    }
    out.json("time_average.json", tj);
    summary["time_average"] = tj;
  }

  summary["check_failures"] = result.check_failures;
  out.json("summary.json", summary);

  Json manifest{{"name", cfg.name},
                {"seed", cfg.seed},
                {"config_sha256", sha256_string(cfg.path.empty() ? cfg.raw.dump() : read_text(cfg.path))},
                {"versions",
                 {{"sgdclt", SGDCLT_VERSION},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) +
                                "." + std::to_string(BOOST_VERSION % 100)},
                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                {"files", out.manifest_files()}};
  write_text((fs::path(out.dir()) / "manifest.json").string(), dump_json(manifest));

  result.summary = summary;
  result.exit_code = opt.check && !result.check_failures.empty() ? 4 : 0;
  return result;
}

}  // namespace sgdclt
