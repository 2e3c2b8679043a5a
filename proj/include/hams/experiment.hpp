#pragma once

#include "hams/chain.hpp"
#include "hams/diagnostics.hpp"
#include "hams/gibbs.hpp"
#include "hams/models.hpp"
#include "hams/toml_lite.hpp"
#include "hams/tuning.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace hams {

inline constexpr const char* kToolkitVersion = "0.1.0";

using json = nlohmann::ordered_json;

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration

struct SamplerEntry {
  std::string label;
  MethodSetup setup;
  double epsilon = 0.1;
  MethodSetup param_setup;  // parameter block of posterior models
  double param_epsilon = 0.1;
};

struct ModelSection {
  std::string name;
  // mvn
  int dim = 100;
  double rho = 0.9;
  // stochastic volatility
  int T = 200;
  double beta = 0.65, sigma = 0.15, phi = 0.98;
  // Cox process
  int m = 8;
  double sigma2 = 1.91, length_scale = 0.3;
  std::optional<double> mu;
  std::uint64_t data_seed = 1;
  std::string data_file;

  bool posterior() const { return name == "sv_posterior" || name == "cox_posterior"; }
};

struct ExperimentConfig {
  json raw;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int threads = 1;
  int repetitions = 1;
  bool record_timing = true;
  ModelSection model;
  long burn_in = 1000;
  long n_collect = 1000;
  bool precondition = false;
  int acf_lags = 50;
  std::vector<int> acf_coordinates{0};
  int ess_K = 3000;
  std::array<long, 4> stages{3250, 3250, 3500, 10000};
  bool tune = true;
  TuningPolicy gradient_policy = TuningPolicy::gradient();
  TuningPolicy rw_policy = TuningPolicy::random_walk();
  std::vector<SamplerEntry> samplers;

  // Hash of everything that influences the draws (output location and thread
  // count excluded).
  std::string config_hash() const {
    json h = raw;
    h.erase("output");
    h.erase("threads");
    return hex64(fnv1a64(h.dump()));
  }
};

namespace detail {

// Typed access to one table; remembers which keys were read so leftovers can
// be reported as unknown.
class TableReader {
 public:
  TableReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + " must be a table");
  }

  bool has(const std::string& k) {
    seen_.insert(k);
    return obj_.contains(k);
  }

  double number(const std::string& k, std::optional<double> def = std::nullopt) {
    if (!has(k)) return required(k, def);
    const json& v = obj_.at(k);
    if (!v.is_number()) throw ConfigError(where_ + "." + k + " must be a number");
    return v.get<double>();
  }

  long integer(const std::string& k, std::optional<long> def = std::nullopt) {
    if (!has(k)) return required(k, def);
    const json& v = obj_.at(k);
    if (!v.is_number_integer()) throw ConfigError(where_ + "." + k + " must be an integer");
    return v.get<long>();
  }

  std::uint64_t u64(const std::string& k, std::optional<std::uint64_t> def = std::nullopt) {
    if (!has(k)) return required(k, def);
    const json& v = obj_.at(k);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError(where_ + "." + k + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& k, std::optional<bool> def = std::nullopt) {
    if (!has(k)) return required(k, def);
    const json& v = obj_.at(k);
    if (!v.is_boolean()) throw ConfigError(where_ + "." + k + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& k, std::optional<std::string> def = std::nullopt) {
    if (!has(k)) return required(k, def);
    const json& v = obj_.at(k);
    if (!v.is_string()) throw ConfigError(where_ + "." + k + " must be a string");
    return v.get<std::string>();
  }

  std::vector<long> integers(const std::string& k, std::vector<long> def) {
    if (!has(k)) return def;
    const json& v = obj_.at(k);
    if (!v.is_array()) throw ConfigError(where_ + "." + k + " must be an array of integers");
    std::vector<long> out;
    for (const auto& e : v) {
      if (!e.is_number_integer())
        throw ConfigError(where_ + "." + k + " must be an array of integers");
      out.push_back(e.get<long>());
    }
    return out;
  }

  const json* table(const std::string& k) {
    if (!has(k)) return nullptr;
    return &obj_.at(k);
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where_);
  }

 private:
  template <class T>
  T required(const std::string& k, const std::optional<T>& def) const {
    if (!def) throw ConfigError("missing required key " + where_ + "." + k);
    return *def;
  }

  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

inline const std::set<std::string>& model_names() {
  static const std::set<std::string> names{"mvn", "sv_latent", "sv_posterior", "cox_latent",
                                           "cox_posterior"};
  return names;
}

inline MethodSetup read_method(TableReader& r, const std::string& prefix, Method method,
                              double fallback_c, int default_nleap) {
  MethodSetup s;
  s.method = method;
  s.fallback_c = fallback_c;
  if (r.has(prefix + "c")) s.c = r.number(prefix + "c");
  s.nleap = static_cast<int>(r.integer(prefix + "nleap", default_nleap));
  if (s.c && !(*s.c >= 0.0 && *s.c <= 1.0))
    throw ConfigError("sampler " + prefix + "c must lie in [0, 1]");
  if (s.nleap < 1) throw ConfigError("sampler " + prefix + "nleap must be at least 1");
  return s;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& raw) {
  ExperimentConfig cfg;
  cfg.raw = raw;
  detail::TableReader top(raw, "config");
  cfg.seed = top.u64("seed", 1);
  cfg.output_dir = top.string("output", "out");
  cfg.threads = static_cast<int>(top.integer("threads", 1));
  cfg.repetitions = static_cast<int>(top.integer("repetitions", 1));
  cfg.record_timing = top.boolean("record_timing", true);
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be at least 1");

  const json* model = top.table("model");
  if (!model) throw ConfigError("missing [model] table");
  {
    detail::TableReader r(*model, "model");
    auto& m = cfg.model;
    m.name = r.string("name");
    if (!detail::model_names().count(m.name))
      throw ConfigError("model.name '" + m.name +
                        "' is not one of mvn, sv_latent, sv_posterior, cox_latent, cox_posterior");
    m.data_seed = r.u64("data_seed", 1);
    m.data_file = r.string("data_file", "");
    if (m.name == "mvn") {
      m.dim = static_cast<int>(r.integer("dim", 100));
      m.rho = r.number("rho", 0.9);
      if (m.dim < 1 || !(std::abs(m.rho) < 1.0)) throw ConfigError("model: need dim >= 1, |rho| < 1");
    } else if (m.name.rfind("sv", 0) == 0) {
      m.T = static_cast<int>(r.integer("T", 200));
      m.beta = r.number("beta", 0.65);
      m.sigma = r.number("sigma", 0.15);
      m.phi = r.number("phi", 0.98);
      if (m.T < 2 || !(m.beta > 0) || !(m.sigma > 0) || !(std::abs(m.phi) < 1))
        throw ConfigError("model: need T >= 2, beta > 0, sigma > 0, |phi| < 1");
    } else {
      m.m = static_cast<int>(r.integer("m", 8));
      m.sigma2 = r.number("sigma2", 1.91);
      m.length_scale = r.number("beta", 0.3);
      if (r.has("mu")) m.mu = r.number("mu");
      if (m.m < 1 || m.m > 32 || !(m.sigma2 > 0) || !(m.length_scale > 0))
        throw ConfigError("model: need 1 <= m <= 32, sigma2 > 0, beta > 0");
    }
    r.finish();
  }

  if (const json* run = top.table("run")) {
    detail::TableReader r(*run, "run");
    cfg.burn_in = r.integer("burn_in", 1000);
    cfg.n_collect = r.integer("n_collect", 1000);
    cfg.precondition = r.boolean("precondition", false);
    cfg.acf_lags = static_cast<int>(r.integer("acf_lags", 50));
    const auto coords = r.integers("acf_coordinates", {0});
    cfg.acf_coordinates.assign(coords.begin(), coords.end());
    cfg.ess_K = static_cast<int>(r.integer("ess_K", 3000));
    const auto st = r.integers("stages", {3250, 3250, 3500, 10000});
    if (st.size() != 4) throw ConfigError("run.stages must list four stage lengths");
    for (int i = 0; i < 4; ++i) cfg.stages[i] = st[i];
    r.finish();
  }
  if (cfg.burn_in < 0) throw ConfigError("run.burn_in must be non-negative");
  if (cfg.n_collect < 10) throw ConfigError("run.n_collect must be at least 10");
  if (cfg.acf_lags < 1) throw ConfigError("run.acf_lags must be at least 1");
  if (cfg.ess_K < 1) throw ConfigError("run.ess_K must be at least 1");

  if (const json* tuning = top.table("tuning")) {
    detail::TableReader r(*tuning, "tuning");
    cfg.tune = r.boolean("enabled", true);
    cfg.gradient_policy.target_rate = r.number("target_rate", 0.70);
    cfg.rw_policy.target_rate = r.number("rwm_target_rate", 0.30);
    const double band = r.number("band", 0.05);
    const double delta = r.number("delta", 0.2);
    const long window = r.integer("window", 250);
    for (TuningPolicy* p : {&cfg.gradient_policy, &cfg.rw_policy}) {
      p->band_halfwidth = band;
      p->delta = delta;
      p->window = static_cast<int>(window);
    }
    r.finish();
  }
  try {
    cfg.gradient_policy.validate();
    cfg.rw_policy.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("tuning: ") + e.what());
  }
  if (cfg.tune && !cfg.model.posterior() && cfg.burn_in < cfg.gradient_policy.window)
    throw ConfigError("run.burn_in must cover at least one tuning window");

  const json* samplers = top.table("sampler");
  if (!samplers || !samplers->is_array() || samplers->empty())
    throw ConfigError("at least one [[sampler]] table is required");
  std::set<std::string> labels;
  int idx = 0;
  for (const auto& s : *samplers) {
    detail::TableReader r(s, "sampler[" + std::to_string(idx++) + "]");
    SamplerEntry e;
    const Method method = method_from_string(r.string("name"));
    e.label = r.string("label", to_string(method));
    if (!labels.insert(e.label).second)
      throw ConfigError("duplicate sampler label '" + e.label + "'");
    e.setup = detail::read_method(r, "", method, kDefaultCarryover, 50);
    e.epsilon = r.number("epsilon", 0.1);
    if (method == Method::HamsGeneral) {
      e.setup.a1 = r.number("a1");
      e.setup.a2 = r.number("a2");
      e.setup.a3 = r.number("a3");
      e.setup.phi = r.number("phi", 0.0);
      GeneralNoiseFactor::of(HamsConfig::make_general(e.setup.a1, e.setup.a2, e.setup.a3, e.setup.phi));
    }
    if (!(e.epsilon > 0.0 && e.epsilon <= 1.0))
      throw ConfigError("sampler " + e.label + ": epsilon must lie in (0, 1]");
    if (cfg.model.posterior()) {
      const Method pm = method == Method::pCNL ? Method::pMALAstar : method;
      e.param_setup = detail::read_method(r, "param_", pm, kShortCarryover, 6);
      if (method == Method::HamsGeneral) {
        e.param_setup.a1 = e.setup.a1;
        e.param_setup.a2 = e.setup.a2;
        e.param_setup.a3 = e.setup.a3;
        e.param_setup.phi = e.setup.phi;
      }
      e.param_epsilon = r.number("param_epsilon", e.epsilon);
      if (!(e.param_epsilon > 0.0 && e.param_epsilon <= 1.0))
        throw ConfigError("sampler " + e.label + ": param_epsilon must lie in (0, 1]");
    }
    r.finish();
    cfg.samplers.push_back(std::move(e));
  }
  top.finish();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  json raw;
  try {
    raw = toml_lite::parse_file(path);
  } catch (const toml_lite::ParseError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(raw);
}

// Applies command-line overrides to the raw table before validation so they
// are reflected in the config hash.
inline ExperimentConfig with_overrides(json raw, std::optional<std::uint64_t> seed,
                                       std::optional<std::string> out,
                                       std::optional<int> threads) {
  if (seed) raw["seed"] = *seed;
  if (out) raw["output"] = *out;
  if (threads) raw["threads"] = *threads;
  return parse_config(raw);
}

// ---------------------------------------------------------------------------
// Problem construction

struct Problem {
  int dim = 0;
  std::optional<TargetModel> target;  // latent-only models
  std::optional<GibbsProblem> gibbs;  // posterior models
  std::shared_ptr<const Preconditioner> precond;
  std::shared_ptr<const GaussianScale> prior_cov;
  Vector theta_lo, theta_hi;  // dispersed starting box (natural scale)
  std::vector<std::string> column_names;
};

inline Vector load_or_simulate_y(const ModelSection& m, const std::function<Vector()>& simulate,
                                 Eigen::Index expected) {
  if (m.data_file.empty()) return simulate();
  SeriesFile f;
  try {
    f = read_series_file(m.data_file);
  } catch (const std::runtime_error& e) {
    throw std::ios_base::failure(e.what());
  }
  if (f.values.size() != expected)
    throw ConfigError("data file " + m.data_file + " has " + std::to_string(f.values.size()) +
                      " values, expected " + std::to_string(expected));
  return f.values;
}

inline Problem build_problem(const ExperimentConfig& cfg) {
  const ModelSection& m = cfg.model;
  Problem p;
  RngStream data_rng(m.data_seed, 0);
  auto names = [&](const std::string& stem, int k) {
    for (int i = 1; i <= k; ++i) p.column_names.push_back(stem + std::to_string(i));
  };
  if (m.name == "mvn") {
    MvnTarget t(ar1_correlation(m.dim, m.rho));
    p.dim = m.dim;
    p.target = t.target();
    p.prior_cov = std::make_shared<const GaussianScale>(t.covariance());
    names("x", p.dim);
  } else if (m.name == "sv_latent" || m.name == "sv_posterior") {
    const Vector y = load_or_simulate_y(
        m, [&] { return simulate_sv_data(m.T, m.beta, m.sigma, m.phi, data_rng).y; }, m.T);
    if (m.name == "sv_latent") {
      SvModel model(y, m.beta, m.sigma, m.phi);
      p.dim = m.T;
      p.target = model.latent_target();
      p.prior_cov = std::make_shared<const GaussianScale>(model.covariance_dense());
      names("x", p.dim);
    } else {
      p.dim = 3;
      p.gibbs = sv_gibbs_problem(y);
      p.theta_lo = Vector{{0.5, 0.1, 0.0}};
      p.theta_hi = Vector{{2.0, 1.0, 0.3}};
      p.column_names = {"beta", "sigma", "phi"};
    }
  } else {
    const double mu = m.mu.value_or(cox_default_mu(m.sigma2));
    const Vector y = load_or_simulate_y(
        m, [&] { return simulate_cox_data(m.m, m.sigma2, m.length_scale, mu, data_rng).y; },
        m.m * m.m);
    if (m.name == "cox_latent") {
      CoxModel model(m.m, y, m.sigma2, m.length_scale, mu);
      p.dim = model.n();
      p.target = model.latent_target();
      p.prior_cov = std::make_shared<const GaussianScale>(model.covariance());
      names("x", p.dim);
    } else {
      p.dim = 2;
      p.gibbs = cox_gibbs_problem(m.m, y, mu);
      p.theta_lo = Vector{{0.25, 0.05}};
      p.theta_hi = Vector{{4.0, 1.0}};
      p.column_names = {"sigma2", "beta"};
    }
  }
  if (cfg.precondition && p.target) {
    const auto& hint = p.target->expected_hessian_hint();
    if (!hint) throw ConfigError("model " + m.name + " has no preconditioning matrix");
    p.precond = std::make_shared<const Preconditioner>(Preconditioner::cholesky_factor(*hint));
  }
  return p;
}

// Posterior draws are reported on the natural parameter scale.
inline Vector natural_parameters(const std::string& model, const Vector& theta) {
  if (model == "sv_posterior")
    return Vector{{theta[0], std::exp(theta[2]), std::tanh(theta[1])}};
  return theta.array().exp();
}

inline Vector working_parameters(const std::string& model, const Vector& natural) {
  if (model == "sv_posterior")
    return Vector{{natural[0], std::atanh(natural[2]), std::log(natural[1])}};
  return natural.array().log();
}

// ---------------------------------------------------------------------------
// Running

struct TaskResult {
  std::string label;
  Method method = Method::HamsA;
  int repetition = 0;
  Matrix draws;
  std::vector<char> accepted;  // empty for posterior models
  std::vector<double> log_rho;
  long accepted_count = 0;
  double acceptance_rate = 0;
  double epsilon = 0;
  double param_epsilon = 0;
  std::vector<TuningTracePoint> trace, param_trace;
  double time_s = 0;
  EssReport ess;
  Matrix acf;  // acf_lags rows, one column per selected coordinate (NaN if degenerate)
  std::vector<int> acf_columns;
  std::array<long, 4> stage_ends{};
  bool tune_only = false;
};

inline std::uint64_t stream_id_for(const std::string& label, int repetition) {
  return fnv1a64(label + "#" + std::to_string(repetition));
}

namespace detail {

template <class F>
auto timed(F&& f, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void fill_diagnostics(const ExperimentConfig& cfg, TaskResult& r) {
  r.ess = summarize_chain(r.draws, r.time_s, cfg.ess_K);
  if (!cfg.record_timing) r.ess.min_ess_per_second = 0.0;
  const int lags = std::min<long>(cfg.acf_lags, r.draws.rows() - 2);
  for (int c : cfg.acf_coordinates)
    if (c >= 0 && c < r.draws.cols()) r.acf_columns.push_back(c);
  r.acf = Matrix::Constant(lags, static_cast<Eigen::Index>(r.acf_columns.size()),
                           std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < r.acf_columns.size(); ++j) {
    try {
      r.acf.col(static_cast<Eigen::Index>(j)) = acf(r.draws.col(r.acf_columns[j]), lags);
    } catch (const DegenerateSeries&) {
    }
  }
}

}  // namespace detail

inline TaskResult run_latent_task(const ExperimentConfig& cfg, const Problem& p,
                                  const SamplerEntry& s, int rep, bool tune_only) {
  TaskResult r;
  r.label = s.label;
  r.method = s.setup.method;
  r.repetition = rep;
  r.tune_only = tune_only;
  RngStream rng(cfg.seed, stream_id_for(s.label, rep));
  Chain chain(s.setup, *p.target, Vector::Zero(p.dim), standard_normal_vector(rng, p.dim),
              p.precond, s.setup.method == Method::pCNL ? p.prior_cov : nullptr);
  const TuningPolicy& policy = s.setup.random_walk() ? cfg.rw_policy : cfg.gradient_policy;
  long iteration = 0;
  auto guarded = [&](double eps) {
    try {
      return chain.step(eps, rng);
    } catch (const NumericalError& e) {
      throw NumericalError(s.label + " rep " + std::to_string(rep) + ": non-finite state at iteration " +
                           std::to_string(iteration) + " (" + e.what() + ")");
    } catch (const DomainError& e) {
      throw NumericalError(s.label + " rep " + std::to_string(rep) + ": numeric failure at iteration " +
                           std::to_string(iteration) + " (" + e.what() + ")");
    }
  };

  double eps = s.epsilon;
  if (cfg.tune && s.setup.tunable() && cfg.burn_in > 0) {
    const auto tr = tune_chain(
        [&](double e, RngStream&) {
          ++iteration;
          return guarded(e).accepted;
        },
        eps, policy, cfg.burn_in, rng);
    eps = tr.epsilon;
    r.trace = tr.trace;
  } else {
    for (long i = 0; i < cfg.burn_in; ++i, ++iteration) guarded(eps);
  }
  r.epsilon = eps;
  if (tune_only) return r;

  r.draws.resize(cfg.n_collect, p.dim);
  r.accepted.resize(cfg.n_collect);
  r.log_rho.resize(cfg.n_collect);
  detail::timed(
      [&] {
        for (long i = 0; i < cfg.n_collect; ++i, ++iteration) {
          const auto st = guarded(eps);
          r.accepted[i] = st.accepted;
          r.log_rho[i] = st.log_rho;
          r.accepted_count += st.accepted;
          r.draws.row(i) = chain.x().transpose();
        }
      },
      r.time_s);
  r.acceptance_rate = static_cast<double>(r.accepted_count) / static_cast<double>(cfg.n_collect);
  detail::fill_diagnostics(cfg, r);
  return r;
}

inline TaskResult run_posterior_task(const ExperimentConfig& cfg, const Problem& p,
                                     const SamplerEntry& s, int rep, bool tune_only) {
  TaskResult r;
  r.label = s.label;
  r.method = s.setup.method;
  r.repetition = rep;
  r.tune_only = tune_only;
  RngStream rng(cfg.seed, stream_id_for(s.label, rep));
  const GibbsProblem& g = *p.gibbs;
  Vector natural(p.dim);
  for (int i = 0; i < p.dim; ++i)
    natural[i] = p.theta_lo[i] + (p.theta_hi[i] - p.theta_lo[i]) * rng.uniform();
  const Vector theta0 = working_parameters(cfg.model.name, natural);

  GibbsSettings settings;
  settings.latent = s.setup;
  settings.param = s.param_setup;
  settings.latent_epsilon = s.epsilon;
  settings.param_epsilon = s.param_epsilon;
  settings.latent_policy = s.setup.random_walk() ? cfg.rw_policy : cfg.gradient_policy;
  settings.param_policy = s.param_setup.random_walk() ? cfg.rw_policy : cfg.gradient_policy;
  GibbsSchedule schedule;
  schedule.stage_lengths = cfg.stages;
  if (tune_only) schedule.stage_lengths[3] = 1;
  schedule.tune = cfg.tune;
  schedule.precondition = cfg.precondition;

  GibbsRecord rec;
  try {
    detail::timed([&] { rec = gibbs_run(g, settings, schedule, gibbs_initial_latent(g, theta0, rng), theta0, rng); },
                  r.time_s);
  } catch (const DomainError& e) {
    throw NumericalError(s.label + " rep " + std::to_string(rep) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(s.label + " rep " + std::to_string(rep) + ": " + e.what());
  }
  r.epsilon = rec.latent_epsilon;
  r.param_epsilon = rec.param_epsilon;
  r.trace = rec.latent_tuning;
  r.param_trace = rec.param_tuning;
  r.stage_ends = rec.stage_ends;
  if (tune_only) return r;
  r.draws.resize(rec.param_draws.rows(), p.dim);
  for (Eigen::Index i = 0; i < rec.param_draws.rows(); ++i)
    r.draws.row(i) = natural_parameters(cfg.model.name, rec.param_draws.row(i).transpose()).transpose();
  r.accepted_count = rec.latent_accepted;
  r.acceptance_rate = static_cast<double>(rec.latent_accepted) / static_cast<double>(rec.param_draws.rows());
  detail::fill_diagnostics(cfg, r);
  return r;
}

struct RunOptions {
  bool write_files = true;
  bool tune_only = false;
  std::optional<std::string> only_label;  // restrict to one sampler
  std::optional<int> repetitions;         // override config
};

struct ExperimentResult {
  std::vector<TaskResult> tasks;  // ordered by (sampler, repetition)
  std::string config_hash;
  std::vector<std::string> files;
};

namespace detail {

inline std::string num(double v, int digits = 17) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string header_line(const ExperimentConfig& cfg, const std::string& hash,
                               const std::string& kind, const TaskResult* t) {
  json h;
  h["config_hash"] = hash;
  h["seed"] = cfg.seed;
  h["version"] = kToolkitVersion;
  h["file"] = kind;
  if (t) {
    h["method"] = t->label;
    h["repetition"] = t->repetition;
    h["stream_id"] = hex64(stream_id_for(t->label, t->repetition));
  }
  return "# " + h.dump() + "\n";
}

class FileWriter {
 public:
  explicit FileWriter(const std::filesystem::path& path) : path_(path), out_(path) {
    if (!out_) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  }
  std::ofstream& stream() { return out_; }
  void close() {
    out_.close();
    if (!out_) throw std::ios_base::failure("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_outputs(const ExperimentConfig& cfg, const Problem& p, ExperimentResult& res) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory " + dir.string());
  auto open = [&](const std::string& name) {
    res.files.push_back((dir / name).string());
    return FileWriter(dir / name);
  };
  const bool posterior = cfg.model.posterior();

  for (const auto& t : res.tasks) {
    const std::string stem = t.label + "_rep" + std::to_string(t.repetition);
    {
      auto f = open("trace_" + stem + ".csv");
      auto& o = f.stream();
      o << header_line(cfg, res.config_hash, "tuning_trace", &t) << "block,iteration,epsilon,rate\n";
      for (const auto& pt : t.trace)
        o << "latent," << pt.iteration << ',' << num(pt.epsilon) << ',' << num(pt.rate) << '\n';
      for (const auto& pt : t.param_trace)
        o << "param," << pt.iteration << ',' << num(pt.epsilon) << ',' << num(pt.rate) << '\n';
      f.close();
    }
    if (t.tune_only) continue;
    {
      auto f = open("draws_" + stem + ".csv");
      auto& o = f.stream();
      o << header_line(cfg, res.config_hash, "draws", &t) << "iteration";
      if (!posterior) o << ",accepted,log_rho";
      for (const auto& n : p.column_names) o << ',' << n;
      o << '\n';
      for (Eigen::Index i = 0; i < t.draws.rows(); ++i) {
        o << i;
        if (!posterior) o << ',' << int(t.accepted[i]) << ',' << num(t.log_rho[i]);
        for (Eigen::Index j = 0; j < t.draws.cols(); ++j) o << ',' << num(t.draws(i, j));
        o << '\n';
      }
      f.close();
    }
    {
      auto f = open("acf_" + stem + ".csv");
      auto& o = f.stream();
      o << header_line(cfg, res.config_hash, "acf", &t) << "lag";
      for (int c : t.acf_columns) o << ',' << p.column_names[c];
      o << '\n';
      for (Eigen::Index k = 0; k < t.acf.rows(); ++k) {
        o << k + 1;
        for (Eigen::Index j = 0; j < t.acf.cols(); ++j) o << ',' << num(t.acf(k, j));
        o << '\n';
      }
      f.close();
    }
  }
  if (res.tasks.empty() || res.tasks.front().tune_only) return;

  // Per repetition, the fastest method keeps every draw; slower methods keep
  // a fraction 1 / thinning_factor of theirs.
  std::map<int, double> fastest;
  for (const auto& t : res.tasks) {
    auto it = fastest.find(t.repetition);
    if (it == fastest.end() || t.time_s < it->second) fastest[t.repetition] = t.time_s;
  }
  {
    auto f = open("summary.csv");
    auto& o = f.stream();
    o << header_line(cfg, res.config_hash, "summary", nullptr)
      << "method,repetition,time_s,ess_min,ess_median,ess_max,min_ess_per_time,acceptance_rate,"
         "epsilon,thinning_factor\n";
    for (const auto& t : res.tasks) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      const bool timing = cfg.record_timing;
      const double thin = timing && fastest[t.repetition] > 0 ? t.time_s / fastest[t.repetition] : nan;
      o << t.label << ',' << t.repetition << ',' << num(timing ? t.time_s : nan, 6) << ','
        << num(t.ess.min, 10) << ',' << num(t.ess.median, 10) << ',' << num(t.ess.max, 10) << ','
        << num(timing ? t.ess.min_ess_per_second : nan, 10) << ','
        << num(t.acceptance_rate, 10) << ',' << num(t.epsilon, 10) << ',' << num(thin, 6)
        << '\n';
    }
    f.close();
  }
  {
    auto f = open("table.csv");
    auto& o = f.stream();
    o << header_line(cfg, res.config_hash, "table", nullptr)
      << "method,repetitions,median_time_s,median_ess_min,median_ess_median,median_ess_max,"
         "median_min_ess_per_time,mean_acceptance_rate\n";
    for (const auto& s : cfg.samplers) {
      std::vector<double> time, mn, md, mx, per, acc;
      for (const auto& t : res.tasks)
        if (t.label == s.label) {
          time.push_back(t.time_s);
          mn.push_back(t.ess.min);
          md.push_back(t.ess.median);
          mx.push_back(t.ess.max);
          per.push_back(t.ess.min_ess_per_second);
          acc.push_back(t.acceptance_rate);
        }
      if (mn.empty()) continue;
      double mean_acc = 0;
      for (double a : acc) mean_acc += a / static_cast<double>(acc.size());
      const double nan = std::numeric_limits<double>::quiet_NaN();
      o << s.label << ',' << mn.size() << ','
        << num(cfg.record_timing ? median_of(time) : nan, 6) << ',' << num(median_of(mn), 10)
        << ',' << num(median_of(md), 10) << ',' << num(median_of(mx), 10) << ','
        << num(cfg.record_timing ? median_of(per) : nan, 10) << ',' << num(mean_acc, 10) << '\n';
    }
    f.close();
  }
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  const Problem problem = build_problem(cfg);
  std::vector<const SamplerEntry*> chosen;
  for (const auto& s : cfg.samplers)
    if (!opt.only_label || s.label == *opt.only_label) chosen.push_back(&s);
  if (chosen.empty()) throw ConfigError("no sampler labelled '" + opt.only_label.value_or("") + "'");
  const int reps = opt.repetitions.value_or(cfg.repetitions);

  struct Job {
    const SamplerEntry* s;
    int rep;
  };
  std::vector<Job> jobs;
  for (const auto* s : chosen)
    for (int r = 0; r < reps; ++r) jobs.push_back({s, r});

  ExperimentResult res;
  res.config_hash = cfg.config_hash();
  res.tasks.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard<std::mutex> lk(err_mu);
        if (first_error) return;
      }
      try {
        res.tasks[i] = problem.gibbs
                           ? run_posterior_task(cfg, problem, *jobs[i].s, jobs[i].rep, opt.tune_only)
                           : run_latent_task(cfg, problem, *jobs[i].s, jobs[i].rep, opt.tune_only);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(jobs.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  if (opt.write_files) detail::write_outputs(cfg, problem, res);
  return res;
}

// ---------------------------------------------------------------------------
// Reading draw files back

struct DrawFile {
  std::vector<std::string> columns;
  Matrix values;
};

inline DrawFile read_draw_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  std::string line;
  DrawFile d;
  std::vector<std::vector<double>> rows;
  std::size_t skip = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (d.columns.empty()) {
      if (cells.size() >= 3 && cells[0] == "iteration" && cells[1] == "accepted") skip = 3;
      d.columns.assign(cells.begin() + static_cast<long>(std::min(skip, cells.size())), cells.end());
      continue;
    }
    if (cells.size() != d.columns.size() + skip)
      throw std::ios_base::failure(path + ": ragged row");
    std::vector<double> row;
    for (std::size_t j = skip; j < cells.size(); ++j) row.push_back(std::stod(cells[j]));
    rows.push_back(std::move(row));
  }
  if (d.columns.empty()) throw std::ios_base::failure(path + ": no header row");
  d.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d.columns.size(); ++j)
      d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return d;
}

}  // namespace hams
