#pragma once

#include "hams/chain.hpp"
#include "hams/models.hpp"
#include "hams/tuning.hpp"

#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace hams {

// Two-block posterior: latent field x given parameters theta, and theta given x.
struct GibbsProblem {
  int latent_dim = 0;
  int param_dim = 0;
  std::function<TargetModel(const Vector& theta)> latent_target;
  std::function<TargetModel(const Vector& x)> param_target;
  std::function<Matrix(const Vector& theta)> latent_metric;
  std::function<Matrix(const Vector& theta)> param_metric;
  std::function<Matrix(const Vector& theta)> latent_prior_cov;  // pCNL and initial draws
};

// theta = (beta, alpha, gamma) with sigma = exp(gamma), phi = tanh(alpha).
inline GibbsProblem sv_gibbs_problem(const Vector& y) {
  GibbsProblem p;
  p.latent_dim = static_cast<int>(y.size());
  p.param_dim = 3;
  auto model = [y](const Vector& th) {
    return SvModel(y, th[0], std::exp(th[2]), std::tanh(th[1]));
  };
  p.latent_target = [model](const Vector& th) { return model(th).latent_target(); };
  p.param_target = [y](const Vector& x) { return SvParamConditional(x, y).target(); };
  p.latent_metric = [model](const Vector& th) { return model(th).latent_preconditioner(); };
  const int T = p.latent_dim;
  p.param_metric = [T](const Vector& th) { return SvParamConditional::expected_hessian(th, T); };
  p.latent_prior_cov = [model](const Vector& th) { return model(th).covariance_dense(); };
  return p;
}

// theta = (phi1, phi2) = (log sigma^2, log beta).
inline GibbsProblem cox_gibbs_problem(int m, const Vector& y, double mu) {
  GibbsProblem p;
  p.latent_dim = m * m;
  p.param_dim = 2;
  auto model = [m, y, mu](const Vector& th) {
    return CoxModel(m, y, std::exp(th[0]), std::exp(th[1]), mu);
  };
  p.latent_target = [model](const Vector& th) { return model(th).latent_target(); };
  p.param_target = [m](const Vector& x) { return CoxParamConditional(m, x).target(); };
  p.latent_metric = [model](const Vector& th) { return model(th).latent_preconditioner(); };
  p.param_metric = [m](const Vector& th) {
    return CoxParamConditional(m, Vector::Zero(m * m)).expected_hessian(th);
  };
  p.latent_prior_cov = [model](const Vector& th) { return model(th).covariance(); };
  return p;
}

// Four stages: two without preconditioning, then the metric is frozen at the
// stage-2 parameter mean, one tuning stage with it, and a collection stage.
struct GibbsSchedule {
  std::array<long, 4> stage_lengths{3250, 3250, 3500, 10000};
  bool tune = true;
  bool sample_params = true;
  bool precondition = true;

  long total() const { return stage_lengths[0] + stage_lengths[1] + stage_lengths[2] + stage_lengths[3]; }

  void validate(const TuningPolicy& policy) const {
    for (long n : stage_lengths)
      if (n < 1) throw ConfigError("gibbs schedule: every stage needs at least one iteration");
    if (tune)
      for (int s = 0; s < 3; ++s)
        if (stage_lengths[s] < policy.window)
          throw ConfigError("gibbs schedule: tuned stages must cover at least one window");
  }
};

struct GibbsSettings {
  MethodSetup latent;
  MethodSetup param;
  double latent_epsilon = 0.1;
  double param_epsilon = 0.1;
  TuningPolicy latent_policy;
  TuningPolicy param_policy;
};

struct GibbsRecord {
  Matrix latent_draws;  // collection stage, one row per iteration
  Matrix param_draws;   // collection stage
  Matrix param_trace;   // every iteration
  std::array<long, 4> stage_ends{};  // cumulative iteration counts
  long latent_accepted = 0;  // collection stage
  long param_accepted = 0;
  double latent_epsilon = 0, param_epsilon = 0;
  std::vector<TuningTracePoint> latent_tuning, param_tuning;
  int metric_evaluations = 0;
  Vector frozen_theta;
};

// A draw from the latent prior at theta. Starting the Cox field at zero makes
// the sigma^2 conditional unbounded until the first latent move is accepted.
inline Vector gibbs_initial_latent(const GibbsProblem& problem, const Vector& theta,
                                   RngStream& rng) {
  const Eigen::LLT<Matrix> llt(problem.latent_prior_cov(theta));
  if (llt.info() != Eigen::Success)
    throw DomainError("gibbs: latent prior covariance is not positive definite");
  return llt.matrixL() * standard_normal_vector(rng, problem.latent_dim);
}

inline GibbsRecord gibbs_run(const GibbsProblem& problem, const GibbsSettings& settings,
                             const GibbsSchedule& schedule, const Vector& x0,
                             const Vector& theta0, RngStream& rng) {
  schedule.validate(settings.latent_policy);
  if (schedule.sample_params) schedule.validate(settings.param_policy);
  require_dim(x0.size(), problem.latent_dim, "gibbs initial latent field");
  require_dim(theta0.size(), problem.param_dim, "gibbs initial parameters");

  auto prior_for = [&](const Vector& th) -> std::shared_ptr<const GaussianScale> {
    if (settings.latent.method != Method::pCNL) return nullptr;
    return std::make_shared<const GaussianScale>(problem.latent_prior_cov(th));
  };

  Vector theta = theta0;
  Chain latent(settings.latent, problem.latent_target(theta), x0,
               standard_normal_vector(rng, problem.latent_dim), nullptr, prior_for(theta));
  std::optional<Chain> param;
  if (schedule.sample_params)
    param.emplace(settings.param, problem.param_target(x0), theta0,
                  standard_normal_vector(rng, problem.param_dim));

  GibbsRecord rec;
  rec.stage_ends[0] = schedule.stage_lengths[0];
  for (int s = 1; s < 4; ++s) rec.stage_ends[s] = rec.stage_ends[s - 1] + schedule.stage_lengths[s];
  const long total = schedule.total();
  const long collect = schedule.stage_lengths[3];
  rec.latent_draws.resize(collect, problem.latent_dim);
  rec.param_draws.resize(collect, problem.param_dim);
  rec.param_trace.resize(total, problem.param_dim);

  double eps_l = settings.latent_epsilon, eps_p = settings.param_epsilon;
  long acc_l = 0, acc_p = 0;
  Vector theta_sum = Vector::Zero(problem.param_dim);

  for (long it = 0; it < total; ++it) {
    const int stage = it < rec.stage_ends[0] ? 0 : it < rec.stage_ends[1] ? 1
                      : it < rec.stage_ends[2] ? 2 : 3;

    if (it == rec.stage_ends[1] && schedule.precondition) {
      rec.frozen_theta = theta_sum / static_cast<double>(schedule.stage_lengths[1]);
      latent.set_preconditioner(std::make_shared<const Preconditioner>(
          Preconditioner::cholesky_factor(problem.latent_metric(rec.frozen_theta))));
      if (param)
        param->set_preconditioner(std::make_shared<const Preconditioner>(
            Preconditioner::cholesky_factor(problem.param_metric(rec.frozen_theta))));
      ++rec.metric_evaluations;
    }

    if (latent.step(eps_l, rng).accepted) ++acc_l;
    if (param) {
      param->retarget(problem.param_target(latent.x()));
      if (param->step(eps_p, rng).accepted) ++acc_p;
      theta = param->x();
      latent.retarget(problem.latent_target(theta), prior_for(theta));
    }
    if (!theta.allFinite())
      throw NumericalError("gibbs: parameters became non-finite at iteration " + std::to_string(it));

    rec.param_trace.row(it) = theta.transpose();
    if (stage == 1) theta_sum += theta;
    if (stage == 3) {
      const long row = it - rec.stage_ends[2];
      rec.latent_draws.row(row) = latent.x().transpose();
      rec.param_draws.row(row) = theta.transpose();
    }

    const bool tuning = schedule.tune && stage < 3;
    const long in_stage = it + 1 - (stage == 0 ? 0 : rec.stage_ends[stage - 1]);
    if (tuning && in_stage % settings.latent_policy.window == 0 && settings.latent.tunable()) {
      const double rate = static_cast<double>(acc_l) / settings.latent_policy.window;
      rec.latent_tuning.push_back({it + 1, eps_l, rate});
      eps_l = adapt_step_size(eps_l, rate, settings.latent_policy);
      acc_l = 0;
    }
    if (param && tuning && in_stage % settings.param_policy.window == 0 &&
        settings.param.tunable()) {
      const double rate = static_cast<double>(acc_p) / settings.param_policy.window;
      rec.param_tuning.push_back({it + 1, eps_p, rate});
      eps_p = adapt_step_size(eps_p, rate, settings.param_policy);
      acc_p = 0;
    }
    if (stage < 3 && it + 1 == rec.stage_ends[stage]) {
      acc_l = 0;
      acc_p = 0;
    }
  }
  rec.latent_accepted = acc_l;
  rec.param_accepted = acc_p;
  rec.latent_epsilon = eps_l;
  rec.param_epsilon = eps_p;
  return rec;
}

}  // namespace hams
