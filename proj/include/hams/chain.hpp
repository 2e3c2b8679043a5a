#pragma once

#include "hams/core.hpp"
#include "hams/params.hpp"
#include "hams/precondition.hpp"
#include "hams/samplers.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace hams {

enum class Method { HamsA, HamsB, HamsGeneral, RWM, pMALA, pMALAstar, pCNL, HMC, UDL, GMC };

inline constexpr std::array<Method, 10> kAllMethods = {
    Method::HamsA, Method::HamsB, Method::HamsGeneral, Method::RWM, Method::pMALA,
    Method::pMALAstar, Method::pCNL, Method::HMC, Method::UDL, Method::GMC};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::HamsA: return "hams_a";
    case Method::HamsB: return "hams_b";
    case Method::HamsGeneral: return "hams_general";
    case Method::RWM: return "rwm";
    case Method::pMALA: return "pmala";
    case Method::pMALAstar: return "pmala_star";
    case Method::pCNL: return "pcnl";
    case Method::HMC: return "hmc";
    case Method::UDL: return "udl";
    case Method::GMC: return "gmc";
  }
  return "?";
}

inline Method method_from_string(std::string_view name) {
  for (Method m : kAllMethods)
    if (name == to_string(m)) return m;
  throw ConfigError("unknown sampler '" + std::string(name) + "'");
}

inline BaselineKind baseline_kind(Method m) {
  switch (m) {
    case Method::RWM: return BaselineKind::RWM;
    case Method::pMALA: return BaselineKind::pMALA;
    case Method::pMALAstar: return BaselineKind::pMALAstar;
    case Method::pCNL: return BaselineKind::pCNL;
    case Method::HMC: return BaselineKind::HMC;
    case Method::UDL: return BaselineKind::UDL;
    case Method::GMC: return BaselineKind::GMC;
    default: break;
  }
  throw ConfigError(std::string(to_string(m)) + " is not a baseline sampler");
}

// Carryovers used without preconditioning when the user gives none. Each
// matches the momentum decorrelation of an HMC run with 50 or 6 leapfrog
// steps: c^(h/2) = 0.001 for h = nleap.
inline constexpr double kDefaultCarryover = 0.76;
inline constexpr double kShortCarryover = 0.1;

struct MethodSetup {
  Method method = Method::HamsA;
  std::optional<double> c;  // carryover for HAMS-A/B, UDL, GMC
  // Carryover used when c is absent and the chain is not preconditioned.
  double fallback_c = kDefaultCarryover;
  int nleap = 1;  // HMC
  // General HAMS coefficients; the step size is ignored for this method.
  double a1 = 0.0, a2 = 0.0, a3 = 0.0, phi = 0.0;

  bool tunable() const { return method != Method::HamsGeneral; }
  bool random_walk() const { return method == Method::RWM; }
};

// HAMS-A/B coefficients for step size epsilon. A missing c takes the
// spectral-radius default when preconditioned and setup.fallback_c otherwise.
inline HamsConfig hams_config_for(const MethodSetup& setup, double epsilon, bool preconditioned) {
  const Variant v = setup.method == Method::HamsA ? Variant::A : Variant::B;
  if (setup.c) return from_step(v, epsilon, setup.c);
  if (preconditioned) return from_step(v, epsilon);
  return from_step(v, epsilon, setup.fallback_c);
}

// UDL/GMC carryover: the HAMS-A default b translated back through b = c(2 - a).
inline double leapfrog_carryover_for(const MethodSetup& setup, double epsilon, bool preconditioned) {
  if (setup.c) return *setup.c;
  if (!preconditioned) return setup.fallback_c;
  const double a = step_to_a(std::min(epsilon, 1.0));
  if (a <= 0.0) return 1.0;
  return default_b(a, Variant::A) / (2.0 - a);
}

inline BaselineConfig baseline_config_for(const MethodSetup& setup, double epsilon,
                                          bool preconditioned) {
  BaselineConfig cfg;
  cfg.kind = baseline_kind(setup.method);
  cfg.epsilon = epsilon;
  cfg.nleap = setup.nleap;
  if (setup.method == Method::UDL || setup.method == Method::GMC)
    cfg.c = leapfrog_carryover_for(setup, epsilon, preconditioned);
  return cfg;
}

struct ChainStep {
  bool accepted = false;
  double log_rho = 0.0;
};

// A single Markov chain over a fixed target. With a preconditioner, HAMS-A/B
// run the reduced transformed-space step and every other method runs on the
// transformed target; pCNL always uses the supplied prior covariance instead.
class Chain {
 public:
  Chain(MethodSetup setup, TargetModel target, Vector x0, Vector u0,
        std::shared_ptr<const Preconditioner> precond = nullptr,
        std::shared_ptr<const GaussianScale> prior_cov = nullptr)
      : setup_(std::move(setup)), target_(std::move(target)) {
    if (setup_.method == Method::pCNL && !prior_cov)
      throw ConfigError("pcnl needs the prior covariance of the target");
    if (setup_.method == Method::HamsGeneral)
      general_ = HamsConfig::make_general(setup_.a1, setup_.a2, setup_.a3, setup_.phi);
    prior_ = std::move(prior_cov);
    require_dim(x0.size(), target_.dim(), "Chain initial position");
    require_dim(u0.size(), target_.dim(), "Chain initial momentum");
    x_ = std::move(x0);
    u_ = std::move(u0);
    set_preconditioner(std::move(precond));
  }

  const MethodSetup& setup() const { return setup_; }
  const Vector& x() const { return x_; }
  // Momentum in the coordinates the sampler works in (transformed when preconditioned).
  const Vector& u() const { return u_; }
  bool preconditioned() const { return P_ != nullptr; }
  const TargetModel& target() const { return target_; }

  // Replaces the target (for instance after a Gibbs update of the other block)
  // and re-evaluates the cached potential and gradient at the current x.
  void retarget(TargetModel target, std::shared_ptr<const GaussianScale> prior_cov = nullptr) {
    require_dim(target.dim(), target_.dim(), "Chain::retarget");
    target_ = std::move(target);
    if (prior_cov) prior_ = std::move(prior_cov);
    rebuild();
  }

  void set_preconditioner(std::shared_ptr<const Preconditioner> P) {
    if (P) require_dim(P->dim(), target_.dim(), "Chain preconditioner");
    P_ = (setup_.method == Method::pCNL) ? nullptr : std::move(P);
    rebuild();
  }

  ChainStep step(double epsilon, RngStream& rng) {
    ChainStep r;
    const Method m = setup_.method;
    if ((m == Method::HamsA || m == Method::HamsB) && P_) {
      const auto cfg = hams_config_for(setup_, epsilon, true);
      AugmentedState s{x_, u_};
      auto out = hams_precond_step(s, cfg, target_, *P_, rng, pcache_);
      r = {out.accepted, out.log_rho};
      if (out.accepted) x_ = std::move(out.next.x);
      u_ = std::move(out.next.u);
    } else {
      StepOutcome out;
      switch (m) {
        case Method::HamsA:
        case Method::HamsB:
          out = hams_ab_step(state_, hams_config_for(setup_, epsilon, false), work_, rng);
          break;
        case Method::HamsGeneral:
          out = hams_general_step(state_, *general_, work_, rng);
          break;
        case Method::RWM:
        case Method::pMALA:
        case Method::pMALAstar:
        case Method::pCNL:
          out = grad_langevin_step(state_, baseline_config_for(setup_, epsilon, P_ != nullptr),
                                   work_, m == Method::pCNL ? prior_.get() : nullptr, rng);
          break;
        case Method::HMC:
          out = hmc_step(state_, baseline_config_for(setup_, epsilon, P_ != nullptr), work_, rng);
          break;
        case Method::UDL:
          out = udl_step(state_, baseline_config_for(setup_, epsilon, P_ != nullptr), work_, rng);
          break;
        case Method::GMC:
          out = gmc_step(state_, baseline_config_for(setup_, epsilon, P_ != nullptr), work_, rng);
          break;
      }
      r = {out.accepted, out.log_rho};
      const bool moved = out.accepted;
      state_ = std::move(out.next);
      u_ = state_.u;
      if (moved) x_ = P_ ? P_->solve_Lt(state_.x) : state_.x;
    }
    if (!x_.allFinite() || !u_.allFinite())
      throw NumericalError(std::string(to_string(m)) + ": chain state became non-finite");
    return r;
  }

 private:
  void rebuild() {
    const bool reduced =
        (setup_.method == Method::HamsA || setup_.method == Method::HamsB) && P_ != nullptr;
    if (reduced) {
      pcache_ = PrecondCache::init(x_, target_, *P_);
      return;
    }
    work_ = P_ ? precond_wrap(target_, P_) : target_;
    state_ = CachedState::at(work_, P_ ? P_->mul_Lt(x_) : x_, u_);
  }

  MethodSetup setup_;
  TargetModel target_;
  std::shared_ptr<const Preconditioner> P_;
  std::shared_ptr<const GaussianScale> prior_;
  std::optional<HamsConfig> general_;
  Vector x_, u_;
  // Untransformed-path state.
  TargetModel work_ = target_;
  CachedState state_;
  // Reduced preconditioned HAMS path.
  PrecondCache pcache_;
};

}  // namespace hams
