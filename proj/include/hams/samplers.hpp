#pragma once

#include "hams/core.hpp"
#include "hams/params.hpp"

#include <cmath>
#include <string>

namespace hams {

struct StepOutcome {
  CachedState next;
  bool accepted = false;
  double log_rho = 0.0;  // unclamped
  AugmentedState proposal;
};

enum class BaselineKind { RWM, pMALA, pMALAstar, pCNL, HMC, UDL, GMC };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::RWM: return "rwm";
    case BaselineKind::pMALA: return "pmala";
    case BaselineKind::pMALAstar: return "pmala_star";
    case BaselineKind::pCNL: return "pcnl";
    case BaselineKind::HMC: return "hmc";
    case BaselineKind::UDL: return "udl";
    case BaselineKind::GMC: return "gmc";
  }
  return "?";
}

struct BaselineConfig {
  BaselineKind kind = BaselineKind::RWM;
  double epsilon = 0.1;
  double c = 0.0;
  int nleap = 1;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw ConfigError(std::string(to_string(kind)) + ": epsilon must be positive");
    if ((kind == BaselineKind::pMALAstar || kind == BaselineKind::pCNL) && epsilon > 1.0)
      throw ConfigError(std::string(to_string(kind)) + ": epsilon must not exceed 1");
    if ((kind == BaselineKind::UDL || kind == BaselineKind::GMC) && !(c >= 0.0 && c <= 1.0))
      throw ConfigError(std::string(to_string(kind)) + ": carryover c must lie in [0, 1]");
    if (kind == BaselineKind::HMC && nleap < 1)
      throw ConfigError("hmc: nleap must be at least 1");
  }
};

namespace detail {

inline StepOutcome finish(const CachedState& current, CachedState proposal, double log_rho,
                          RngStream& rng, Vector rejected_momentum) {
  StepOutcome out;
  out.log_rho = log_rho;
  out.proposal.x = proposal.x;
  out.proposal.u = proposal.u;
  out.accepted = metropolis_accept(log_rho, rng);
  if (out.accepted) {
    out.next = std::move(proposal);
  } else {
    out.next = current;
    out.next.u = std::move(rejected_momentum);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// General HAMS

// Per-coordinate-pair factor of S = 2A - A^2 and its inverse.
struct GeneralNoiseFactor {
  double l11 = 0, l21 = 0, l22 = 0;
  double i11 = 0, i12 = 0, i22 = 0;

  static GeneralNoiseFactor of(const HamsConfig& cfg) {
    if (cfg.variant != Variant::General)
      throw ConfigError("general noise factor requested for a non-general configuration");
    cfg.validate();
    const double a1 = cfg.a1, a2 = cfg.a2, a3 = cfg.a3;
    const double s11 = 2 * a1 - a1 * a1 - a2 * a2;
    const double s12 = 2 * a2 - a2 * (a1 + a3);
    const double s22 = 2 * a3 - a3 * a3 - a2 * a2;
    const double det = s11 * s22 - s12 * s12;
    constexpr double tiny = 1e-14;
    if (!(s11 > tiny) || !(det > tiny * std::max(1.0, s11 * s22)))
      throw ConfigError(
          "general HAMS needs a nonsingular 2A - A^2; use HAMS-A or HAMS-B for singular "
          "coefficient choices");
    GeneralNoiseFactor f;
    f.l11 = std::sqrt(s11);
    f.l21 = s12 / f.l11;
    f.l22 = std::sqrt(s22 - f.l21 * f.l21);
    f.i11 = s22 / det;
    f.i12 = -s12 / det;
    f.i22 = s11 / det;
    return f;
  }

  double quad(const Vector& z1, const Vector& z2) const {
    return i11 * z1.squaredNorm() + 2.0 * i12 * z1.dot(z2) + i22 * z2.squaredNorm();
  }
};

struct GeneralNoise {
  Vector z1, z2;
};

inline GeneralNoise draw_general_noise(const GeneralNoiseFactor& f, Eigen::Index k,
                                       RngStream& rng) {
  const Vector e1 = standard_normal_vector(rng, k);
  const Vector e2 = standard_normal_vector(rng, k);
  return {f.l11 * e1, f.l21 * e1 + f.l22 * e2};
}

struct GeneralProposal {
  CachedState star;
  Vector z1_star, z2_star;
  double log_rho = 0.0;
};

inline GeneralProposal hams_general_propose(const CachedState& s, const HamsConfig& cfg,
                                            const TargetModel& target, const Vector& z1,
                                            const Vector& z2,
                                            const GeneralNoiseFactor& f) {
  require_dim(s.x.size(), target.dim(), "hams_general position");
  require_dim(s.u.size(), target.dim(), "hams_general momentum");
  require_dim(z1.size(), target.dim(), "hams_general noise Z1");
  require_dim(z2.size(), target.dim(), "hams_general noise Z2");
  const double a1 = cfg.a1, a2 = cfg.a2, a3 = cfg.a3;
  const Vector zt1 = z1 - a1 * s.gradient + a2 * s.u;
  const Vector zt2 = z2 - a2 * s.gradient + a3 * s.u;

  GeneralProposal p;
  p.star.x = s.x + zt1;
  p.star.potential = target.potential_and_gradient(p.star.x, p.star.gradient);
  p.star.u = -s.u + zt2 + cfg.phi * (zt1 + s.gradient - p.star.gradient);
  p.z1_star = zt1 - a1 * p.star.gradient - a2 * p.star.u;
  p.z2_star = zt2 - a2 * p.star.gradient - a3 * p.star.u;

  const double h0 = s.potential + 0.5 * s.u.squaredNorm();
  const double h1 = p.star.potential + 0.5 * p.star.u.squaredNorm();
  p.log_rho = h0 - h1 + 0.5 * f.quad(z1, z2) - 0.5 * f.quad(p.z1_star, p.z2_star);
  return p;
}

inline StepOutcome hams_general_step(const CachedState& s, const HamsConfig& cfg,
                                     const TargetModel& target, RngStream& rng) {
  const auto f = GeneralNoiseFactor::of(cfg);
  const auto noise = draw_general_noise(f, target.dim(), rng);
  auto p = hams_general_propose(s, cfg, target, noise.z1, noise.z2, f);
  return detail::finish(s, std::move(p.star), p.log_rho, rng, -s.u);
}

// ---------------------------------------------------------------------------
// HAMS-A / HAMS-B

struct AbCoefficients {
  double a, b;
  double sab;    // sqrt(ab)
  double noise;  // sqrt(a(2-a-b)); exactly 0 on the a+b=2 boundary
  double sbn;    // sqrt(b(2-a-b))
  double inv2a;  // 1/(2-a)

  explicit AbCoefficients(const HamsConfig& cfg) : a(cfg.a), b(cfg.b) {
    const double rest = std::max(0.0, 2.0 - a - b);
    sab = std::sqrt(a * b);
    noise = rest > 0.0 ? std::sqrt(a * rest) : 0.0;
    sbn = rest > 0.0 ? std::sqrt(b * rest) : 0.0;
    inv2a = 1.0 / (2.0 - a);
  }

  // The a = 0 boundary of HAMS-A still rotates the momentum with zeta.
  bool uses_zeta(Variant v) const { return noise > 0.0 || (v == Variant::A && sbn > 0.0); }
};

struct AbProposal {
  CachedState star;
  Vector zeta_star;
  double log_rho = 0.0;
};

// Deterministic part of one HAMS-A/B step given zeta. When the noise
// coefficient vanishes the zeta terms are skipped entirely.
inline AbProposal hams_ab_propose(const CachedState& s, const HamsConfig& cfg,
                                  const TargetModel& target, const Vector& zeta) {
  require_dim(s.x.size(), target.dim(), "hams_ab position");
  require_dim(s.u.size(), target.dim(), "hams_ab momentum");
  require_dim(zeta.size(), target.dim(), "hams_ab noise");
  const AbCoefficients k(cfg);
  const bool noisy = k.noise > 0.0;

  AbProposal p;
  if (cfg.a == 0.0) {
    // x stays put; the momentum/noise pair is rotated and rho is exactly one.
    p.star = s;
    if (cfg.variant == Variant::A) {
      p.star.u = (cfg.b - 1.0) * s.u;
      p.zeta_star = (1.0 - cfg.b) * zeta;
      if (k.sbn > 0.0) {
        p.star.u += k.sbn * zeta;
        p.zeta_star += k.sbn * s.u;
      }
    } else {
      p.zeta_star = zeta;
    }
    p.log_rho = 0.0;
    return p;
  }

  p.star.x = s.x - k.a * s.gradient + k.sab * s.u;
  if (noisy) p.star.x += k.noise * zeta;
  p.star.potential = target.potential_and_gradient(p.star.x, p.star.gradient);
  const Vector gsum = s.gradient + p.star.gradient;

  if (cfg.variant == Variant::A) {
    const double r = 2.0 * k.b * k.inv2a;
    p.star.u = (r - 1.0) * s.u - k.sab * k.inv2a * gsum;
    if (noisy) {
      p.star.u += 2.0 * k.sbn * k.inv2a * zeta;
      p.zeta_star = (1.0 - r) * zeta - k.noise * k.inv2a * gsum + 2.0 * k.sbn * k.inv2a * s.u;
    } else {
      p.zeta_star = Vector::Zero(zeta.size());
    }
  } else {
    p.star.u = s.u - k.sab * k.inv2a * gsum;
    p.zeta_star = noisy ? Vector(zeta - k.noise * k.inv2a * gsum) : Vector::Zero(zeta.size());
  }

  const double h0 = s.potential + 0.5 * s.u.squaredNorm();
  const double h1 = p.star.potential + 0.5 * p.star.u.squaredNorm();
  p.log_rho = h0 - h1;
  if (noisy) p.log_rho += 0.5 * zeta.squaredNorm() - 0.5 * p.zeta_star.squaredNorm();
  return p;
}

inline StepOutcome hams_ab_step(const CachedState& s, const HamsConfig& cfg,
                                const TargetModel& target, RngStream& rng) {
  cfg.validate();
  if (cfg.variant == Variant::General)
    throw ConfigError("hams_ab_step: use hams_general_step for the general variant");
  const AbCoefficients k(cfg);
  const Vector zeta = k.uses_zeta(cfg.variant) ? standard_normal_vector(rng, target.dim())
                                                : Vector::Zero(target.dim());
  auto p = hams_ab_propose(s, cfg, target, zeta);
  return detail::finish(s, std::move(p.star), p.log_rho, rng, -s.u);
}

inline StepOutcome hams_a_step(const CachedState& s, const HamsConfig& cfg,
                               const TargetModel& target, RngStream& rng) {
  if (cfg.variant != Variant::A) throw ConfigError("hams_a_step: configuration is not HAMS-A");
  return hams_ab_step(s, cfg, target, rng);
}

inline StepOutcome hams_b_step(const CachedState& s, const HamsConfig& cfg,
                               const TargetModel& target, RngStream& rng) {
  if (cfg.variant != Variant::B) throw ConfigError("hams_b_step: configuration is not HAMS-B");
  return hams_ab_step(s, cfg, target, rng);
}

// ---------------------------------------------------------------------------
// Position-only baselines

// Gaussian covariance Sigma with its lower Cholesky factor.
class GaussianScale {
 public:
  explicit GaussianScale(Matrix sigma) : sigma_(std::move(sigma)) {
    require(sigma_.rows() == sigma_.cols(), "GaussianScale: covariance must be square");
    Eigen::LLT<Matrix> llt(sigma_);
    if (llt.info() != Eigen::Success)
      throw ConfigError("GaussianScale: covariance is not positive definite");
    factor_ = llt.matrixL();
  }

  Eigen::Index dim() const { return sigma_.rows(); }
  const Matrix& sigma() const { return sigma_; }
  const Matrix& factor() const { return factor_; }

  // |L^{-1} d|^2
  double mahalanobis2(const Vector& d) const {
    return factor_.triangularView<Eigen::Lower>().solve(d).squaredNorm();
  }

 private:
  Matrix sigma_;
  Matrix factor_;
};

inline double langevin_drift(const BaselineConfig& cfg) {
  const double e2 = cfg.epsilon * cfg.epsilon;
  switch (cfg.kind) {
    case BaselineKind::RWM: return 0.0;
    case BaselineKind::pMALA: return 0.5 * e2;
    case BaselineKind::pMALAstar:
    case BaselineKind::pCNL: return e2 / (1.0 + std::sqrt(1.0 - e2));
    default: break;
  }
  throw ConfigError("grad_langevin_step: kind must be RWM, pMALA, pMALAstar or pCNL");
}

// Proposal x* = x0 - kappa Sigma grad U(x0) + eps L z, Metropolis-Hastings
// acceptance with the Gaussian proposal density. Momentum is carried unchanged.
inline double grad_langevin_propose(const CachedState& s, const BaselineConfig& cfg,
                                    const TargetModel& target, const GaussianScale* sigma,
                                    const Vector& z, CachedState& star) {
  cfg.validate();
  if (cfg.kind == BaselineKind::pCNL && sigma == nullptr)
    throw ConfigError("pcnl: the prior covariance C must be supplied");
  require_dim(s.x.size(), target.dim(), "grad_langevin position");
  require_dim(z.size(), target.dim(), "grad_langevin noise");
  if (sigma) require_dim(sigma->dim(), target.dim(), "grad_langevin covariance");
  const double kappa = langevin_drift(cfg);
  const double eps = cfg.epsilon;

  auto mean_from = [&](const Vector& x, const Vector& g) -> Vector {
    if (kappa == 0.0) return x;
    return sigma ? Vector(x - kappa * (sigma->sigma() * g)) : Vector(x - kappa * g);
  };

  star.x = mean_from(s.x, s.gradient) + eps * (sigma ? Vector(sigma->factor() * z) : z);
  star.u = s.u;
  star.potential = target.potential_and_gradient(star.x, star.gradient);

  double log_rho = s.potential - star.potential;
  if (kappa != 0.0) {
    auto m2 = [&](const Vector& d) { return sigma ? sigma->mahalanobis2(d) : d.squaredNorm(); };
    const double fwd = m2(star.x - mean_from(s.x, s.gradient));
    const double bwd = m2(s.x - mean_from(star.x, star.gradient));
    log_rho += (fwd - bwd) / (2.0 * eps * eps);
  }
  return log_rho;
}

inline StepOutcome grad_langevin_step(const CachedState& s, const BaselineConfig& cfg,
                                      const TargetModel& target, const GaussianScale* sigma,
                                      RngStream& rng) {
  const Vector z = standard_normal_vector(rng, target.dim());
  CachedState star;
  const double log_rho = grad_langevin_propose(s, cfg, target, sigma, z, star);
  return detail::finish(s, std::move(star), log_rho, rng, s.u);
}

// ---------------------------------------------------------------------------
// Leapfrog-based baselines

// nsteps leapfrog updates reusing the cached gradient; the returned state
// carries U and grad U at the final position.
inline CachedState leapfrog_cached(CachedState s, double epsilon, int nsteps,
                                   const TargetModel& target) {
  require(nsteps >= 1, "leapfrog: nsteps must be at least 1");
  const double half = 0.5 * epsilon;
  for (int i = 0; i < nsteps; ++i) {
    s.u -= half * s.gradient;
    s.x += epsilon * s.u;
    if (i + 1 < nsteps)
      s.gradient = target.gradient(s.x);
    else
      s.potential = target.potential_and_gradient(s.x, s.gradient);
    s.u -= half * s.gradient;
  }
  return s;
}

inline AugmentedState leapfrog(const AugmentedState& state, double epsilon, int nsteps,
                               const TargetModel& target) {
  require_dim(state.x.size(), target.dim(), "leapfrog position");
  require_dim(state.u.size(), target.dim(), "leapfrog momentum");
  auto s = CachedState::at(target, state.x, state.u);
  s = leapfrog_cached(std::move(s), epsilon, nsteps, target);
  return {std::move(s.x), std::move(s.u)};
}

inline StepOutcome hmc_step(const CachedState& s, const BaselineConfig& cfg,
                            const TargetModel& target, RngStream& rng) {
  cfg.validate();
  require_dim(s.x.size(), target.dim(), "hmc position");
  CachedState start = s;
  start.u = standard_normal_vector(rng, target.dim());
  const double h0 = start.potential + 0.5 * start.u.squaredNorm();
  CachedState star = leapfrog_cached(start, cfg.epsilon, cfg.nleap, target);
  const double h1 = star.potential + 0.5 * star.u.squaredNorm();
  return detail::finish(s, std::move(star), h0 - h1, rng, -start.u);
}

struct UdlProposal {
  Vector u_plus;
  CachedState after_leapfrog;  // (x*, u^-)
  Vector u_star;
  double log_rho = 0.0;
};

inline UdlProposal udl_propose(const CachedState& s, double epsilon, double c,
                               const TargetModel& target, const Vector& z1, const Vector* z2) {
  require_dim(s.x.size(), target.dim(), "udl position");
  require_dim(s.u.size(), target.dim(), "udl momentum");
  const double keep = std::sqrt(c);
  const double fresh = std::sqrt(1.0 - c);
  UdlProposal p;
  p.u_plus = keep * s.u;
  if (fresh > 0.0) p.u_plus += fresh * z1;
  CachedState start = s;
  start.u = p.u_plus;
  const double h0 = start.potential + 0.5 * start.u.squaredNorm();
  p.after_leapfrog = leapfrog_cached(std::move(start), epsilon, 1, target);
  const double h1 = p.after_leapfrog.potential + 0.5 * p.after_leapfrog.u.squaredNorm();
  p.log_rho = h0 - h1;
  p.u_star = keep * p.after_leapfrog.u;
  if (fresh > 0.0 && z2) p.u_star += fresh * *z2;
  return p;
}

inline StepOutcome udl_step(const CachedState& s, const BaselineConfig& cfg,
                            const TargetModel& target, RngStream& rng) {
  cfg.validate();
  const bool noisy = cfg.c < 1.0;
  const Vector z1 = noisy ? standard_normal_vector(rng, target.dim()) : Vector();
  const Vector z2 = noisy ? standard_normal_vector(rng, target.dim()) : Vector();
  auto p = udl_propose(s, cfg.epsilon, cfg.c, target, z1, &z2);
  CachedState star = std::move(p.after_leapfrog);
  star.u = std::move(p.u_star);
  return detail::finish(s, std::move(star), p.log_rho, rng, -s.u);
}

inline StepOutcome gmc_step(const CachedState& s, const BaselineConfig& cfg,
                            const TargetModel& target, RngStream& rng) {
  cfg.validate();
  const Vector z1 = cfg.c < 1.0 ? standard_normal_vector(rng, target.dim()) : Vector();
  auto p = udl_propose(s, cfg.epsilon, cfg.c, target, z1, nullptr);
  return detail::finish(s, std::move(p.after_leapfrog), p.log_rho, rng, -p.u_plus);
}

}  // namespace hams
