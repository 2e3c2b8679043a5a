#pragma once

#include "hams/core.hpp"
#include "hams/params.hpp"
#include "hams/samplers.hpp"

#include <memory>
#include <string>

namespace hams {

// M = L L^T with the solves needed to move between x and x~ = L^T x.
class Preconditioner {
 public:
  static Preconditioner cholesky_factor(const Matrix& M) {
    require(M.rows() == M.cols(), "cholesky_factor: M must be square");
    require(M.rows() > 0, "cholesky_factor: M must be non-empty");
    const double asym = (M - M.transpose()).norm();
    if (asym > 1e-10 * std::max(1.0, M.norm()))
      throw DomainError("cholesky_factor: M is not symmetric");
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success)
      throw DomainError("cholesky_factor: M is not positive definite (leading minor of order " +
                        std::to_string(failing_minor(M)) + " is not positive)");
    Preconditioner p;
    p.M_ = M;
    p.L_ = llt.matrixL();
    return p;
  }

  static Preconditioner identity(int k) { return cholesky_factor(Matrix::Identity(k, k)); }

  int dim() const { return static_cast<int>(L_.rows()); }
  const Matrix& M() const { return M_; }
  const Matrix& L() const { return L_; }

  // z with L z = v
  Vector solve_L(const Vector& v) const {
    require_dim(v.size(), dim(), "solve_L");
    return L_.triangularView<Eigen::Lower>().solve(v);
  }
  // z with L^T z = v
  Vector solve_Lt(const Vector& v) const {
    require_dim(v.size(), dim(), "solve_Lt");
    return L_.transpose().triangularView<Eigen::Upper>().solve(v);
  }
  Vector mul_Lt(const Vector& x) const {
    require_dim(x.size(), dim(), "mul_Lt");
    return L_.transpose().triangularView<Eigen::Upper>() * x;
  }

 private:
  // Unblocked Cholesky sweep used only to name the first non-positive pivot.
  static Eigen::Index failing_minor(const Matrix& M) {
    const Eigen::Index n = M.rows();
    Matrix L = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double d = M(j, j) - L.row(j).head(j).squaredNorm();
      if (!(d > 0.0)) return j + 1;
      L(j, j) = std::sqrt(d);
      for (Eigen::Index i = j + 1; i < n; ++i)
        L(i, j) = (M(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
    return n;
  }

  Matrix M_;
  Matrix L_;
};

// Transformed-space target U~(x~) = U(L^{-T} x~) with gradient L^{-1} grad U(x).
inline TargetModel precond_wrap(const TargetModel& target, std::shared_ptr<const Preconditioner> P) {
  require(P != nullptr, "precond_wrap: preconditioner is required");
  require_dim(P->dim(), target.dim(), "precond_wrap preconditioner");
  return TargetModel(target.dim(), [target, P](const Vector& xt, Vector& grad) {
    const Vector x = P->solve_Lt(xt);
    Vector g;
    const double U = target.potential_and_gradient(x, g);
    grad = P->solve_L(g);
    return U;
  });
}

inline TargetModel precond_wrap(const TargetModel& target, const Preconditioner& P) {
  return precond_wrap(target, std::make_shared<const Preconditioner>(P));
}

// Per-chain bookkeeping: x, x~ = L^T x, grad U~(x~) = L^{-1} grad U(x), U(x).
struct PrecondCache {
  Vector x;
  Vector x_tilde;
  Vector grad_tilde;
  double potential = 0.0;

  static PrecondCache init(const Vector& x, const TargetModel& target, const Preconditioner& P) {
    require_dim(x.size(), target.dim(), "PrecondCache position");
    require_dim(P.dim(), target.dim(), "PrecondCache preconditioner");
    PrecondCache c;
    c.x = x;
    c.x_tilde = P.mul_Lt(x);
    Vector g;
    c.potential = target.potential_and_gradient(x, g);
    c.grad_tilde = P.solve_L(g);
    return c;
  }
};

// One preconditioned HAMS-A/B step in the reduced form: two triangular solves
// and one inner product for the ratio. On rejection u flips and the cache is
// left untouched. StepOutcome::next.gradient holds grad U(x) in x coordinates
// when the step was accepted and is left empty otherwise.
inline StepOutcome hams_precond_step(const AugmentedState& state, const HamsConfig& cfg,
                                     const TargetModel& target, const Preconditioner& P,
                                     RngStream& rng, PrecondCache& cache) {
  cfg.validate();
  if (cfg.variant == Variant::General)
    throw ConfigError("hams_precond_step: only HAMS-A and HAMS-B are supported");
  require_dim(state.x.size(), target.dim(), "hams_precond_step position");
  require_dim(state.u.size(), target.dim(), "hams_precond_step momentum");
  require_dim(P.dim(), target.dim(), "hams_precond_step preconditioner");
  if (cache.x.size() != state.x.size() || cache.x != state.x)
    throw ContractViolation("hams_precond_step: cache does not belong to the current state");

  const AbCoefficients k(cfg);
  const bool uses_zeta = k.uses_zeta(cfg.variant);
  const Vector zeta = uses_zeta ? standard_normal_vector(rng, target.dim())
                                : Vector::Zero(target.dim());

  Vector xi = k.sab * state.u;
  if (k.noise > 0.0) xi += k.noise * zeta;
  const Vector xt_star = cache.x_tilde - k.a * cache.grad_tilde + xi;
  const Vector x_star = P.solve_Lt(xt_star);
  Vector g_star;
  const double U_star = target.potential_and_gradient(x_star, g_star);
  const Vector gt_star = P.solve_L(g_star);
  const Vector xi_t = gt_star + cache.grad_tilde;
  const double log_rho =
      cache.potential - U_star + k.inv2a * xi_t.dot(xi - 0.5 * k.a * xi_t);

  Vector u_star;
  if (cfg.variant == Variant::A) {
    u_star = (2.0 * k.b * k.inv2a - 1.0) * state.u - k.sab * k.inv2a * xi_t;
    if (k.sbn > 0.0) u_star += 2.0 * k.sbn * k.inv2a * zeta;
  } else {
    u_star = state.u - k.sab * k.inv2a * xi_t;
  }

  StepOutcome out;
  out.log_rho = log_rho;
  out.proposal.x = x_star;
  out.proposal.u = u_star;
  out.accepted = metropolis_accept(log_rho, rng);
  if (out.accepted) {
    cache.x = x_star;
    cache.x_tilde = xt_star;
    cache.grad_tilde = gt_star;
    cache.potential = U_star;
    out.next.x = x_star;
    out.next.u = std::move(u_star);
    out.next.potential = U_star;
    out.next.gradient = std::move(g_star);
  } else {
    out.next.x = state.x;
    out.next.u = -state.u;
    out.next.potential = cache.potential;
  }
  return out;
}

// The same transition computed the long way: map to x~, run the unreduced
// HAMS-A/B step on the transformed target with the full Hamiltonian and noise
// ratio, and map back.
inline StepOutcome hams_precond_step_reference(const AugmentedState& state,
                                               const HamsConfig& cfg, const TargetModel& target,
                                               std::shared_ptr<const Preconditioner> P,
                                               RngStream& rng) {
  const TargetModel wrapped = precond_wrap(target, P);
  const auto s = CachedState::at(wrapped, P->mul_Lt(state.x), state.u);
  StepOutcome out = hams_ab_step(s, cfg, wrapped, rng);
  out.next.x = P->solve_Lt(out.next.x);
  out.next.gradient = target.gradient(out.next.x);
  out.proposal.x = P->solve_Lt(out.proposal.x);
  return out;
}

}  // namespace hams
