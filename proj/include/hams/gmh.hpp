#pragma once

#include "hams/core.hpp"
#include "hams/params.hpp"
#include "hams/samplers.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace hams {

// J together with its inverse. Linear maps also keep their matrix.
struct InvarianceMap {
  std::function<Vector(const Vector&)> apply;
  std::function<Vector(const Vector&)> apply_inverse;
  bool is_orthogonal_like = false;
  std::optional<Matrix> matrix;

  static InvarianceMap from_orthogonal(const Matrix& J, double tol = 1e-10) {
    require(J.rows() == J.cols(), "InvarianceMap: J must be square");
    const double err = (J.transpose() * J - Matrix::Identity(J.rows(), J.cols())).norm();
    if (err > tol)
      throw ConfigError("InvarianceMap: J is not orthogonal (|J^T J - I| = " +
                        std::to_string(err) + ")");
    InvarianceMap m;
    m.apply = [J](const Vector& y) -> Vector { return J * y; };
    m.apply_inverse = [J](const Vector& y) -> Vector { return J.transpose() * y; };
    m.is_orthogonal_like = true;
    m.matrix = J;
    return m;
  }

  static InvarianceMap identity(int k) { return from_orthogonal(Matrix::Identity(k, k)); }

  // (x, u) -> (x, -u) on a stacked vector of length 2k.
  static InvarianceMap momentum_flip(int k) {
    Vector d = Vector::Ones(2 * k);
    d.tail(k).setConstant(-1.0);
    return from_orthogonal(Matrix(d.asDiagonal()));
  }

  // (x, s) -> (x, -s) on a stacked vector whose last entry is the direction.
  static InvarianceMap lifting_flip() {
    InvarianceMap m;
    m.apply = [](const Vector& y) -> Vector {
      Vector r = y;
      r[r.size() - 1] = -r[r.size() - 1];
      return r;
    };
    m.apply_inverse = m.apply;
    m.is_orthogonal_like = true;
    return m;
  }
};

// Sampler y* ~ Q(. | y) paired with its log density log Q(to | from).
struct ProposalKernel {
  std::function<Vector(const Vector& from, RngStream&)> sample;
  std::function<double(const Vector& to, const Vector& from)> log_density;

  void check() const {
    if (!sample || !log_density)
      throw ConfigError("ProposalKernel: both a sampler and a density evaluator are required");
  }
};

struct PointOutcome {
  Vector next;
  bool accepted = false;
  double log_rho = 0.0;
  Vector proposal;
};

inline PointOutcome gmh_step(const Vector& y, const ProposalKernel& Q, const InvarianceMap& J,
                             const TargetModel& target, RngStream& rng) {
  require_dim(y.size(), target.dim(), "gmh_step state");
  Vector y_star = Q.sample(y, rng);
  const double fwd = Q.log_density(y_star, y);
  if (!(fwd > -std::numeric_limits<double>::infinity()))
    throw ContractViolation("gmh_step: proposal kernel has zero density at its own draw");
  const Vector y_back = J.apply_inverse(y_star);
  const Vector Jy = J.apply(y);
  const double bwd = Q.log_density(Jy, y_back);
  PointOutcome out;
  out.log_rho = target.potential(y) - target.potential(y_back) + bwd - fwd;
  out.accepted = metropolis_accept(out.log_rho, rng);
  out.next = out.accepted ? y_star : Jy;
  out.proposal = std::move(y_star);
  return out;
}

// Checks U(J^{-1} y) = U(y) at a handful of random points.
inline void check_invariance(const TargetModel& target, const InvarianceMap& J,
                             std::uint64_t seed = 0x5eed, int trials = 8, double tol = 1e-10) {
  if (!J.apply || !J.apply_inverse) throw ConfigError("InvarianceMap: apply and inverse required");
  RngStream rng(seed, 0);
  for (int t = 0; t < trials; ++t) {
    const Vector y = standard_normal_vector(rng, target.dim());
    const Vector back = J.apply_inverse(J.apply(y));
    if ((back - y).norm() > 1e-12 * std::max(1.0, y.norm()))
      throw ConfigError("InvarianceMap: apply_inverse does not invert apply");
    const double u0 = target.potential(y);
    const double u1 = target.potential(J.apply_inverse(y));
    if (std::abs(u0 - u1) > tol * std::max(1.0, std::abs(u0)))
      throw ConfigError("InvarianceMap: target potential is not invariant under J");
  }
}

// GMH sampler whose (target, J) pair was checked when it was built.
class Gmh {
 public:
  Gmh(TargetModel target, ProposalKernel Q, InvarianceMap J)
      : target_(std::move(target)), Q_(std::move(Q)), J_(std::move(J)) {
    Q_.check();
    check_invariance(target_, J_);
  }

  PointOutcome step(const Vector& y, RngStream& rng) const {
    return gmh_step(y, Q_, J_, target_, rng);
  }

  const TargetModel& target() const { return target_; }

 private:
  TargetModel target_;
  ProposalKernel Q_;
  InvarianceMap J_;
};

// ---------------------------------------------------------------------------
// G2MS

class G2msConfig {
 public:
  G2msConfig(Matrix A, InvarianceMap J) : A_(std::move(A)), J_(std::move(J)) {
    require(A_.rows() == A_.cols(), "G2MS: A must be square");
    if (!J_.matrix) throw ConfigError("G2MS: J must be a linear orthogonal map");
    const Matrix& Jm = *J_.matrix;
    require(Jm.rows() == A_.rows(), "G2MS: A and J dimensions differ");
    const Eigen::Index d = A_.rows();
    const Matrix I = Matrix::Identity(d, d);
    if ((A_ - A_.transpose()).norm() > 1e-12 * std::max(1.0, A_.norm()))
      throw ConfigError("G2MS: A must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A_);
    if (eig.eigenvalues().minCoeff() < -1e-12 || eig.eigenvalues().maxCoeff() > 2.0 + 1e-12)
      throw ConfigError("G2MS: A must satisfy 0 <= A <= 2I");
    B_ = I - (I - A_) * Jm;
    S_ = 2.0 * A_ - A_ * A_;
    const Matrix check = B_ + B_.transpose() - B_ * B_.transpose();
    if ((check - S_).norm() > 1e-10 * std::max(1.0, S_.norm()))
      throw ConfigError("G2MS: B + B^T - B B^T differs from 2A - A^2");
    Eigen::LLT<Matrix> llt(S_);
    const double floor = 1e-12 * std::max(1.0, S_.norm());
    if (llt.info() != Eigen::Success ||
        llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= std::sqrt(floor))
      throw ConfigError("G2MS: 2A - A^2 is singular; only nonsingular A is supported");
    S_factor_ = llt.matrixL();
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& S() const { return S_; }
  const Matrix& S_factor() const { return S_factor_; }
  const InvarianceMap& J() const { return J_; }

  double quad(const Vector& z) const {
    return S_factor_.triangularView<Eigen::Lower>().solve(z).squaredNorm();
  }

 private:
  Matrix A_;
  InvarianceMap J_;
  Matrix B_;
  Matrix S_;
  Matrix S_factor_;
};

struct G2msProposal {
  Vector y_star;
  Vector z_star;
  double log_rho = 0.0;
};

inline G2msProposal g2ms_propose(const Vector& y, const G2msConfig& cfg, const TargetModel& target,
                                 const Vector& z) {
  require_dim(y.size(), target.dim(), "g2ms state");
  require_dim(z.size(), target.dim(), "g2ms noise");
  G2msProposal p;
  Vector g0;
  const double U0 = target.potential_and_gradient(y, g0);
  p.y_star = y - cfg.B() * g0 + z;
  const Vector back = cfg.J().apply_inverse(p.y_star);
  const Vector g_back = target.gradient(back);
  p.z_star = cfg.J().apply(y) - back + cfg.B() * g_back;
  p.log_rho = U0 - target.potential(p.y_star) + 0.5 * cfg.quad(z) - 0.5 * cfg.quad(p.z_star);
  return p;
}

inline PointOutcome g2ms_step(const Vector& y, const G2msConfig& cfg, const TargetModel& target,
                              RngStream& rng) {
  const Vector z = cfg.S_factor() * standard_normal_vector(rng, target.dim());
  auto p = g2ms_propose(y, cfg, target, z);
  PointOutcome out;
  out.log_rho = p.log_rho;
  out.accepted = metropolis_accept(p.log_rho, rng);
  out.next = out.accepted ? p.y_star : cfg.J().apply(y);
  out.proposal = std::move(p.y_star);
  return out;
}

struct Var1Decomposition {
  Matrix A;
  Matrix J;
};

// I - B = (O1 Lambda O1^T)(O1 O2) from the SVD I - B = O1 Lambda O2.
inline Var1Decomposition decompose_var1(const Matrix& Btilde, double tol = 1e-10) {
  require(Btilde.rows() == Btilde.cols(), "decompose_var1: B must be square");
  const Eigen::Index d = Btilde.rows();
  const Matrix I = Matrix::Identity(d, d);
  const Matrix V = Btilde + Btilde.transpose() - Btilde * Btilde.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (V + V.transpose()));
  if (eig.eigenvalues().minCoeff() < -tol * std::max(1.0, V.norm()))
    throw DomainError("decompose_var1: B + B^T - B B^T is not positive semi-definite");
  Eigen::JacobiSVD<Matrix> svd(I - Btilde, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix& O1 = svd.matrixU();
  const Matrix O2 = svd.matrixV().transpose();
  Var1Decomposition r;
  r.A = I - O1 * svd.singularValues().asDiagonal() * O1.transpose();
  r.A = 0.5 * (r.A + r.A.transpose());
  r.J = O1 * O2;
  return r;
}

// ---------------------------------------------------------------------------
// I-Jump

struct LiftedPoint {
  Vector x;
  int s = 1;
};

struct LiftedOutcome {
  LiftedPoint next;
  bool accepted = false;
  double log_rho = 0.0;
  Vector proposal;
};

// Direction +1 proposes from f with backward density g; -1 the other way
// round. Rejection reverses the direction.
inline LiftedOutcome ijump_step(const LiftedPoint& state, const ProposalKernel& f,
                                const ProposalKernel& g, const TargetModel& target,
                                RngStream& rng) {
  f.check();
  g.check();
  require(state.s == 1 || state.s == -1, "ijump_step: direction must be +1 or -1");
  require_dim(state.x.size(), target.dim(), "ijump_step state");
  const ProposalKernel& fwd = state.s > 0 ? f : g;
  const ProposalKernel& bwd = state.s > 0 ? g : f;
  LiftedOutcome out;
  out.proposal = fwd.sample(state.x, rng);
  const double lf = fwd.log_density(out.proposal, state.x);
  if (!(lf > -std::numeric_limits<double>::infinity()))
    throw ContractViolation("ijump_step: proposal kernel has zero density at its own draw");
  out.log_rho = target.potential(state.x) - target.potential(out.proposal) +
                bwd.log_density(state.x, out.proposal) - lf;
  out.accepted = metropolis_accept(out.log_rho, rng);
  if (out.accepted)
    out.next = {out.proposal, state.s};
  else
    out.next = {state.x, -state.s};
  return out;
}

// Product-space form of I-Jump: y = (x, s), J(x, s) = (x, -s) and
// Q(x*, s* | x, s) = f or g by s, zero when the direction changes.
struct LiftedProductSpace {
  TargetModel target;
  ProposalKernel kernel;
  InvarianceMap J;
};

inline LiftedProductSpace ijump_as_gmh(const ProposalKernel& f, const ProposalKernel& g,
                                       const TargetModel& target) {
  const int k = target.dim();
  TargetModel lifted(k + 1, [target, k](const Vector& y, Vector& grad) {
    grad = Vector::Zero(k + 1);
    Vector gx;
    const double U = target.potential_and_gradient(y.head(k), gx);
    grad.head(k) = gx;
    return U;
  });
  ProposalKernel Q;
  Q.sample = [f, g, k](const Vector& y, RngStream& rng) -> Vector {
    Vector out(k + 1);
    const double s = y[k];
    out.head(k) = (s > 0 ? f : g).sample(y.head(k), rng);
    out[k] = s;
    return out;
  };
  Q.log_density = [f, g, k](const Vector& to, const Vector& from) {
    if (to[k] != from[k]) return -std::numeric_limits<double>::infinity();
    return (from[k] > 0 ? f : g).log_density(to.head(k), from.head(k));
  };
  return {std::move(lifted), std::move(Q), InvarianceMap::lifting_flip()};
}

// Isotropic Gaussian random-walk kernel N(from + shift, tau^2 I).
inline ProposalKernel shifted_gaussian_kernel(Vector shift, double tau) {
  require(tau > 0.0, "shifted_gaussian_kernel: tau must be positive");
  ProposalKernel q;
  q.sample = [shift, tau](const Vector& from, RngStream& rng) -> Vector {
    return from + shift + tau * standard_normal_vector(rng, from.size());
  };
  q.log_density = [shift, tau](const Vector& to, const Vector& from) {
    const double k = static_cast<double>(to.size());
    return -0.5 * (to - from - shift).squaredNorm() / (tau * tau) -
           k * std::log(tau) - 0.5 * k * std::log(2.0 * M_PI);
  };
  return q;
}

// HAMS with phi = 0 written as a GMH proposal on y = (x, u); pair it with
// InvarianceMap::momentum_flip.
inline ProposalKernel hams_proposal_kernel(const HamsConfig& cfg, const TargetModel& target) {
  const auto f = GeneralNoiseFactor::of(cfg);
  if (cfg.phi != 0.0) throw ConfigError("hams_proposal_kernel: requires phi = 0");
  const int k = target.dim();
  const double a1 = cfg.a1, a2 = cfg.a2, a3 = cfg.a3;
  // Means of (x*, u*) given (x, u).
  auto mean = [=](const Vector& y) {
    const Vector x = y.head(k), u = y.tail(k);
    const Vector g = target.gradient(x);
    Vector m(2 * k);
    m.head(k) = x - a1 * g + a2 * u;
    m.tail(k) = -u - a2 * g + a3 * u;
    return m;
  };
  ProposalKernel q;
  q.sample = [=](const Vector& y, RngStream& rng) -> Vector {
    const auto noise = draw_general_noise(f, k, rng);
    Vector out = mean(y);
    out.head(k) += noise.z1;
    out.tail(k) += noise.z2;
    return out;
  };
  q.log_density = [=](const Vector& to, const Vector& from) {
    const Vector d = to - mean(from);
    const double det = 1.0 / (f.i11 * f.i22 - f.i12 * f.i12);
    return -0.5 * f.quad(d.head(k), d.tail(k)) - 0.5 * k * std::log(det) -
           k * std::log(2.0 * M_PI);
  };
  return q;
}

}  // namespace hams
