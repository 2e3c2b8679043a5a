#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace hams {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Caller broke a documented precondition (wrong dimension, empty vector, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// A numeric argument lies outside the domain of a formula.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A sampler or experiment was configured inconsistently.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A chain produced a non-finite value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want)
    throw ContractViolation(std::string(what) + ": dimension " + std::to_string(got) +
                            " does not match target dimension " + std::to_string(want));
}

// Potential-energy target: U(x) = -log pi(x) + const, its gradient, and an
// optional curvature hint for preconditioning. Copies share the callables.
class TargetModel {
 public:
  using Potential = std::function<double(const Vector&)>;
  using Gradient = std::function<Vector(const Vector&)>;
  // Returns U(x) and writes grad U(x) into the second argument.
  using Joint = std::function<double(const Vector&, Vector&)>;

  TargetModel(int dim, Potential potential, Gradient gradient,
              std::optional<Matrix> expected_hessian_hint = std::nullopt)
      : dim_(dim), potential_(std::move(potential)), gradient_(std::move(gradient)),
        hint_(std::move(expected_hessian_hint)) {
    require(dim_ > 0, "TargetModel: dimension must be positive");
    require(static_cast<bool>(potential_) && static_cast<bool>(gradient_),
            "TargetModel: potential and gradient are required");
    joint_ = [p = potential_, g = gradient_](const Vector& x, Vector& grad) {
      grad = g(x);
      return p(x);
    };
    check_hint();
  }

  TargetModel(int dim, Joint joint, std::optional<Matrix> expected_hessian_hint = std::nullopt)
      : dim_(dim), joint_(std::move(joint)), hint_(std::move(expected_hessian_hint)) {
    require(dim_ > 0, "TargetModel: dimension must be positive");
    require(static_cast<bool>(joint_), "TargetModel: joint evaluator is required");
    potential_ = [j = joint_](const Vector& x) {
      Vector g;
      return j(x, g);
    };
    gradient_ = [j = joint_](const Vector& x) {
      Vector g;
      j(x, g);
      return g;
    };
    check_hint();
  }

  int dim() const { return dim_; }

  double potential(const Vector& x) const {
    require_dim(x.size(), dim_, "potential");
    return potential_(x);
  }

  Vector gradient(const Vector& x) const {
    require_dim(x.size(), dim_, "gradient");
    return gradient_(x);
  }

  double potential_and_gradient(const Vector& x, Vector& grad) const {
    require_dim(x.size(), dim_, "potential_and_gradient");
    return joint_(x, grad);
  }

  const std::optional<Matrix>& expected_hessian_hint() const { return hint_; }

 private:
  void check_hint() const {
    if (!hint_) return;
    require(hint_->rows() == dim_ && hint_->cols() == dim_,
            "TargetModel: expected Hessian hint has the wrong shape");
  }

  int dim_;
  Potential potential_;
  Gradient gradient_;
  Joint joint_;
  std::optional<Matrix> hint_;
};

struct AugmentedState {
  Vector x;
  Vector u;
};

// Augmented state together with U(x) and grad U(x), so that a step needs a
// single fresh gradient evaluation at the proposal.
struct CachedState : AugmentedState {
  double potential = 0.0;
  Vector gradient;

  static CachedState at(const TargetModel& target, Vector x, Vector u) {
    require_dim(x.size(), target.dim(), "state position");
    require_dim(u.size(), target.dim(), "state momentum");
    CachedState s;
    s.x = std::move(x);
    s.u = std::move(u);
    s.potential = target.potential_and_gradient(s.x, s.gradient);
    return s;
  }
};

inline double hamiltonian(const AugmentedState& state, const TargetModel& target) {
  require_dim(state.x.size(), target.dim(), "hamiltonian position");
  require_dim(state.u.size(), target.dim(), "hamiltonian momentum");
  return target.potential(state.x) + 0.5 * state.u.squaredNorm();
}

namespace detail {

// Acklam's rational approximation to the standard normal quantile, refined by
// one Halley step on erfc. Accurate to a few ulp over (0, 1).
inline double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace detail

// Reproducible random stream. The engine is std::mt19937_64 seeded through
// std::seed_seq with the 32-bit halves of (seed, stream_id); both are fully
// specified by the C++ standard. Uniforms use the top 53 bits shifted to the
// open interval (0,1); normals use the quantile transform above.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return detail::normal_quantile(uniform()); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

inline Vector standard_normal_vector(RngStream& rng, Eigen::Index k) {
  require(k >= 1, "standard_normal_vector: k must be at least 1");
  Vector z(k);
  for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
  return z;
}

// Metropolis decision on an unclamped log ratio; NaN rejects. Always consumes
// exactly one uniform so that chains sharing a stream stay aligned.
inline bool metropolis_accept(double log_rho, RngStream& rng) {
  const double w = rng.uniform();
  if (std::isnan(log_rho)) return false;
  return std::log(w) < std::min(0.0, log_rho);
}

}  // namespace hams
