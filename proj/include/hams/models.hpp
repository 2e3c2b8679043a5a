#pragma once

#include "hams/core.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

namespace hams {

inline constexpr double kExpGuard = 700.0;

// exp that refuses arguments above the guard instead of saturating.
inline double guarded_exp(double v) {
  if (v > kExpGuard)
    throw DomainError("exp argument " + std::to_string(v) + " exceeds the overflow guard");
  return std::exp(v);
}

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// ---------------------------------------------------------------------------
// Multivariate normal

inline Matrix ar1_correlation(int k, double rho) {
  Matrix C(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) C(i, j) = std::pow(rho, std::abs(i - j));
  return C;
}

class MvnTarget {
 public:
  explicit MvnTarget(Matrix covariance) : C_(std::move(covariance)) {
    require(C_.rows() == C_.cols() && C_.rows() > 0, "MvnTarget: covariance must be square");
    Eigen::LLT<Matrix> llt(C_);
    if (llt.info() != Eigen::Success) throw DomainError("MvnTarget: covariance is not SPD");
    P_ = llt.solve(Matrix::Identity(C_.rows(), C_.cols()));
    P_ = 0.5 * (P_ + P_.transpose());
    log_det_precision_ = -2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  }

  int dim() const { return static_cast<int>(C_.rows()); }
  const Matrix& covariance() const { return C_; }
  const Matrix& precision() const { return P_; }
  double log_det_precision() const { return log_det_precision_; }

  TargetModel target() const {
    auto P = std::make_shared<const Matrix>(P_);
    return TargetModel(
        dim(),
        [P](const Vector& x, Vector& g) {
          g = (*P) * x;
          return 0.5 * x.dot(g);
        },
        P_);
  }

 private:
  Matrix C_;
  Matrix P_;
  double log_det_precision_ = 0;
};

// ---------------------------------------------------------------------------
// Stochastic volatility

struct SvData {
  Vector x;
  Vector y;
};

class SvModel {
 public:
  SvModel(Vector y, double beta, double sigma, double phi)
      : y2_(y.array().square()), y_(std::move(y)), beta_(beta), sigma_(sigma), phi_(phi) {
    if (!(sigma_ > 0.0)) throw DomainError("SvModel: sigma must be positive");
    if (!(std::abs(phi_) < 1.0)) throw DomainError("SvModel: |phi| must be below 1");
    if (!(beta_ > 0.0)) throw DomainError("SvModel: beta must be positive");
    require(y_.size() >= 2, "SvModel: at least two observations are required");
  }

  int T() const { return static_cast<int>(y_.size()); }
  double beta() const { return beta_; }
  double sigma() const { return sigma_; }
  double phi() const { return phi_; }
  const Vector& y() const { return y_; }
  const Vector& y2() const { return y2_; }

  // C^{-1} x with the tridiagonal AR(1) precision.
  Vector precision_times(const Vector& x) const {
    require_dim(x.size(), T(), "SvModel::precision_times");
    const int n = T();
    const double s2 = sigma_ * sigma_;
    Vector r(n);
    for (int t = 0; t < n; ++t) {
      const double diag = (t == 0 || t == n - 1) ? 1.0 : 1.0 + phi_ * phi_;
      double v = diag * x[t];
      if (t > 0) v -= phi_ * x[t - 1];
      if (t + 1 < n) v -= phi_ * x[t + 1];
      r[t] = v / s2;
    }
    return r;
  }

  Matrix precision_dense() const {
    const int n = T();
    const double s2 = sigma_ * sigma_;
    Matrix P = Matrix::Zero(n, n);
    for (int t = 0; t < n; ++t) {
      P(t, t) = ((t == 0 || t == n - 1) ? 1.0 : 1.0 + phi_ * phi_) / s2;
      if (t + 1 < n) P(t, t + 1) = P(t + 1, t) = -phi_ / s2;
    }
    return P;
  }

  Matrix covariance_dense() const {
    const int n = T();
    const double v = sigma_ * sigma_ / (1.0 - phi_ * phi_);
    Matrix C(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) C(i, j) = v * std::pow(phi_, std::abs(i - j));
    return C;
  }

  // Expected Hessian of the latent potential, C^{-1} + I/2.
  Matrix latent_preconditioner() const {
    Matrix M = precision_dense();
    M.diagonal().array() += 0.5;
    return M;
  }

  double latent_potential_grad(const Vector& x, Vector& grad) const {
    require_dim(x.size(), T(), "sv latent position");
    const Vector Px = precision_times(x);
    const double ib2 = 1.0 / (beta_ * beta_);
    grad.resize(T());
    double U = 0.5 * x.dot(Px);
    for (int t = 0; t < T(); ++t) {
      const double w = ib2 * y2_[t] * guarded_exp(-x[t]);
      U += 0.5 * (x[t] + w);
      grad[t] = Px[t] - 0.5 * w + 0.5;
    }
    return U;
  }

  TargetModel latent_target() const {
    auto self = std::make_shared<const SvModel>(*this);
    return TargetModel(
        T(), [self](const Vector& x, Vector& g) { return self->latent_potential_grad(x, g); },
        latent_preconditioner());
  }

 private:
  Vector y2_;
  Vector y_;
  double beta_, sigma_, phi_;
};

inline std::pair<double, Vector> sv_latent_potential_grad(const Vector& x, const SvModel& model) {
  Vector g;
  const double U = model.latent_potential_grad(x, g);
  return {U, std::move(g)};
}

// Parameter block of the SV posterior in (beta, alpha, gamma) with
// sigma = exp(gamma) and phi = tanh(alpha), given latent x and data y.
// Priors: pi(beta) ~ 1/beta, sigma^2 ~ Inv-chi^2(10, 0.05), (phi+1)/2 ~ Beta(20, 1.5).
class SvParamConditional {
 public:
  SvParamConditional(Vector x, const Vector& y) : x_(std::move(x)) {
    require(x_.size() == y.size() && x_.size() >= 2, "SvParamConditional: x and y must match");
    S_ = 0.0;
    for (Eigen::Index t = 0; t < x_.size(); ++t) S_ += y[t] * y[t] * guarded_exp(-x_[t]);
  }

  int T() const { return static_cast<int>(x_.size()); }

  double potential_grad(const Vector& theta, Vector& grad) const {
    require_dim(theta.size(), 3, "sv parameter vector");
    const double beta = theta[0], alpha = theta[1], gamma = theta[2];
    if (!(beta > 0.0)) throw DomainError("sv parameters: beta must be positive");
    const double T = this->T();
    const double phi = std::tanh(alpha);
    const double dphi = 1.0 - phi * phi;
    const double e2g = guarded_exp(-2.0 * gamma);
    const double log1p_phi = std::log(2.0) - softplus(-2.0 * alpha);
    const double log1m_phi = std::log(2.0) - softplus(2.0 * alpha);

    // q = (1 - phi^2) x1^2 + sum_{t>=2} (x_t - phi x_{t-1})^2 and dq/dphi.
    double q = (1.0 - phi * phi) * x_[0] * x_[0];
    double dq = -2.0 * phi * x_[0] * x_[0];
    for (Eigen::Index t = 1; t < x_.size(); ++t) {
      const double r = x_[t] - phi * x_[t - 1];
      q += r * r;
      dq -= 2.0 * r * x_[t - 1];
    }

    const double U = (T + 1.0) * std::log(beta) + 0.5 * S_ / (beta * beta) -
                     20.5 * log1p_phi - 2.0 * log1m_phi + (T + 10.0) * gamma +
                     0.25 * e2g + 0.5 * e2g * q;
    grad.resize(3);
    grad[0] = (T + 1.0) / beta - S_ / (beta * beta * beta);
    grad[1] = 22.5 * phi - 18.5 + 0.5 * e2g * dq * dphi;
    grad[2] = (T + 10.0) - 0.5 * e2g - e2g * q;
    return U;
  }

  // Expected Hessian under the marginals of x and z, in (beta, alpha, gamma) order.
  Matrix expected_hessian(const Vector& theta) const { return expected_hessian(theta, T()); }

  static Matrix expected_hessian(const Vector& theta, int T) {
    const double beta = theta[0], alpha = theta[1], gamma = theta[2];
    const double th = std::tanh(alpha);
    Matrix H = Matrix::Zero(3, 3);
    H(0, 0) = (2.0 * T - 1.0) / (beta * beta);
    H(1, 1) = 21.5 - 19.5 * th * th + (T - 1.0) * (1.0 - th * th);
    H(2, 2) = std::exp(-2.0 * gamma) + 2.0 * T;
    H(1, 2) = H(2, 1) = 2.0 * th;
    return H;
  }

  TargetModel target() const {
    auto self = std::make_shared<const SvParamConditional>(*this);
    // Outside beta > 0 the density is zero, so proposals there are rejected.
    return TargetModel(3, [self](const Vector& th, Vector& g) {
      if (!(th[0] > 0.0)) {
        g = Vector::Zero(3);
        return std::numeric_limits<double>::infinity();
      }
      return self->potential_grad(th, g);
    });
  }

 private:
  Vector x_;
  double S_ = 0.0;
};

inline std::pair<double, Vector> sv_param_potential_grad(double beta, double alpha, double gamma,
                                                         const Vector& x, const Vector& y) {
  SvParamConditional c(x, y);
  Vector g;
  const double U = c.potential_grad(Vector{{beta, alpha, gamma}}, g);
  return {U, std::move(g)};
}

inline SvData simulate_sv_data(int T, double beta, double sigma, double phi, RngStream& rng) {
  if (!(std::abs(phi) < 1.0)) throw DomainError("simulate_sv_data: |phi| must be below 1");
  if (!(sigma >= 0.0)) throw DomainError("simulate_sv_data: sigma must be non-negative");
  require(T >= 1, "simulate_sv_data: T must be positive");
  SvData d{Vector(T), Vector(T)};
  for (int t = 0; t < T; ++t) {
    const double eta = rng.normal();
    d.x[t] = t == 0 ? eta * sigma / std::sqrt(1.0 - phi * phi) : phi * d.x[t - 1] + sigma * eta;
    d.y[t] = rng.normal() * beta * std::exp(0.5 * d.x[t]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Log-Gaussian Cox process on an m x m grid

// Pairwise Euclidean distances between cells, row-major cell order.
inline Matrix grid_distances(int m) {
  const int n = m * m;
  Matrix D(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double di = a / m - b / m;
      const double dj = a % m - b % m;
      D(a, b) = std::sqrt(di * di + dj * dj);
    }
  return D;
}

inline Matrix cox_covariance(int m, double sigma2, double beta) {
  const Matrix D = grid_distances(m);
  return sigma2 * (-D.array() / (m * beta)).exp().matrix();
}

inline double cox_default_mu(double sigma2 = 1.91) { return std::log(126.0) - 0.5 * sigma2; }

class CoxModel {
 public:
  CoxModel(int m, Vector y, double sigma2, double beta, double mu)
      : m_(m), y_(std::move(y)), sigma2_(sigma2), beta_(beta), mu_(mu) {
    require(m_ >= 1, "CoxModel: grid size must be positive");
    require_dim(y_.size(), m_ * m_, "CoxModel observations");
    if (!(sigma2_ > 0.0) || !(beta_ > 0.0))
      throw DomainError("CoxModel: sigma^2 and beta must be positive");
    C_ = cox_covariance(m_, sigma2_, beta_);
    Eigen::LLT<Matrix> llt(C_);
    if (llt.info() != Eigen::Success) throw DomainError("CoxModel: covariance factorization failed");
    Cinv_ = llt.solve(Matrix::Identity(n(), n()));
    Cinv_ = 0.5 * (Cinv_ + Cinv_.transpose());
  }

  int m() const { return m_; }
  int n() const { return m_ * m_; }
  double sigma2() const { return sigma2_; }
  double beta() const { return beta_; }
  double mu() const { return mu_; }
  const Vector& y() const { return y_; }
  const Matrix& covariance() const { return C_; }
  const Matrix& precision() const { return Cinv_; }

  double latent_potential_grad(const Vector& x, Vector& grad) const {
    require_dim(x.size(), n(), "cox latent position");
    grad = Cinv_ * x;
    double U = 0.5 * x.dot(grad);
    const double inv_n = 1.0 / n();
    for (int i = 0; i < n(); ++i) {
      const double lam = inv_n * guarded_exp(x[i] + mu_);
      U -= y_[i] * x[i] - lam;
      grad[i] += lam - y_[i];
    }
    return U;
  }

  // D + C^{-1} with D = n^{-1} exp(mu + sigma^2 / 2) I.
  Matrix latent_preconditioner() const {
    Matrix M = Cinv_;
    M.diagonal().array() += std::exp(mu_ + 0.5 * sigma2_) / n();
    return M;
  }

  TargetModel latent_target() const {
    auto self = std::make_shared<const CoxModel>(*this);
    return TargetModel(
        n(), [self](const Vector& x, Vector& g) { return self->latent_potential_grad(x, g); },
        latent_preconditioner());
  }

 private:
  int m_;
  Vector y_;
  double sigma2_, beta_, mu_;
  Matrix C_, Cinv_;
};

inline std::pair<double, Vector> cox_latent_potential_grad(const Vector& x, const CoxModel& model) {
  Vector g;
  const double U = model.latent_potential_grad(x, g);
  return {U, std::move(g)};
}

// Parameter block (phi1, phi2) = (log sigma^2, log beta) given the latent field,
// with Gamma(2, rate 1/2) priors on sigma^2 and beta.
class CoxParamConditional {
 public:
  CoxParamConditional(int m, Vector x) : m_(m), x_(std::move(x)), D_(grid_distances(m)) {
    require_dim(x_.size(), m_ * m_, "CoxParamConditional latent field");
  }

  int n() const { return m_ * m_; }

  struct Pieces {
    Matrix C, Cinv, dC;
    double log_det = 0;
  };

  Pieces pieces(double phi1, double phi2) const {
    const double s2 = guarded_exp(phi1);
    const double b = guarded_exp(phi2);
    Pieces p;
    const Matrix R = (-D_.array() / (m_ * b)).exp().matrix();
    p.C = s2 * R;
    p.dC = (s2 / (m_ * b)) * (D_.array() * R.array()).matrix();
    Eigen::LLT<Matrix> llt(p.C);
    if (llt.info() != Eigen::Success)
      throw DomainError("CoxParamConditional: covariance factorization failed");
    p.Cinv = llt.solve(Matrix::Identity(n(), n()));
    p.log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    return p;
  }

  double potential_grad(const Vector& phi, Vector& grad) const {
    require_dim(phi.size(), 2, "cox parameter vector");
    const auto p = pieces(phi[0], phi[1]);
    const Vector Cix = p.Cinv * x_;
    const double quad = x_.dot(Cix);
    const double e1 = std::exp(phi[0]), e2 = std::exp(phi[1]);
    const double U = 0.5 * (e1 + e2) - 2.0 * (phi[0] + phi[1]) + 0.5 * quad + 0.5 * p.log_det;
    grad.resize(2);
    grad[0] = 0.5 * e1 - 2.0 + 0.5 * n() - 0.5 * quad;
    const double tr = (p.Cinv.array() * p.dC.array()).sum();
    grad[1] = 0.5 * e2 - 2.0 + 0.5 * tr - 0.5 * Cix.dot(p.dC * Cix);
    return U;
  }

  Matrix expected_hessian(const Vector& phi) const {
    const auto p = pieces(phi[0], phi[1]);
    const Matrix W = p.Cinv * p.dC;
    Matrix H(2, 2);
    H(0, 0) = 0.5 * (std::exp(phi[0]) + n());
    H(0, 1) = H(1, 0) = 0.5 * W.trace();
    H(1, 1) = 0.5 * (std::exp(phi[1]) + (W.array() * W.transpose().array()).sum());
    return H;
  }

  TargetModel target() const {
    auto self = std::make_shared<const CoxParamConditional>(*this);
    return TargetModel(2, [self](const Vector& p, Vector& g) { return self->potential_grad(p, g); });
  }

 private:
  int m_;
  Vector x_;
  Matrix D_;
};

inline std::pair<double, Vector> cox_param_potential_grad(double phi1, double phi2, int m,
                                                          const Vector& x) {
  CoxParamConditional c(m, x);
  Vector g;
  const double U = c.potential_grad(Vector{{phi1, phi2}}, g);
  return {U, std::move(g)};
}

// Poisson draw by sequential inversion.
inline long poisson_draw(double lambda, RngStream& rng) {
  if (!(lambda >= 0.0) || lambda > 500.0)
    throw DomainError("poisson_draw: mean must lie in [0, 500]");
  const double u = rng.uniform();
  double p = std::exp(-lambda);
  double F = p;
  long k = 0;
  while (u > F && k < 100000) {
    ++k;
    p *= lambda / k;
    F += p;
    if (p == 0.0 && F < u) break;
  }
  return k;
}

struct CoxData {
  Vector x;
  Vector y;
};

inline CoxData simulate_cox_data(int m, double sigma2, double beta, double mu, RngStream& rng) {
  const Matrix C = cox_covariance(m, sigma2, beta);
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success) throw DomainError("simulate_cox_data: covariance not SPD");
  const int n = m * m;
  CoxData d;
  d.x = llt.matrixL() * standard_normal_vector(rng, n);
  d.y.resize(n);
  for (int i = 0; i < n; ++i)
    d.y[i] = static_cast<double>(poisson_draw(guarded_exp(d.x[i] + mu) / n, rng));
  return d;
}

// ---------------------------------------------------------------------------
// Replayable data files: dimension line, seed line, then one value per line.

struct SeriesFile {
  Vector values;
  std::uint64_t seed = 0;
};

inline void write_series_file(const std::string& path, const Vector& values, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << values.size() << '\n' << seed << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.size(); ++i) out << values[i] << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline SeriesFile read_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  long dim = 0;
  SeriesFile f;
  if (!(in >> dim >> f.seed) || dim < 0) throw std::runtime_error(path + ": malformed header");
  f.values.resize(dim);
  for (long i = 0; i < dim; ++i)
    if (!(in >> f.values[i])) throw std::runtime_error(path + ": expected " + std::to_string(dim) + " values");
  return f;
}

}  // namespace hams
