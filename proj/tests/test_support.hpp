#pragma once

#include "hams/core.hpp"
#include "hams/models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace testing_support {

using hams::Matrix;
using hams::Vector;

inline hams::TargetModel standard_normal(int k) {
  return hams::MvnTarget(Matrix::Identity(k, k)).target();
}

// N(0, gamma^{-1} I)
inline hams::TargetModel isotropic_normal(int k, double gamma) {
  return hams::MvnTarget(Matrix::Identity(k, k) / gamma).target();
}

// Smooth, non-Gaussian and coupled:
// U(x) = sum(x_i^2 / 2 + 0.1 x_i^4) + 0.2 sum x_i x_{i+1}.
inline hams::TargetModel quartic_chain(int k) {
  return hams::TargetModel(k, [k](const Vector& x, Vector& g) {
    double U = 0.0;
    g.resize(k);
    for (int i = 0; i < k; ++i) {
      U += 0.5 * x[i] * x[i] + 0.1 * std::pow(x[i], 4);
      g[i] = x[i] + 0.4 * std::pow(x[i], 3);
    }
    for (int i = 0; i + 1 < k; ++i) {
      U += 0.2 * x[i] * x[i + 1];
      g[i] += 0.2 * x[i + 1];
      g[i + 1] += 0.2 * x[i];
    }
    return U;
  });
}

// Largest relative error between the analytic gradient and central
// differences of the potential. The scale floor keeps near-zero partials from
// dominating.
inline double fd_gradient_error(const std::function<double(const Vector&)>& U,
                                const Vector& analytic, const Vector& x, double h = 1e-5) {
  double worst = 0.0;
  const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (U(xp) - U(xm)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
  }
  return worst;
}

inline double fd_gradient_error(const hams::TargetModel& t, const Vector& x, double h = 1e-5) {
  return fd_gradient_error([&](const Vector& v) { return t.potential(v); }, t.gradient(x), x, h);
}

// Uniform point in the ball of radius r.
inline Vector random_in_ball(hams::RngStream& rng, int k, double r) {
  Vector v = hams::standard_normal_vector(rng, k);
  const double radius = r * std::pow(rng.uniform(), 1.0 / k);
  return v.normalized() * radius;
}

inline Matrix random_orthogonal(hams::RngStream& rng, int k) {
  Matrix A(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) A(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(A);
  return qr.householderQ();
}

}  // namespace testing_support
