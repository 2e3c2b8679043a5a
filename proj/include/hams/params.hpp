#pragma once

#include "hams/core.hpp"

#include <cmath>
#include <string>

namespace hams {

enum class Variant { A, B, General };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::General: return "General";
  }
  return "?";
}

// Rounding slack for a + b <= 2 when b comes from c(2 - a) with c = 1.
inline constexpr double kSumSlack = 1e-12;

struct GeneralValidation {
  bool valid = true;
  std::string diagnostic;
};

inline GeneralValidation validate_general_A(double a1, double a2, double a3) {
  if (a1 < 0.0) return {false, "a1 must be non-negative"};
  if (a3 < 0.0) return {false, "a3 must be non-negative"};
  if (a1 + a3 > 2.0) return {false, "a1 + a3 must not exceed 2"};
  if (a1 * a3 < a2 * a2) return {false, "a1*a3 must be at least a2^2"};
  return {};
}

struct HamsConfig {
  Variant variant = Variant::A;
  double a = 0.0;
  double b = 0.0;
  double phi = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;

  static HamsConfig make_ab(Variant v, double a, double b) {
    HamsConfig c;
    c.variant = v;
    c.a = a;
    c.b = b;
    c.validate();
    return c;
  }
  static HamsConfig make_a(double a, double b) { return make_ab(Variant::A, a, b); }
  static HamsConfig make_b(double a, double b) { return make_ab(Variant::B, a, b); }

  static HamsConfig make_general(double a1, double a2, double a3, double phi) {
    HamsConfig c;
    c.variant = Variant::General;
    c.a1 = a1;
    c.a2 = a2;
    c.a3 = a3;
    c.phi = phi;
    c.validate();
    return c;
  }

  // Throws ConfigError when the invariants of the chosen variant fail.
  void validate() const {
    if (variant == Variant::General) {
      const auto v = validate_general_A(a1, a2, a3);
      if (!v.valid) throw ConfigError("general HAMS: " + v.diagnostic);
      if (!std::isfinite(phi)) throw ConfigError("general HAMS: phi must be finite");
      return;
    }
    if (!(a >= 0.0) || !(b >= 0.0))
      throw ConfigError("HAMS-A/B: a and b must be non-negative");
    if (a + b > 2.0 + kSumSlack) throw ConfigError("HAMS-A/B: a + b must not exceed 2");
    if (a >= 2.0) throw ConfigError("HAMS-A/B: a = 2 leaves the update undefined");
  }
};

inline double step_to_a(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw DomainError("step_to_a: epsilon must lie in [0, 1]");
  // Same value as 1 - sqrt(1 - eps^2) without the cancellation for small eps.
  return epsilon * epsilon / (1.0 + std::sqrt(1.0 - epsilon * epsilon));
}

inline double carryover_to_b(double a, double c) {
  if (!(a >= 0.0 && a <= 2.0)) throw DomainError("carryover_to_b: a must lie in [0, 2]");
  if (!(c >= 0.0 && c <= 1.0)) throw DomainError("carryover_to_b: c must lie in [0, 1]");
  return c * (2.0 - a);
}

inline double default_b(double a, Variant variant) {
  if (!(a > 0.0 && a <= 2.0)) throw DomainError("default_b: a must lie in (0, 2]");
  switch (variant) {
    case Variant::A: {
      const double d = std::sqrt(2.0) - std::sqrt(a);
      return d * d;
    }
    case Variant::B: {
      const double s = std::sqrt(2.0) + std::sqrt(2.0 - a);
      return a * (2.0 - a) / (s * s);
    }
    case Variant::General: break;
  }
  throw DomainError("default_b: only variants A and B have a default carryover");
}

inline double default_phi(double a, double b, Variant variant) {
  if (b == 0.0) return 0.0;
  switch (variant) {
    case Variant::A:
      if (a >= 2.0) throw DomainError("default_phi: variant A is singular at a = 2 with b > 0");
      return std::sqrt(a * b) / (2.0 - a);
    case Variant::B:
      if (!(a > 0.0)) throw DomainError("default_phi: variant B requires a > 0");
      return std::sqrt(b / a);
    case Variant::General: break;
  }
  throw DomainError("default_phi: only variants A and B have a default phi");
}

// (epsilon, c) surface. A missing c selects the carryover that minimizes the
// lag-1 spectral radius for the variant.
inline HamsConfig from_step(Variant variant, double epsilon, std::optional<double> c = std::nullopt) {
  if (variant == Variant::General)
    throw ConfigError("general HAMS is configured through (a1, a2, a3, phi) directly");
  const double a = step_to_a(epsilon);
  const double b = c ? carryover_to_b(a, *c) : (a > 0.0 ? default_b(a, variant) : 0.0);
  return HamsConfig::make_ab(variant, a, b);
}

}  // namespace hams
