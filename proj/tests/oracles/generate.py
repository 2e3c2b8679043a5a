"""Independent reference values for the unit tests.

Evaluated with mpmath at 50 significant digits from the update formulas
written out by hand, without importing or calling the C++ library. Run with
`python3 tests/oracles/generate.py > tests/oracle_values.hpp`.
"""
from mpmath import mp, mpf, sqrt, exp, log

mp.dps = 50


def hams_ab(variant, gamma, a, b, x0, u0, zeta):
    """One HAMS-A or HAMS-B proposal for U(x) = gamma x^2 / 2 in one dimension."""
    grad = lambda x: gamma * x
    U = lambda x: gamma * x * x / 2
    g0 = grad(x0)
    xs = x0 - a * g0 + sqrt(a * b) * u0 + sqrt(a * (2 - a - b)) * zeta
    gs = grad(xs)
    if variant == "A":
        us = (2 * b / (2 - a) - 1) * u0 - sqrt(a * b) / (2 - a) * (g0 + gs) \
            + 2 * sqrt(b * (2 - a - b)) / (2 - a) * zeta
        zs = (1 - 2 * b / (2 - a)) * zeta - sqrt(a * (2 - a - b)) / (2 - a) * (g0 + gs) \
            + 2 * sqrt(b * (2 - a - b)) / (2 - a) * u0
    else:
        us = u0 - sqrt(a * b) / (2 - a) * (g0 + gs)
        zs = zeta - sqrt(a * (2 - a - b)) / (2 - a) * (g0 + gs)
    H0 = U(x0) + u0 * u0 / 2
    H1 = U(xs) + us * us / 2
    log_rho = H0 - H1 + zeta * zeta / 2 - zs * zs / 2
    return xs, us, zs, log_rho


def hams_general(gamma, a1, a2, a3, phi, x0, u0, z1, z2):
    """Algorithm 1 in one dimension with explicit noises (Z1, Z2)."""
    grad = lambda x: gamma * x
    U = lambda x: gamma * x * x / 2
    g0 = grad(x0)
    zt1 = z1 - a1 * g0 + a2 * u0
    zt2 = z2 - a2 * g0 + a3 * u0
    xs = x0 + zt1
    gs = grad(xs)
    us = -u0 + zt2 + phi * (zt1 + g0 - gs)
    z1s = zt1 - a1 * gs - a2 * us
    z2s = zt2 - a2 * gs - a3 * us
    # Var(Z1, Z2) = 2A - A^2 for A = [[a1, a2], [a2, a3]].
    s11 = 2 * a1 - a1 * a1 - a2 * a2
    s12 = 2 * a2 - a2 * (a1 + a3)
    s22 = 2 * a3 - a3 * a3 - a2 * a2
    det = s11 * s22 - s12 * s12
    quad = lambda p, q: (s22 * p * p - 2 * s12 * p * q + s11 * q * q) / det
    log_rho = U(x0) + u0 * u0 / 2 - U(xs) - us * us / 2 + quad(z1, z2) / 2 - quad(z1s, z2s) / 2
    return xs, us, log_rho


def pmala_1d(eps, x0, z):
    """pMALA on N(0, 1): proposal mean x - eps^2/2 * x, variance eps^2."""
    mean = lambda x: x - eps * eps / 2 * x
    xs = mean(x0) + eps * z
    U = lambda x: x * x / 2
    logq = lambda to, frm: -(to - mean(frm)) ** 2 / (2 * eps * eps)
    return xs, U(x0) - U(xs) + logq(x0, xs) - logq(xs, x0)


def bartlett_denominator(phi, K):
    phi = mpf(phi)
    return 1 + 2 * sum((1 - mpf(k) / K) * phi ** k for k in range(1, K + 1))


def leapfrog_harmonic(eps, x, u):
    u = u - eps / 2 * x
    x = x + eps * u
    u = u - eps / 2 * x
    return x, u


def emit(name, value):
    print(f"inline constexpr double {name} = {mp.nstr(value, 20, min_fixed=-30, max_fixed=30)};")


print("#pragma once")
print("// Generated by tests/oracles/generate.py; do not edit by hand.")
print("namespace oracle {")
for v in ("A", "B"):
    xs, us, zs, lr = hams_ab(v, mpf(4), mpf("0.5"), mpf("0.5"), mpf(1), mpf("0.5"), mpf("0.3"))
    emit(f"kHams{v}_x_star", xs)
    emit(f"kHams{v}_u_star", us)
    emit(f"kHams{v}_zeta_star", zs)
    emit(f"kHams{v}_log_rho", lr)
for v in ("A", "B"):
    xs, us, zs, lr = hams_ab(v, mpf("1.7"), mpf("0.3"), mpf("0.4"), mpf("0.8"), mpf("-0.6"),
                             mpf("1.1"))
    emit(f"kHams{v}2_x_star", xs)
    emit(f"kHams{v}2_u_star", us)
    emit(f"kHams{v}2_zeta_star", zs)
    emit(f"kHams{v}2_log_rho", lr)
xs, us, lr = hams_general(mpf("2.5"), mpf("0.4"), mpf("0.1"), mpf("0.6"), mpf("0.2"), mpf("0.7"),
                          mpf("-0.3"), mpf("0.25"), mpf("-0.4"))
emit("kGeneral_x_star", xs)
emit("kGeneral_u_star", us)
emit("kGeneral_log_rho", lr)
xs, lr = pmala_1d(mpf("0.5"), mpf(1), mpf(0))
emit("kPmala_x_star", xs)
emit("kPmala_log_rho", lr)
x, u = leapfrog_harmonic(mpf("0.1"), mpf(1), mpf(0))
emit("kLeapfrog_x", x)
emit("kLeapfrog_u", u)
emit("kDefaultB_variantB_a1", 3 - 2 * sqrt(2))
for tag, phi in (("m05", "-0.5"), ("0", "0"), ("05", "0.5"), ("09", "0.9")):
    emit(f"kBartlettDenominator_{tag}", bartlett_denominator(phi, 3000))
print("}  // namespace oracle")
