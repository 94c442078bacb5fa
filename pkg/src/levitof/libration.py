"""Libration-center offset of an asymmetric composite particle.

The particle is a hemisphere of radius a joined to a prolate
half-spheroid with semi-axes (a, a, c); the axial coordinate r is
measured from the center of mass, which sits a distance r0 = 3(c-a)/8
from the junction plane. The libration center is the axial point about
which the restoring torque of the anisotropic optical potential is
symmetric; its offset epsilon2 from the center of mass is computed by
three independent routes:

  * CLOSED_FORM  first-order formula in the asymmetry,
  * POLYNOMIAL   exact polynomial condition, root-found,
  * QUADRATURE   second psi-derivative of the split-volume potential
                 difference, by adaptive quadrature and finite
                 differences, root-found.

Cross-validation of the three routes is the main correctness check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize

from .core import TrapSpec
from .errors import ConfigError, LevitofError, NumericsError, RootBracketError


@dataclass(frozen=True)
class AsymmetricGeometry:
    """Hemisphere (radius a) plus half-spheroid (semi-axes a, a, c)."""

    a: float
    c: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ConfigError("a must be positive")
        if self.c < self.a:
            raise ConfigError("c must be >= a")

    @classmethod
    def from_ratio(cls, a: float, ca_ratio: float) -> "AsymmetricGeometry":
        return cls(a=a, c=a * ca_ratio)

    @property
    def r0(self) -> float:
        """Center-of-mass offset from the junction plane, 3(c-a)/8."""
        return 3.0 * (self.c - self.a) / 8.0

    @property
    def r_min(self) -> float:
        return -self.a - self.r0

    @property
    def r_max(self) -> float:
        return self.c - self.r0


class CenterMethod(enum.Enum):
    QUADRATURE = "quadrature"
    POLYNOMIAL = "polynomial"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class LibrationCenterResult:
    """Offset estimate with the method that produced it.

    ``residual`` is the condition value at the returned root for the
    root-based methods and NaN for the closed form.
    """

    epsilon2: float
    method: CenterMethod
    residual: float


@dataclass(frozen=True)
class PotentialCoefficients:
    """Coefficients of the reduced integrand A f^2 + (B r^2 + C r + D) f.

    ``s`` = 2(Omega_x^2 - Omega_z^2) is the anisotropy scale that the
    polynomial condition is organized around.
    """

    A: float
    B: float
    C: float
    D: float
    s: float


def potential_coefficients(
    psi: float, epsilon2: float, a: float, trap: TrapSpec
) -> PotentialCoefficients:
    """Evaluate the reduced-integrand coefficients at one orientation."""
    wx2 = trap.omega_x**2
    wy2 = trap.omega_y**2
    wz2 = trap.omega_z**2
    cp = math.cos(psi)
    sp = math.sin(psi)
    b = wz2 * sp * sp + wx2 * cp * cp
    return PotentialCoefficients(
        A=a * a / 4.0 * (wy2 + wz2 * cp * cp + wx2 * sp * sp),
        B=b,
        C=2.0 * epsilon2 * (wx2 * cp - b),
        D=epsilon2 * epsilon2 * (wz2 * sp * sp + wx2 * (1.0 - cp) ** 2),
        s=2.0 * (wx2 - wz2),
    )


def profile_f(r, geometry: AsymmetricGeometry):
    """Squared cross-section profile of the composite body.

    f(r) = 1 - (r+r0)^2/c^2 on the spheroid side (r > -r0) and
    1 - (r+r0)^2/a^2 on the sphere side; both branches equal 1 at the
    junction r = -r0 and 0 at the poles. Accepts scalars or arrays.
    """
    arr = np.asarray(r, dtype=float)
    tol = 1e-12 * geometry.a
    if np.any(arr < geometry.r_min - tol) or np.any(arr > geometry.r_max + tol):
        raise ConfigError("r outside the particle extent")
    shifted = arr + geometry.r0
    out = np.where(
        arr > -geometry.r0,
        1.0 - shifted**2 / geometry.c**2,
        1.0 - shifted**2 / geometry.a**2,
    )
    if np.isscalar(r):
        return float(out)
    return out


def _check_range(geometry: AsymmetricGeometry, r_lo: float, r_hi: float) -> None:
    tol = 1e-12 * geometry.a
    if not r_lo < r_hi:
        raise ConfigError("r_lo must be below r_hi")
    if r_lo < geometry.r_min - tol or r_hi > geometry.r_max + tol:
        raise ConfigError("integration range exceeds the particle extent")


def potential_reduced(
    psi: float,
    epsilon2: float,
    geometry: AsymmetricGeometry,
    trap: TrapSpec,
    r_lo: float | None = None,
    r_hi: float | None = None,
    mass: float = 1.0,
) -> float:
    """Orientation potential from the reduced one-dimensional integral.

    Adaptive quadrature of A f^2 + (B r^2 + C r + D) f over
    [r_lo, r_hi] (defaults: the whole particle), split at the branch
    junction. The prefactor is 3*mass/(8*(a+c)); mass=1 gives the
    per-unit-mass value, and every condition built on differences of
    this potential is independent of the prefactor.
    """
    lo = geometry.r_min if r_lo is None else float(r_lo)
    hi = geometry.r_max if r_hi is None else float(r_hi)
    _check_range(geometry, lo, hi)
    co = potential_coefficients(psi, epsilon2, geometry.a, trap)

    def integrand(r: float) -> float:
        fr = profile_f(r, geometry)
        return co.A * fr * fr + (co.B * r * r + co.C * r + co.D) * fr

    junction = -geometry.r0
    pieces = [(lo, junction), (junction, hi)] if lo < junction < hi else [(lo, hi)]
    total = 0.0
    for plo, phi in pieces:
        val, err = integrate.quad(integrand, plo, phi, epsabs=0.0, epsrel=1e-12, limit=200)
        if not math.isfinite(val) or err > 1e-8 * (abs(val) + 1e-30):
            raise NumericsError("reduced-potential quadrature did not converge")
        total += val
    return 3.0 * mass / (8.0 * (geometry.a + geometry.c)) * total


def _potential_3d_fixed(
    psi: float,
    epsilon2: float,
    geometry: AsymmetricGeometry,
    trap: TrapSpec,
    mass: float,
    n_r: int,
    n_rho: int,
    n_theta: int,
) -> float:
    # Gauss-Legendre in r (per branch) and in the disk radius, uniform
    # grid in the disk angle (exact for the low-order harmonics here).
    a = geometry.a
    wx2 = trap.omega_x**2
    wy2 = trap.omega_y**2
    wz2 = trap.omega_z**2
    cp = math.cos(psi)
    sp = math.sin(psi)
    xs, ws = leggauss(n_r)
    rho_x, rho_w = leggauss(n_rho)
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    w_theta = 2.0 * math.pi / n_theta
    total = 0.0
    for lo, hi in ((geometry.r_min, -geometry.r0), (-geometry.r0, geometry.r_max)):
        if not hi > lo:
            continue
        r = (hi - lo) / 2.0 * xs + (hi + lo) / 2.0
        w_r = (hi - lo) / 2.0 * ws
        disk_r = a * np.sqrt(np.clip(profile_f(r, geometry), 0.0, None))
        rho = 0.5 * (rho_x[None, :] + 1.0) * disk_r[:, None]
        w_rho = 0.5 * rho_w[None, :] * disk_r[:, None]
        p = rho[:, :, None] * np.cos(theta)[None, None, :]
        q = rho[:, :, None] * np.sin(theta)[None, None, :]
        rr = r[:, None, None]
        # harmonic intensity profile around the rotated, shifted body
        term = (
            wx2 * (rr * cp + p * sp + epsilon2 * (1.0 - cp)) ** 2
            + wy2 * q**2
            + wz2 * (p * cp - rr * sp + epsilon2 * sp) ** 2
        )
        weight = w_r[:, None, None] * (w_rho * rho)[:, :, None] * w_theta
        total += float(np.sum(term * weight))
    return 3.0 * mass / (8.0 * math.pi * a**2 * (geometry.a + geometry.c)) * total


def potential_3d(
    psi: float,
    epsilon2: float,
    geometry: AsymmetricGeometry,
    trap: TrapSpec,
    mass: float = 1.0,
    n_r: int = 48,
    n_rho: int = 8,
    n_theta: int = 16,
) -> float:
    """Orientation potential from tensor-product quadrature of the full
    three-dimensional integral over the composite volume.

    Independent of ``potential_reduced`` (no use of the reduced
    coefficients); the two must agree to ~1e-6 relative, which is the
    toolkit's main cross-check of the reduction. A refined pass guards
    against quadrature non-convergence.
    """
    if not abs(psi) < math.pi / 2:
        raise ConfigError("psi must satisfy |psi| < pi/2")
    coarse = _potential_3d_fixed(psi, epsilon2, geometry, trap, mass, n_r, n_rho, n_theta)
    fine = _potential_3d_fixed(
        psi, epsilon2, geometry, trap, mass, n_r + 16, n_rho + 4, n_theta + 8
    )
    if not math.isfinite(fine) or abs(fine - coarse) > 1e-8 * (abs(fine) + 1e-30):
        raise NumericsError("3D potential quadrature did not converge")
    return fine


def libration_condition(
    epsilon2: float,
    geometry: AsymmetricGeometry,
    trap: TrapSpec,
    mass: float = 1.0,
    h: float = 1e-3,
) -> float:
    """Curvature mismatch of the two half-volumes split at r = epsilon2.

    Returns d^2(U1 - U2)/dpsi^2 at psi = 0, where U1 integrates over
    (epsilon2, r_max) and U2 over (r_min, epsilon2). The root in
    epsilon2 is the libration center. Second derivative by 5-point
    central differences at steps h and h/2 with one Richardson step.
    """
    if not geometry.r_min < epsilon2 < geometry.r_max:
        raise ConfigError("epsilon2 must lie strictly inside the particle extent")

    def diff(psi: float) -> float:
        u1 = potential_reduced(psi, epsilon2, geometry, trap, epsilon2, geometry.r_max, mass)
        u2 = potential_reduced(psi, epsilon2, geometry, trap, geometry.r_min, epsilon2, mass)
        return u1 - u2

    def second(hh: float) -> float:
        return (
            -diff(-2.0 * hh)
            + 16.0 * diff(-hh)
            - 30.0 * diff(0.0)
            + 16.0 * diff(hh)
            - diff(2.0 * hh)
        ) / (12.0 * hh * hh)

    return (16.0 * second(h / 2.0) - second(h)) / 15.0


def _condition_polynomial_terms(
    epsilon2: float, geometry: AsymmetricGeometry, trap: TrapSpec
) -> list[float]:
    # The expanded form of the curvature-mismatch condition. Terms are
    # kept separate (canonical order: s-group, then the linear-in-e
    # group, then the quadratic group) for compensated summation and a
    # natural scale; each term carries rad^2/s^2 * m^3.
    a = geometry.a
    c = geometry.c
    r0 = geometry.r0
    e = epsilon2
    wx2 = trap.omega_x**2
    wz2 = trap.omega_z**2
    s = 2.0 * (wx2 - wz2)
    g1 = 2.0 * e * (s - wx2)
    g2 = e * e * (2.0 * wx2 - s)
    return [
        s * (2.0 * a**2 / 15.0 * (c - a)),
        s * (-(a**2) / 2.0 * (r0 + e)),
        s * (a**2 / (3.0 * c**2) * (r0 + e) ** 3),
        s * (-(a**2) / (10.0 * c**4) * (r0 + e) ** 5),
        s * (-((c - r0) ** 3) / 3.0),
        s * ((c - r0) ** 5 / (5.0 * c**2)),
        s * (r0 * (c - r0) ** 4 / (2.0 * c**2)),
        s * (r0**2 * (c - r0) ** 3 / (3.0 * c**2)),
        s * (2.0 / 3.0 * e**3),
        s * (-2.0 / (5.0 * c**2) * e**5),
        s * (-r0 * e**4 / c**2),
        s * (-2.0 / (3.0 * c**2) * r0**2 * e**3),
        s * (-(r0**5) * (a**2 - c**2) / (30.0 * a**2 * c**2)),
        s * ((a + r0) ** 3 / 3.0),
        s * (-((a + r0) ** 5) / (5.0 * a**2)),
        s * (r0 * (a + r0) ** 4 / (2.0 * a**2)),
        s * (-(r0**2) * (a + r0) ** 3 / (3.0 * a**2)),
        g1 * ((c - r0) ** 2 / 2.0),
        g1 * ((a + r0) ** 2 / 2.0),
        g1 * (-(e**2)),
        g1
        * (
            -((c - r0) ** 4 / 4.0 + 2.0 / 3.0 * r0 * (c - r0) ** 3 + r0**2 * (c - r0) ** 2 / 2.0)
            / c**2
        ),
        g1 * (2.0 * e**2 / c**2 * (e**2 / 4.0 + 2.0 * r0 * e / 3.0 + r0**2 / 2.0)),
        g1 * (-(r0**4) * (a**2 - c**2) / (12.0 * a**2 * c**2)),
        g1
        * (
            -((a + r0) ** 4 / 4.0 - 2.0 / 3.0 * r0 * (a + r0) ** 3 + r0**2 * (a + r0) ** 2 / 2.0)
            / a**2
        ),
        g2 * (2.0 / 3.0 * (c - a)),
        g2 * (-2.0 * (r0 + e)),
        g2 * (2.0 / (3.0 * c**2) * (r0 + e) ** 3),
    ]


def condition_polynomial(
    epsilon2: float, geometry: AsymmetricGeometry, trap: TrapSpec
) -> float:
    """Expanded polynomial form of the libration-center condition."""
    return math.fsum(_condition_polynomial_terms(epsilon2, geometry, trap))


def _condition_scale(epsilon2: float, geometry: AsymmetricGeometry, trap: TrapSpec) -> float:
    return math.fsum(abs(t) for t in _condition_polynomial_terms(epsilon2, geometry, trap))


def _bracketed_root(func, lo: float, hi: float, n_grid: int = 25) -> float:
    """Grid scan for sign changes, then a bracketed solve (bisection
    safeguarded secant) on the bracket nearest zero."""
    xs = np.linspace(lo, hi, n_grid)
    vals = np.array([func(float(x)) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise NumericsError("condition evaluation produced non-finite values")
    exact = np.where(vals == 0.0)[0]
    if exact.size:
        return float(xs[exact[np.argmin(np.abs(xs[exact]))]])
    signs = np.sign(vals)
    idx = np.where(signs[:-1] * signs[1:] < 0)[0]
    if idx.size == 0:
        raise RootBracketError("no sign change of the condition inside the bracket")
    order = np.argsort(np.abs(0.5 * (xs[idx] + xs[idx + 1])))
    i = int(idx[order[0]])
    return float(
        optimize.brentq(func, float(xs[i]), float(xs[i + 1]), xtol=1e-21, rtol=8.9e-16)
    )


def _default_bracket(geometry: AsymmetricGeometry) -> tuple[float, float]:
    # wide against physical offsets (sub-nanometer) yet inside the body
    return (-geometry.a / 2.0, geometry.a / 2.0)


def epsilon2_exact(
    geometry: AsymmetricGeometry,
    trap: TrapSpec,
    bracket: tuple[float, float] | None = None,
) -> LibrationCenterResult:
    """Libration-center offset from the polynomial condition."""
    lo, hi = bracket if bracket is not None else _default_bracket(geometry)
    _check_range(geometry, lo, hi)

    def func(e: float) -> float:
        return condition_polynomial(e, geometry, trap)

    root = _bracketed_root(func, lo, hi)
    residual = func(root)
    scale = _condition_scale(root, geometry, trap)
    if scale > 0.0 and abs(residual) > 1e-12 * scale:
        raise NumericsError("polynomial root residual exceeds 1e-12 of the term scale")
    return LibrationCenterResult(root, CenterMethod.POLYNOMIAL, residual)


def epsilon2_numeric(
    geometry: AsymmetricGeometry,
    trap: TrapSpec,
    bracket: tuple[float, float] | None = None,
    mass: float = 1.0,
) -> LibrationCenterResult:
    """Libration-center offset from quadrature and finite differences.

    Fully independent of the polynomial expansion; used as the oracle
    for ``epsilon2_exact``.
    """
    lo, hi = bracket if bracket is not None else _default_bracket(geometry)
    _check_range(geometry, lo, hi)

    def func(e: float) -> float:
        return libration_condition(e, geometry, trap, mass=mass)

    root = _bracketed_root(func, lo, hi)
    return LibrationCenterResult(root, CenterMethod.QUADRATURE, func(root))


def epsilon2_approx(geometry: AsymmetricGeometry, trap: TrapSpec) -> LibrationCenterResult:
    """First-order closed form of the libration-center offset."""
    a = geometry.a
    c = geometry.c
    wx2 = trap.omega_x**2
    wz2 = trap.omega_z**2
    num = 2.0 * (wx2 - wz2) * (c - a) * (19.0 * c**2 / 15.0 - 26.0 * a * c / 15.0 + 3.0 * a**2)
    den = (wx2 - 2.0 * wz2) * (9.0 * c**2 + 14.0 * a * c + 9.0 * a**2) - 32.0 * a**2 * (
        wx2 - wz2
    )
    if den == 0.0:
        raise NumericsError("closed-form denominator vanishes for these parameters")
    return LibrationCenterResult(num / den, CenterMethod.CLOSED_FORM, float("nan"))


@dataclass(frozen=True)
class AsymmetrySweepRow:
    """One asymmetry-sweep row; ``error`` holds the failure message for
    rows whose solvers did not produce a result."""

    c_over_a: float
    eps2_approx: float | None = None
    eps2_exact: float | None = None
    eps2_numeric: float | None = None
    residual_exact: float | None = None
    residual_numeric: float | None = None
    spread: float | None = None
    error: str | None = None


def sweep_asymmetry(
    base: AsymmetricGeometry, trap: TrapSpec, ca_ratios
) -> list[AsymmetrySweepRow]:
    """Evaluate all three offset routes over a list of c/a ratios.

    Per-row failures are recorded in the row and the sweep continues.
    ``spread`` is the max-min range of the three estimates relative to
    their largest magnitude, floored at 1e-6*a so that all-zero rows
    (symmetric geometry) do not divide noise by noise.
    """
    ratios = [float(r) for r in ca_ratios]
    if any(r < 1.0 for r in ratios):
        raise ConfigError("asymmetry ratios must be >= 1")
    rows: list[AsymmetrySweepRow] = []
    for ratio in ratios:
        try:
            geom = AsymmetricGeometry.from_ratio(base.a, ratio)
            ap = epsilon2_approx(geom, trap)
            ex = epsilon2_exact(geom, trap)
            nu = epsilon2_numeric(geom, trap)
            vals = (ap.epsilon2, ex.epsilon2, nu.epsilon2)
            scale = max(max(abs(v) for v in vals), 1e-6 * base.a)
            rows.append(
                AsymmetrySweepRow(
                    c_over_a=ratio,
                    eps2_approx=ap.epsilon2,
                    eps2_exact=ex.epsilon2,
                    eps2_numeric=nu.epsilon2,
                    residual_exact=ex.residual,
                    residual_numeric=nu.residual,
                    spread=(max(vals) - min(vals)) / scale,
                )
            )
        except LevitofError as exc:  # per-row failure, sweep continues
            rows.append(AsymmetrySweepRow(c_over_a=ratio, error=str(exc)))
    return rows
