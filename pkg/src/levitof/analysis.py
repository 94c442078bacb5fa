"""Distribution statistics for displacement/velocity samples.

Histograms, maximum-likelihood Gaussian fits in the dv = sqrt(2)*sigma
convention, moment summaries, bootstrap width errors, repetition-count
convergence, and the width-versus-occupation curve fit that extracts
the libration broadening product epsilon2*delta_omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .core import CONSTANTS, ParticleSpec, TrapSpec
from .errors import ConfigError, DataError, FitError
from .tofsim import TofProtocol, counter_rng

# Counter-RNG index namespaces; disjoint from the campaign blocks in
# tofsim (which occupy [0, 2^63)).
_BOOTSTRAP_BASE = (1 << 63) + (1 << 62)
_SUBSAMPLE_BASE = (1 << 63) + (1 << 62) + (1 << 61)


@dataclass(frozen=True)
class Histogram:
    """Binned samples: strictly increasing edges and per-bin counts."""

    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


@dataclass(frozen=True)
class GaussianFitResult:
    """Gaussian fit in the exp(-(v-c)^2/dv^2) convention.

    ``width_dv`` is sqrt(2) times the fitted standard deviation;
    ``goodness`` is the reduced chi-square of the fit against a
    Freedman-Diaconis histogram (NaN when too few populated bins).
    """

    center: float
    width_dv: float
    center_err: float
    width_err: float
    goodness: float
    n_samples: int


@dataclass(frozen=True)
class MomentSummary:
    """Unbiased sample moments with Gaussian-reference standard errors."""

    n: int
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    se_mean: float
    se_std: float
    se_skewness: float
    se_kurtosis: float


@dataclass(frozen=True)
class WidthCurvePoint:
    """One occupation sweep point: n_z, width dv, and its 1-sigma error.

    ``width_err`` of None or 0 marks a point without an error estimate;
    such points enter the curve fit with unit weight.
    """

    n_z: float
    width: float
    width_err: float | None = None

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise DataError("width must be positive")
        if self.n_z < 0:
            raise DataError("n_z must be >= 0")


@dataclass(frozen=True)
class WidthCurveFit:
    """Result of the single-parameter width-curve fit.

    ``q`` is the internal fit parameter (epsilon2*delta_omega)^2 in
    (m/s)^2; the public estimate is its clamped square root with an
    asymmetric-interval error (the boundary convention at q <= 0 keeps
    zero-signal data consistent with 0 within the quoted error).
    """

    eps2_delta_omega: float
    error: float
    q: float
    q_error: float
    reduced_chi2: float
    n_points: int


@dataclass(frozen=True)
class ConvergencePoint:
    n: int
    width_dv: float
    width_err: float


def displacement_to_velocity(delta_z, protocol: TofProtocol):
    """Convert free-flight displacement to velocity, v = delta_z / t_tof."""
    return np.multiply(delta_z, 1.0 / protocol.t_tof)


def _as_samples(samples, minimum: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise DataError(f"need at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite samples rejected")
    return x


def build_histogram(samples, n_bins: int | None = None, bin_width: float | None = None) -> Histogram:
    """Bin samples; Freedman-Diaconis bin count unless overridden.

    Exactly one of ``n_bins``/``bin_width`` may be given. The bin range
    always covers every sample.
    """
    x = _as_samples(samples, 2)
    if n_bins is not None and bin_width is not None:
        raise ConfigError("give n_bins or bin_width, not both")
    if n_bins is not None:
        if n_bins < 1:
            raise ConfigError("n_bins must be >= 1")
        edges = np.histogram_bin_edges(x, bins=int(n_bins))
    elif bin_width is not None:
        if not bin_width > 0:
            raise ConfigError("bin_width must be positive")
        lo, hi = float(x.min()), float(x.max())
        k = max(1, int(math.ceil((hi - lo) / bin_width)))
        edges = lo + bin_width * np.arange(k + 1)
        if edges[-1] < hi:  # rounding can leave the max sample outside
            edges = np.append(edges, edges[-1] + bin_width)
    else:
        q75, q25 = np.percentile(x, [75.0, 25.0])
        if q75 - q25 <= 0:
            raise DataError("zero interquartile range: data too degenerate to bin")
        edges = np.histogram_bin_edges(x, bins="fd")
    counts, edges = np.histogram(x, bins=edges)
    return Histogram(bin_edges=edges, counts=counts)


def _reduced_chi2(x: np.ndarray, center: float, sigma: float) -> float:
    # goodness against an FD histogram; bins with expected count < 5
    # are excluded, 3 dof consumed (center, width, normalization)
    try:
        hist = build_histogram(x)
    except DataError:
        return float("nan")
    cdf = stats.norm.cdf(hist.bin_edges, loc=center, scale=sigma)
    expected = x.size * np.diff(cdf)
    mask = expected >= 5.0
    dof = int(mask.sum()) - 3
    if dof < 1:
        return float("nan")
    chi2 = float(np.sum((hist.counts[mask] - expected[mask]) ** 2 / expected[mask]))
    return chi2 / dof


def fit_gaussian(samples) -> GaussianFitResult:
    """Maximum-likelihood Gaussian fit on raw (unbinned) samples.

    The histogram enters only through the goodness-of-fit number.
    Standard errors follow the observed information: center and width
    errors both equal sigma/sqrt(N) (the width error in the dv
    convention is sqrt(2)*sigma/sqrt(2N)).
    """
    x = _as_samples(samples, 10)
    n = x.size
    center = float(np.mean(x))
    sigma = float(np.sqrt(np.mean((x - center) ** 2)))
    if sigma == 0.0:
        raise DataError("degenerate data: zero variance")
    err = sigma / math.sqrt(n)
    return GaussianFitResult(
        center=center,
        width_dv=math.sqrt(2.0) * sigma,
        center_err=err,
        width_err=err,
        goodness=_reduced_chi2(x, center, sigma),
        n_samples=n,
    )


def compute_moments(samples) -> MomentSummary:
    """Unbiased moment estimators with Gaussian-reference standard errors."""
    x = _as_samples(samples, 4)
    n = x.size
    std = float(np.std(x, ddof=1))
    if std == 0.0:
        raise DataError("degenerate data: zero variance")
    return MomentSummary(
        n=n,
        mean=float(np.mean(x)),
        std=std,
        skewness=float(stats.skew(x, bias=False)),
        excess_kurtosis=float(stats.kurtosis(x, fisher=True, bias=False)),
        se_mean=std / math.sqrt(n),
        se_std=std / math.sqrt(2.0 * n),
        se_skewness=math.sqrt(6.0 / n),
        se_kurtosis=math.sqrt(24.0 / n),
    )


def bootstrap_width_error(samples, n_resamples: int = 1000, seed: int = 0) -> float:
    """Bootstrap standard deviation of the fitted width dv.

    Nonparametric resampling with a counter-keyed generator per
    resample, so the estimate is deterministic and independent of
    evaluation order.
    """
    if n_resamples < 100:
        raise ConfigError("n_resamples must be >= 100")
    x = _as_samples(samples, 10)
    n = x.size
    widths = np.empty(n_resamples)
    for j in range(n_resamples):
        rng = counter_rng(seed, _BOOTSTRAP_BASE + j)
        idx = rng.integers(0, n, size=n)
        r = x[idx]
        mu = r.mean()
        widths[j] = math.sqrt(2.0 * float(np.mean((r - mu) ** 2)))
    return float(np.std(widths, ddof=1))


def convergence_study(
    samples,
    subset_sizes,
    n_resamples: int = 500,
    seed: int = 0,
    method: str = "prefix",
) -> list[ConvergencePoint]:
    """Fitted width versus repetition count.

    ``method="prefix"`` fits the first N samples (size = total reuses
    the full fit exactly); ``method="subsample"`` draws N samples
    without replacement from a seeded generator per subset. Errors are
    bootstrap width errors on each subset.
    """
    x = _as_samples(samples, 10)
    points: list[ConvergencePoint] = []
    for k, size in enumerate(subset_sizes):
        size = int(size)
        if size > x.size:
            raise ConfigError(f"subset size {size} exceeds available samples {x.size}")
        if method == "prefix":
            sub = x[:size]
        elif method == "subsample":
            rng = counter_rng(seed, _SUBSAMPLE_BASE + k)
            sub = rng.choice(x, size=size, replace=False)
        else:
            raise ConfigError("method must be 'prefix' or 'subsample'")
        fit = fit_gaussian(sub)
        err = bootstrap_width_error(sub, n_resamples=n_resamples, seed=seed)
        points.append(ConvergencePoint(n=size, width_dv=fit.width_dv, width_err=err))
    return points


def width_curve_model(n_z, eps2_delta_omega: float, particle: ParticleSpec, trap: TrapSpec):
    """Width dv at occupation n_z for a given broadening product (m/s)."""
    base = CONSTANTS.hbar * trap.omega_z * (2.0 * np.asarray(n_z, dtype=float) + 1.0) / particle.mass
    return np.sqrt(base + 2.0 * eps2_delta_omega**2)


def fit_width_curve(points, particle: ParticleSpec, trap: TrapSpec) -> WidthCurveFit:
    """Weighted least-squares fit of the width curve's libration term.

    The model width(n_z)^2 = hbar*Omega_z*(2n_z+1)/m + 2q is fitted in
    width space with weights 1/width_err^2 (unit weights where errors
    are missing), over the single parameter q = (eps2*delta_omega)^2.
    The reported estimate is sqrt(max(q, 0)); its error maps the
    1-sigma q-interval through the square root, with sqrt(q_error) as
    the scale when the interval collapses at the physical boundary.
    """
    points = list(points)
    if len(points) < 2:
        raise DataError("need at least 2 width points")
    nz = np.array([p.n_z for p in points], dtype=float)
    w = np.array([p.width for p in points], dtype=float)
    if np.unique(nz).size < 2:
        raise DataError("width points must span distinct occupations")
    if not (np.all(np.isfinite(nz)) and np.all(np.isfinite(w))):
        raise DataError("non-finite width points rejected")
    raw_err = np.array(
        [p.width_err if p.width_err is not None else 0.0 for p in points], dtype=float
    )
    defaulted = ~(np.isfinite(raw_err) & (raw_err > 0))
    sig = np.where(defaulted, 1.0, raw_err)

    base = CONSTANTS.hbar * trap.omega_z * (2.0 * nz + 1.0) / particle.mass
    qscale = float(base.min())  # q = qscale * u; model zero sits at u = -1/2

    def resid(u):
        q = qscale * u[0]
        return (np.sqrt(np.maximum(base + 2.0 * q, 0.0)) - w) / sig

    lam = 1.0 / (2.0 * w * sig) ** 2
    u0 = float(np.sum(lam * (w * w - base)) / np.sum(2.0 * lam)) / qscale
    lower = -0.5 + 1e-9
    u0 = min(max(u0, lower + 1e-9), 1e12)
    sol = optimize.least_squares(resid, x0=[u0], bounds=([lower], [np.inf]))
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitError("width-curve fit did not converge")
    u_hat = float(sol.x[0])
    if u_hat <= lower + 1e-9:
        raise FitError(
            "no physical solution: widths fall below the zero-broadening curve"
        )
    fisher = float(np.sum(sol.jac**2))
    if not fisher > 0:
        raise FitError("width-curve fit is degenerate (no parameter sensitivity)")
    u_var = 1.0 / fisher
    n_pts = len(points)
    chi2_red = 2.0 * float(sol.cost) / max(n_pts - 1, 1)
    if np.any(defaulted):
        # unknown per-point errors: scale the covariance by the
        # residual variance, as usual for unit-weight least squares
        u_var *= max(chi2_red, 0.0)
    q_hat = qscale * u_hat
    q_err = qscale * math.sqrt(u_var)

    est = math.sqrt(max(q_hat, 0.0))
    upper = math.sqrt(max(q_hat + q_err, 0.0))
    low = math.sqrt(max(q_hat - q_err, 0.0))
    err = max(upper - est, est - low)
    if err == 0.0:
        err = math.sqrt(q_err)
    return WidthCurveFit(
        eps2_delta_omega=est,
        error=err,
        q=q_hat,
        q_error=q_err,
        reduced_chi2=chi2_red,
        n_points=n_pts,
    )
