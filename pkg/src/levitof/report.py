"""Figure rendering for run outputs.

Figures are a convenience view of the delimited data files, rendered
headlessly; the CSV/JSON outputs remain the interface of record and
the determinism contract covers only those.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import GaussianFitResult, Histogram, width_curve_model

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 4,
}


def _gauss_overlay(ax, hist: Histogram, fit: GaussianFitResult, n: int, scale: float):
    widths = np.diff(hist.bin_edges)
    grid = np.linspace(hist.bin_edges[0], hist.bin_edges[-1], 400)
    sigma = fit.width_dv / np.sqrt(2.0)
    pdf = np.exp(-0.5 * ((grid - fit.center) / sigma) ** 2) / (sigma * np.sqrt(2 * np.pi))
    ax.plot(grid * scale, n * float(np.mean(widths)) * pdf / scale, color="C3", lw=1.5)


def save_sample_hist(
    path,
    hist: Histogram,
    fit: GaussianFitResult | None,
    xlabel: str,
    scale: float = 1.0,
    dpi: int = 130,
) -> None:
    """Histogram of samples with an optional Gaussian-fit overlay."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.bar(
            hist.centers * scale,
            hist.counts,
            width=np.diff(hist.bin_edges) * scale,
            color="C0",
            alpha=0.7,
            edgecolor="k",
            linewidth=0.3,
        )
        if fit is not None:
            _gauss_overlay(ax, hist, fit, int(hist.counts.sum()), scale)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("counts")
        fig.savefig(path, dpi=dpi)
        plt.close(fig)


def save_width_curve(path, points, fit, particle, trap, dpi: int = 130) -> None:
    """Occupation sweep points with fitted and zero-broadening curves."""
    nz = np.array([p.n_z for p in points])
    w = np.array([p.width for p in points])
    werr = np.array([p.width_err if p.width_err else 0.0 for p in points])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(nz, w * 1e6, yerr=werr * 1e6, fmt="o", color="C0", label="campaigns")
        grid = np.linspace(0.0, max(float(nz.max()) * 1.1, 1.0), 300)
        ax.plot(
            grid,
            width_curve_model(grid, fit.eps2_delta_omega, particle, trap) * 1e6,
            "-",
            color="C3",
            label="fit",
        )
        ax.plot(
            grid,
            width_curve_model(grid, 0.0, particle, trap) * 1e6,
            "--",
            color="C0",
            label="no broadening",
        )
        ax.set_xlabel("occupation n_z")
        ax.set_ylabel("width dv (um/s)")
        ax.legend()
        fig.savefig(path, dpi=dpi)
        plt.close(fig)


def save_libration_sweep(path, rows, dpi: int = 130) -> None:
    """Offset estimates versus asymmetry for all three methods."""
    ok = [r for r in rows if r.error is None]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ratios = [r.c_over_a for r in ok]
        for attr, style, label in (
            ("eps2_approx", "o-", "closed form"),
            ("eps2_exact", "s--", "polynomial"),
            ("eps2_numeric", "^:", "quadrature"),
        ):
            ax.plot(ratios, [getattr(r, attr) * 1e12 for r in ok], style, label=label)
        ax.set_xlabel("asymmetry c/a")
        ax.set_ylabel("libration-center offset (pm)")
        ax.legend()
        fig.savefig(path, dpi=dpi)
        plt.close(fig)


def save_signal_recovery(path, true_m, recovered_m, example=None, dpi: int = 130) -> None:
    """True-versus-recovered displacement scatter, plus one trace."""
    true_m = np.asarray(true_m)
    recovered_m = np.asarray(recovered_m)
    with plt.rc_context(_STYLE):
        if example is not None:
            fig, (ax0, ax) = plt.subplots(1, 2, figsize=(9.0, 4.0))
            t = np.arange(example.samples.size) / example.sample_rate
            ax0.plot(t * 1e6, example.samples * 1e9, lw=0.6)
            ax0.set_xlabel("time (us)")
            ax0.set_ylabel(f"signal ({example.units})" if example.units != "m" else "signal (nm)")
        else:
            fig, ax = plt.subplots()
        lim = [min(true_m.min(), recovered_m.min()), max(true_m.max(), recovered_m.max())]
        ax.plot(np.array(lim) * 1e9, np.array(lim) * 1e9, "k-", lw=0.8)
        ax.plot(true_m * 1e9, recovered_m * 1e9, ".", alpha=0.4)
        ax.set_xlabel("true displacement (nm)")
        ax.set_ylabel("recovered displacement (nm)")
        fig.tight_layout()
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
