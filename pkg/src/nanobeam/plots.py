"""Figure rendering for the CLI report path.

Each function saves one PNG next to the delimited output and returns
the path.  matplotlib runs on the Agg backend; nothing here opens a
window.  Kept out of the package root so importing nanobeam stays
cheap when no figures are wanted.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bands import BandStructure  # noqa: E402
from .errors import IOFailure  # noqa: E402
from .fdtd import Snapshot, Spectrum, TimeTrace  # noqa: E402
from .resonance import LorentzianModel  # noqa: E402
from .sweeps import SweepResult  # noqa: E402

__all__ = [
    "plot_spectrum",
    "plot_trace",
    "plot_bands",
    "plot_sweep",
    "plot_snapshot",
]

_DPI = 150


def _save(fig, path) -> Path:
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(p, dpi=_DPI, bbox_inches="tight")
    except OSError as e:
        raise IOFailure(f"cannot write figure {p}: {e}") from e
    finally:
        plt.close(fig)
    return p


def plot_spectrum(spectrum: Spectrum, path,
                  fit: LorentzianModel | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(spectrum.wavelengths, spectrum.values, ".", ms=3, color="k",
            label="data")
    if fit is not None:
        lam = np.linspace(spectrum.wavelengths[0], spectrum.wavelengths[-1],
                          800)
        ax.plot(lam, fit(lam), "-", lw=1.2, color="crimson",
                label=f"Lorentzian, Q = {fit.Q:.0f}")
        ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("transmission" if spectrum.kind == "Normalized"
                  else "signal")
    return _save(fig, path)


def plot_trace(trace: TimeTrace, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 3.0))
    t = trace.times()
    ax.plot(t, trace.samples, lw=0.5, color="k")
    ax.set_xlabel("t (nm / c)")
    ax.set_ylabel("field")
    env = np.abs(trace.samples)
    if env.max() > 0 and (env > 0).sum() > 10:
        ax.set_yscale("symlog", linthresh=max(env.max() * 1e-8, 1e-300))
    return _save(fig, path)


def plot_bands(bands: BandStructure, path,
               gap: tuple[float, float] | None = None) -> Path:
    """Band diagram; gap, when given, is (nu1, nu2) in a / lambda."""
    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    ll = bands.light_line()
    ax.fill_between(bands.k, ll, ll.max() * 1.5, color="0.85", zorder=0)
    ax.plot(bands.k, ll, "--", lw=0.8, color="0.4")
    for j in range(bands.freqs.shape[1]):
        ax.plot(bands.k, bands.freqs[:, j], "-", lw=1.1, color="navy")
    if gap is not None:
        ax.axhspan(gap[0], gap[1], color="gold", alpha=0.25, zorder=0)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, min(1.5 * ll.max(), float(bands.freqs.max())))
    ax.set_xlabel(r"k (pi/a)")
    ax.set_ylabel(r"a / lambda")
    return _save(fig, path)


def plot_sweep(sweep: SweepResult, path) -> Path:
    """Q (log) and lambda_res against the swept parameter."""
    vals = sweep.values()
    q = sweep.q_values()
    lam = sweep.lambda_values()
    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(5.0, 5.2), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]})
    ok = np.isfinite(q)
    ax1.plot(vals[ok], q[ok], "o-", ms=4, color="navy")
    if (~ok).any():
        for v in vals[~ok]:
            ax1.axvline(v, color="crimson", lw=0.6, ls=":")
    if sweep.q_sat is not None:
        ax1.axhline(sweep.q_sat, color="0.5", lw=0.8, ls="--")
        ax1.text(vals[0], sweep.q_sat, " Q_sat", va="bottom", fontsize=8,
                 color="0.35")
    ax1.set_yscale("log")
    ax1.set_ylabel("Q")
    okl = np.isfinite(lam)
    ax2.plot(vals[okl], lam[okl], "s-", ms=4, color="seagreen")
    ax2.set_ylabel(r"lambda_res (nm)")
    unit = f" ({sweep.unit})" if sweep.unit else ""
    ax2.set_xlabel(sweep.parameter + unit)
    return _save(fig, path)


def plot_snapshot(snap: Snapshot, path) -> Path:
    """|E|^2 over the permittivity outline."""
    fig, ax = plt.subplots(figsize=(6.4, 2.6))
    inten = snap.intensity.T
    nx, ny = snap.ex.shape
    extent = (0, nx * snap.dx, 0, ny * snap.dx)
    ax.imshow(inten, origin="lower", extent=extent, cmap="inferno",
              aspect="equal")
    ax.contour(snap.eps.T, levels=[0.5 * (snap.eps.min() + snap.eps.max())],
               extent=extent, colors="w", linewidths=0.4, alpha=0.6)
    ax.set_xlabel("x (nm)")
    ax.set_ylabel("y (nm)")
    return _save(fig, path)
