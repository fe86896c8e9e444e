"""Resonance extraction: harmonic inversion, Lorentzian fits, mode volume.

Frequencies are in 1/nm (c = 1), wavelengths in nm.  Q conventions:
Q = omega / (2 |decay rate|) for time traces, Q = lambda0 / FWHM for
spectra; both reduce to 2 pi stored energy over energy lost per cycle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .fdtd import Snapshot, Spectrum, TimeTrace
from .numerics import levenberg_marquardt

__all__ = [
    "ResonanceResult",
    "LorentzianModel",
    "LeakageWarning",
    "harmonic_inversion",
    "lorentzian_fit",
    "mode_volume",
    "purcell_factor",
]


class LeakageWarning(UserWarning):
    """Steady-state field has not decayed at the domain edges."""


@dataclass(frozen=True)
class ResonanceResult:
    lambda_res: float
    Q: float
    amplitude: float
    method: str                       # HarmonicInversion | LorentzianFit
    V_m: float | None = None          # in (lambda_res / n_core)^3
    sigma_lambda: float | None = None
    sigma_Q: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.Q <= 0:
            raise NumericalError(f"Q must be positive, got {self.Q}")
        if self.V_m is not None and self.V_m <= 0:
            raise NumericalError(f"V_m must be positive, got {self.V_m}")

    @property
    def frequency(self) -> float:
        return 1.0 / self.lambda_res


@dataclass(frozen=True)
class LorentzianModel:
    """A (G/2)^2 / ((lam - lam0)^2 + (G/2)^2) + B with FWHM G."""

    lambda0: float
    gamma: float
    amplitude: float
    baseline: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError(f"FWHM must be positive, got {self.gamma}")

    @property
    def Q(self) -> float:
        return self.lambda0 / self.gamma

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        h = 0.5 * self.gamma
        return (self.amplitude * h * h / ((lam - self.lambda0) ** 2 + h * h)
                + self.baseline)


# ---------------------------------------------------------------------------
# harmonic inversion (matrix pencil)

_AMPLITUDE_FLOOR = 1e-4
_RANK_TOL = 1e-11


def harmonic_inversion(trace: TimeTrace, band: tuple[float, float],
                       max_modes: int = 8,
                       decimate: int = 1) -> list[ResonanceResult]:
    """Decompose a source-free trace into decaying sinusoids.

    Matrix-pencil (ESPRIT-style) estimation: Hankel matrix of the
    trace, SVD-thresholded rank, generalized shift eigenvalues give
    the complex frequencies; amplitudes follow from a Vandermonde
    least-squares solve.  Modes are filtered to the frequency band
    (in 1/nm), to positive decay (Q > 0), and to amplitudes above
    1e-4 of the dominant mode, then sorted by amplitude.

    decimate keeps every n-th sample; pick it so the band's highest
    frequency stays below ~0.35 per decimated sample to shorten the
    SVD on long traces without touching band content.
    """
    f_lo, f_hi = band
    if not 0 <= f_lo < f_hi:
        raise ConfigError(f"band must satisfy 0 <= f_lo < f_hi, got {band}")
    if decimate < 1:
        raise ConfigError(f"decimate must be >= 1, got {decimate}")
    x = np.asarray(trace.samples, dtype=float)[::decimate]
    dt = trace.dt * decimate
    if not np.all(np.isfinite(x)):
        raise NumericalError("trace contains non-finite samples")
    if len(x) < 4 * max_modes:
        raise ConfigError(
            f"need at least {4 * max_modes} samples, got {len(x)}"
        )
    if f_hi * dt > 0.5:
        raise ConfigError(
            f"band upper edge {f_hi:.3g} exceeds the Nyquist limit "
            f"{0.5 / dt:.3g} of the (decimated) trace"
        )

    notes: list[str] = []
    L = min(len(x) // 2, 512)
    Y = np.lib.stride_tricks.sliding_window_view(x, L + 1)
    U, s, Vh = np.linalg.svd(Y, full_matrices=False)
    rank = int(np.sum(s > s[0] * _RANK_TOL)) if s[0] > 0 else 0
    if rank == 0:
        return []
    want = 2 * max_modes
    if rank < want:
        notes.append(f"pencil rank {rank} below requested 2x{max_modes}")
    M = min(rank, want)
    V = Vh[:M].conj().T
    z = np.linalg.eigvals(np.linalg.pinv(V[:-1]) @ V[1:])
    lam = np.log(np.where(z == 0, 1e-300, z)) / dt  # sigma + i Omega

    # amplitudes over the decimated record
    n = np.arange(len(x))
    basis = np.exp(np.outer(n, lam * dt))
    coef, *_ = np.linalg.lstsq(basis, x.astype(complex), rcond=None)

    results = []
    amax = np.abs(coef).max() if len(coef) else 0.0
    for lk, ck in zip(lam, coef):
        om, sg = lk.imag, lk.real
        if om <= 0:  # keep one of each conjugate pair
            continue
        f = om / (2.0 * np.pi)
        if not (f_lo <= f <= f_hi):
            continue
        if sg >= 0:  # growing or undamped: not a physical resonance
            continue
        a = 2.0 * np.abs(ck)  # conjugate pair carries the other half
        if a < _AMPLITUDE_FLOOR * 2.0 * amax:
            continue
        q = om / (-2.0 * sg)
        results.append(ResonanceResult(
            lambda_res=1.0 / f, Q=q, amplitude=a,
            method="HarmonicInversion", notes=tuple(notes)))
    results.sort(key=lambda r: -r.amplitude)
    return results


# ---------------------------------------------------------------------------
# Lorentzian fitting

def _initial_lorentzian(lam, y) -> LorentzianModel:
    b = float(np.percentile(y, 10))
    k = int(np.argmax(y))
    a = float(y[k] - b)
    half = b + 0.5 * a
    above = y >= half
    idx = np.nonzero(above)[0]
    if len(idx) >= 2:
        width = lam[idx[-1]] - lam[idx[0]]
    else:
        width = 0.0
    if width <= 0:
        width = (lam[-1] - lam[0]) / 6.0
    return LorentzianModel(lambda0=float(lam[k]), gamma=float(width),
                           amplitude=a if a > 0 else 1e-12, baseline=b)


def lorentzian_fit(spec: Spectrum, window: tuple[float, float] | None = None,
                   initial: LorentzianModel | None = None) -> ResonanceResult:
    """Fit one Lorentzian to a spectrum window.

    Internally parameterized as (lambda0, ln Gamma, A, B) so the width
    stays positive at every iterate.  Standard errors come from the
    residual-scaled inverse normal matrix; sigma_Q by propagation
    through Q = lambda0 / Gamma.  A fit whose Q uncertainty exceeds Q
    is flagged "not-a-resonance" in notes rather than trusted.
    """
    lam = np.asarray(spec.wavelengths, dtype=float)
    y = np.asarray(spec.values, dtype=float)
    if window is not None:
        m = (lam >= window[0]) & (lam <= window[1])
        lam, y = lam[m], y[m]
    if len(lam) < 8:
        raise ConfigError(
            f"fit window holds {len(lam)} samples; need at least 8"
        )
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        raise ConfigError("no interior local maximum in the fit window")

    g0 = initial if initial is not None else _initial_lorentzian(lam, y)
    scale = max(float(np.max(np.abs(y))), 1e-300)

    def unpack(p):
        return LorentzianModel(lambda0=p[0], gamma=float(np.exp(p[1])),
                               amplitude=p[2] * scale, baseline=p[3] * scale)

    def residual(p):
        return (unpack(p)(lam) - y) / scale

    p0 = np.array([g0.lambda0, np.log(g0.gamma), g0.amplitude / scale,
                   g0.baseline / scale])
    p, cov, info = levenberg_marquardt(residual, p0)
    if not info["converged"] and info["n_iter"] >= 200:
        raise NumericalError(
            f"Lorentzian fit did not converge in {info['n_iter']} "
            f"iterations (ssr {info['ssr']:.3g}, last iterate "
            f"lambda0={p[0]:.6g}, fwhm={np.exp(p[1]):.6g})"
        )
    model = unpack(p)
    q = model.Q
    sig_l = sig_q = None
    notes: list[str] = []
    if cov is not None:
        sig_l = float(np.sqrt(max(cov[0, 0], 0.0)))
        # Q = lambda0 * exp(-lnG): grad = (1/G, -Q, 0, 0)
        grad = np.array([1.0 / model.gamma, -q, 0.0, 0.0])
        sig_q = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    if sig_q is not None and sig_q > q:
        notes.append("not-a-resonance: Q uncertainty exceeds Q")
    if model.amplitude <= 0:
        notes.append("not-a-resonance: non-positive peak amplitude")
    return ResonanceResult(
        lambda_res=model.lambda0, Q=q, amplitude=model.amplitude,
        method="LorentzianFit", sigma_lambda=sig_l, sigma_Q=sig_q,
        notes=tuple(notes))


# ---------------------------------------------------------------------------
# mode volume and Purcell factor

def mode_volume(snapshot: Snapshot, lambda_res: float, n_core: float,
                t_eff: float = 200.0) -> float:
    """Mode volume in (lambda_res/n_core)^3 units from a 2D snapshot.

    A_m = sum(eps |E|^2) dx^2 / max(eps |E|^2), V_m = A_m t_eff.
    Emits LeakageWarning when the field at the domain edge exceeds
    1e-3 of its maximum (the integral is then untrustworthy).
    """
    if lambda_res <= 0 or n_core <= 0 or t_eff <= 0:
        raise ConfigError("lambda_res, n_core, t_eff must be positive")
    u = snapshot.eps * snapshot.intensity
    peak = u.max()
    if peak <= 0:
        raise NumericalError("snapshot field is identically zero")
    if snapshot.edge_level > 1e-3:
        warnings.warn(
            f"field at domain edge is {snapshot.edge_level:.2g} of max; "
            "mode volume includes leakage", LeakageWarning)
    a_m = float(u.sum()) * snapshot.dx ** 2 / float(peak)
    return a_m * t_eff / (lambda_res / n_core) ** 3


def purcell_factor(Q: float, V_m: float) -> float:
    """F_p = (3 / 4 pi^2) Q / V_m, with V_m in (lambda/n)^3 units."""
    if Q <= 0 or V_m <= 0:
        raise ConfigError("Q and V_m must be positive")
    return 3.0 * Q / (4.0 * np.pi ** 2 * V_m)
