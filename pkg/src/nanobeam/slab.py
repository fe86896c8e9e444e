"""Planar slab waveguide dispersion and effective index.

Collapses the vertical film stack into a single in-plane index for the
2D solvers.  The guided-mode condition for an asymmetric slab of
thickness t is

    k0 t sqrt(n_core^2 - n^2) = m pi
        + atan(f_sub  * g_sub  / kappa)
        + atan(f_clad * g_clad / kappa)

with kappa = sqrt(n_core^2 - n^2), g_b = sqrt(n^2 - n_b^2), f_b = 1 for
TE and (n_core / n_b)^2 for TM.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericalError
from .geometry import MaterialStack

__all__ = ["dispersion_residual", "cutoff_thickness", "slab_neff"]

_RES_TOL = 1e-12


def _f_factor(n_core: float, n_b: float, polarization: str) -> float:
    return 1.0 if polarization == "TE" else (n_core / n_b) ** 2


def dispersion_residual(n_eff, stack: MaterialStack, wavelength: float,
                        mode_index: int = 0, polarization: str = "TE"):
    """Signed residual of the slab dispersion relation.

    Positive below the root, negative above; strictly decreasing in
    n_eff on (max(n_sub, n_clad), n_core).
    """
    n = np.asarray(n_eff, dtype=float)
    k0 = 2.0 * np.pi / wavelength
    kap = np.sqrt(stack.n_core**2 - n**2)
    g_sub = np.sqrt(np.maximum(n**2 - stack.n_substrate**2, 0.0))
    g_clad = np.sqrt(np.maximum(n**2 - stack.n_cladding**2, 0.0))
    return (k0 * stack.t * kap - mode_index * np.pi
            - np.arctan(_f_factor(stack.n_core, stack.n_substrate, polarization)
                        * g_sub / kap)
            - np.arctan(_f_factor(stack.n_core, stack.n_cladding, polarization)
                        * g_clad / kap))


def cutoff_thickness(stack: MaterialStack, wavelength: float,
                     mode_index: int = 0, polarization: str = "TE") -> float:
    """Film thickness below which the requested mode is cut off."""
    n_hi = max(stack.n_substrate, stack.n_cladding)
    n_lo = min(stack.n_substrate, stack.n_cladding)
    k0 = 2.0 * np.pi / wavelength
    kap = np.sqrt(stack.n_core**2 - n_hi**2)
    g = np.sqrt(n_hi**2 - n_lo**2)
    f = _f_factor(stack.n_core, n_lo, polarization)
    return (mode_index * np.pi + np.arctan(f * g / kap)) / (k0 * kap)


def slab_neff(stack: MaterialStack, wavelength: float,
              mode_index: int = 0, polarization: str = "TE") -> float:
    """Effective index of a guided slab mode, by bisection.

    Raises
    ------
    NumericalError
        If the mode is below cutoff for this stack and wavelength.
    """
    stack.validate()
    if wavelength <= 0:
        raise ConfigError(f"wavelength must be positive, got {wavelength}")
    if mode_index < 0:
        raise ConfigError(f"mode_index must be >= 0, got {mode_index}")
    if polarization not in ("TE", "TM"):
        raise ConfigError(f"polarization must be TE or TM, got {polarization!r}")

    lo = max(stack.n_substrate, stack.n_cladding) + 1e-12
    hi = stack.n_core - 1e-12
    args = (stack, wavelength, mode_index, polarization)
    if dispersion_residual(lo, *args) <= 0.0:
        t_c = cutoff_thickness(stack, wavelength, mode_index, polarization)
        raise NumericalError(
            f"{polarization}{mode_index} is below cutoff at {wavelength} nm "
            f"for t = {stack.t} nm (cutoff thickness {t_c:.4g} nm)"
        )
    # residual is strictly decreasing, so plain bisection converges
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = dispersion_residual(mid, *args)
        if abs(r) < _RES_TOL:
            return float(mid)
        if r > 0.0:
            lo = mid
        else:
            hi = mid
    r = dispersion_residual(0.5 * (lo + hi), *args)
    if abs(r) > 1e-9:
        raise NumericalError(
            f"slab dispersion bisection stalled (residual {r:.3g})"
        )
    return float(0.5 * (lo + hi))
