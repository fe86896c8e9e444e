"""TE Bloch bands of a nanobeam mirror period by plane-wave expansion.

Solves the 2D master equation for the out-of-plane magnetic field,

    sum_j (k + G_i) . (k + G_j) eta(G_i - G_j) h_j = (w/c)^2 h_i,

with eta the Fourier transform of 1 / eps(x, y) over one period in x
and a y supercell around the beam.  Frequencies are reported as a/lambda
and Bloch wavevectors in units of pi/a (1 = zone edge).

The rasters produced by :func:`nanobeam.geometry.unit_cell_raster` are
even under both reflections, which makes eta real and the eigenproblem
real symmetric; that solver path is roughly 3x faster than the general
Hermitian one and is verified against the residual of the imaginary
part at build time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError
from .geometry import MaterialStack, background_index, unit_cell_raster

__all__ = [
    "BandStructure",
    "MirrorCell",
    "MirrorScan",
    "bloch_bands",
    "band_structure",
    "band_edges",
    "light_line",
    "mirror_strength",
    "optimize_mirror",
]

# imaginary residual above this fraction of the leading Fourier
# coefficient means the raster lost its inversion symmetry
_ETA_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class BandStructure:
    """Band diagram along Gamma-X for one mirror period."""

    k: np.ndarray            # pi/a units
    freqs: np.ndarray        # (n_k, n_bands), a/lambda units
    a: float
    supercell: float         # y extent in nm
    n_background: float

    def light_line(self) -> np.ndarray:
        return light_line(self.k, self.n_background)


@dataclass(frozen=True)
class MirrorCell:
    """One scanned mirror period with its gap metrics."""

    a: float
    r: float
    w: float
    nu1: float               # dielectric band edge, a/lambda
    nu2: float               # air band edge, a/lambda
    gamma: float             # mirror strength at the target wavelength
    lambda_mid: float        # midgap wavelength in nm

    @property
    def gap_fraction(self) -> float:
        return (self.nu2 - self.nu1) / (0.5 * (self.nu1 + self.nu2))


@dataclass(frozen=True)
class MirrorScan:
    """Result of a mirror-cell parameter scan."""

    cells: list[MirrorCell] = field(default_factory=list)

    @property
    def best(self) -> MirrorCell:
        ranked = [c for c in self.cells if np.isfinite(c.gamma) and c.gamma > 0]
        if not ranked:
            raise NumericalError(
                "no scanned mirror cell places the target wavelength inside "
                "its band gap"
            )
        return max(ranked, key=lambda c: c.gamma)


def _plane_wave_indices(n_pw: int) -> np.ndarray:
    # m in [-n//2, n//2); asymmetric by one at even n, standard FFT order
    return np.arange(n_pw) - n_pw // 2


def _eta_table(eps: np.ndarray) -> np.ndarray:
    """Fourier coefficients of 1/eps, indexed by (dmx, dmy) mod shape."""
    eta = np.fft.ifft2(1.0 / eps)
    imag = np.abs(eta.imag).max()
    lead = np.abs(eta[0, 0].real)
    if imag > _ETA_IMAG_TOL * lead:
        raise NumericalError(
            f"unit-cell raster is not inversion symmetric "
            f"(imag residual {imag / lead:.3g}); cannot use the "
            "real-symmetric solver path"
        )
    return np.ascontiguousarray(eta.real)


def bloch_bands(eps: np.ndarray, extents: tuple[float, float], k,
                n_bands: int = 8, n_pw: tuple[int, int] = (32, 32),
                return_vectors: bool = False):
    """Lowest TE bands of a periodic raster at Bloch wavevectors k.

    Parameters
    ----------
    eps : ndarray (nx, ny)
        Permittivity over one period [0, a) x [0, W), inversion
        symmetric about the sample origin.
    extents : (a, W)
        Physical size of the raster in nm.
    k : array_like
        Bloch wavevectors along x in pi/a units.
    n_bands : int
        Number of bands to return, counted from the bottom.
    n_pw : (int, int)
        Plane waves per axis; the raster must be at least twice as
        dense on each axis.
    return_vectors : bool
        Also return eigenvectors and the plane-wave index table
        (needed for parity classification).

    Returns
    -------
    freqs : ndarray (n_k, n_bands)
        Frequencies in a/lambda units, ascending per k.
    vectors, (mx, my) : only when return_vectors is set.
    """
    a, W = extents
    npx, npy = n_pw
    if eps.shape[0] < 2 * npx or eps.shape[1] < 2 * npy:
        raise ConfigError(
            f"raster {eps.shape} too coarse for n_pw={n_pw}; need at least "
            f"{(2 * npx, 2 * npy)} samples"
        )
    if np.any(np.asarray(k) < 0) or np.any(np.asarray(k) > 1):
        raise ConfigError("Bloch wavevectors must lie in [0, 1] (pi/a units)")
    eta = _eta_table(eps)

    mx = _plane_wave_indices(npx)
    my = _plane_wave_indices(npy)
    MX, MY = np.meshgrid(mx, my, indexing="ij")
    MX, MY = MX.ravel(), MY.ravel()
    gx = MX * (2.0 * np.pi / a)
    gy = MY * (2.0 * np.pi / W)
    dix = (MX[:, None] - MX[None, :]) % eps.shape[0]
    diy = (MY[:, None] - MY[None, :]) % eps.shape[1]
    eta_ij = eta[dix, diy]
    del dix, diy

    ks = np.atleast_1d(np.asarray(k, dtype=float))
    freqs = np.empty((len(ks), n_bands))
    vecs = []
    for ik, kf in enumerate(ks):
        kx = kf * np.pi / a
        kgx = kx + gx
        dot = kgx[:, None] * kgx[None, :] + gy[:, None] * gy[None, :]
        H = dot * eta_ij
        if return_vectors:
            vals, v = scipy.linalg.eigh(
                H, subset_by_index=(0, n_bands - 1), driver="evr",
                overwrite_a=True, check_finite=False)
            vecs.append(v)
        else:
            vals = scipy.linalg.eigh(
                H, subset_by_index=(0, n_bands - 1), driver="evr",
                overwrite_a=True, check_finite=False, eigvals_only=True)
        # eigenvalues are (w/c)^2 = (2 pi / lambda)^2
        freqs[ik] = np.sqrt(np.clip(vals, 0.0, None)) * a / (2.0 * np.pi)
    if return_vectors:
        return freqs, vecs, (MX, MY)
    return freqs


def _y_parity_even(v: np.ndarray, MX: np.ndarray, MY: np.ndarray) -> bool:
    """True when an eigenvector is even under y -> -y.

    Compares the vector with itself under the (mx, my) -> (mx, -my)
    index permutation, restricted to indices whose partner exists.
    """
    order = {(int(p), int(q)): i for i, (p, q) in enumerate(zip(MX, MY))}
    idx, pidx = [], []
    for i, (p, q) in enumerate(zip(MX, MY)):
        j = order.get((int(p), int(-q)))
        if j is not None:
            idx.append(i)
            pidx.append(j)
    vv, pv = v[idx], v[pidx]
    even = np.linalg.norm(pv - vv)
    odd = np.linalg.norm(pv + vv)
    return even < odd


def light_line(k, n_background: float) -> np.ndarray:
    """Background light line in a/lambda units at Bloch wavevector k (pi/a)."""
    return np.asarray(k, dtype=float) / (2.0 * n_background)


def mirror_strength(nu1: float, nu2: float, nu_res: float) -> float:
    """Mirror strength of a band gap at a target frequency.

    gamma = sqrt(((nu2 - nu1) / (nu2 + nu1))^2 - ((nu_res - nu_mid) / nu_mid)^2)

    Zero at the band edges, maximal at midgap, NaN outside the gap.
    """
    if nu2 <= nu1:
        raise ConfigError(f"band edges must satisfy nu2 > nu1, got {(nu1, nu2)}")
    if nu1 <= 0:
        raise ConfigError(f"band edges must be positive, got {(nu1, nu2)}")
    if not nu1 <= nu_res <= nu2:
        return float("nan")
    mid = 0.5 * (nu1 + nu2)
    val = ((nu2 - nu1) / (nu2 + nu1)) ** 2 - ((nu_res - mid) / mid) ** 2
    # roundoff at the exact edges can push val to -1e-18
    return float(np.sqrt(max(val, 0.0)))


def _cell_raster(a, r, w, stack, n_beam, substrate_weight, n_pw, resolution,
                 supercell_factor):
    nx = max(int(resolution), 2 * n_pw[0])
    eps, (aa, W) = unit_cell_raster(
        a, r, w, stack, nx=nx, supercell_width=supercell_factor * w,
        n_beam=n_beam, substrate_weight=substrate_weight)
    if eps.shape[1] < 2 * n_pw[1]:
        raise ConfigError(
            f"supercell raster has {eps.shape[1]} y samples, need "
            f">= {2 * n_pw[1]}; increase resolution"
        )
    return eps, (aa, W)


def band_structure(a: float, r: float, w: float, stack: MaterialStack,
                   n_k: int = 16, n_bands: int = 8,
                   n_pw: tuple[int, int] = (32, 32), resolution: int = 128,
                   supercell_factor: float = 4.0, n_beam: float | None = None,
                   substrate_weight: float = 0.5) -> BandStructure:
    """Band diagram of one mirror period from Gamma to the zone edge."""
    eps, (aa, W) = _cell_raster(a, r, w, stack, n_beam, substrate_weight,
                                n_pw, resolution, supercell_factor)
    k = np.linspace(0.0, 1.0, n_k)
    freqs = bloch_bands(eps, (aa, W), k, n_bands=n_bands, n_pw=n_pw)
    return BandStructure(k=k, freqs=freqs, a=a, supercell=W,
                         n_background=background_index(stack, substrate_weight))


def band_edges(a: float, r: float, w: float, stack: MaterialStack,
               n_pw: tuple[int, int] = (32, 32), resolution: int = 128,
               supercell_factor: float = 4.0, n_beam: float | None = None,
               substrate_weight: float = 0.5,
               n_search: int = 10) -> tuple[float, float]:
    """Zone-edge frequencies (nu1, nu2) of the fundamental TE gap.

    Takes the two lowest zone-edge bands that are even in y (the
    fundamental lateral family) and guided, i.e. below the background
    light line.  Raises NumericalError if fewer than two such bands
    exist among the n_search lowest.
    """
    eps, (aa, W) = _cell_raster(a, r, w, stack, n_beam, substrate_weight,
                                n_pw, resolution, supercell_factor)
    freqs, vecs, (MX, MY) = bloch_bands(eps, (aa, W), [1.0],
                                        n_bands=n_search, n_pw=n_pw,
                                        return_vectors=True)
    n_bg = background_index(stack, substrate_weight)
    cut = float(light_line(1.0, n_bg))
    picked = []
    for b in range(n_search):
        if freqs[0, b] >= cut:
            break
        if _y_parity_even(vecs[0][:, b], MX, MY):
            picked.append(float(freqs[0, b]))
        if len(picked) == 2:
            return picked[0], picked[1]
    raise NumericalError(
        f"found {len(picked)} guided even bands below the light line "
        f"({cut:.4g}) at the zone edge; cell (a={a}, r={r}, w={w}) has no "
        "usable gap"
    )


def optimize_mirror(stack: MaterialStack, w: float, lambda_target: float,
                    a_values, r_values, n_pw: tuple[int, int] = (24, 24),
                    resolution: int = 96, supercell_factor: float = 3.0,
                    n_beam: float | None = None,
                    substrate_weight: float = 0.5) -> MirrorScan:
    """Scan mirror periods over (a, r) and rank by mirror strength.

    Cells whose gap misses lambda_target get gamma = NaN and never win.
    Cells without a usable gap (e.g. hole too large to converge) are
    recorded with NaN edges.
    """
    if lambda_target <= 0:
        raise ConfigError(f"lambda_target must be positive, got {lambda_target}")
    cells = []
    for a in np.atleast_1d(np.asarray(a_values, dtype=float)):
        for r in np.atleast_1d(np.asarray(r_values, dtype=float)):
            try:
                nu1, nu2 = band_edges(
                    a, r, w, stack, n_pw=n_pw, resolution=resolution,
                    supercell_factor=supercell_factor, n_beam=n_beam,
                    substrate_weight=substrate_weight)
            except (NumericalError, ConfigError):
                cells.append(MirrorCell(a=float(a), r=float(r), w=w,
                                        nu1=float("nan"), nu2=float("nan"),
                                        gamma=float("nan"),
                                        lambda_mid=float("nan")))
                continue
            nu_t = a / lambda_target
            g = mirror_strength(nu1, nu2, nu_t)
            cells.append(MirrorCell(a=float(a), r=float(r), w=w,
                                    nu1=nu1, nu2=nu2, gamma=g,
                                    lambda_mid=2.0 * a / (nu1 + nu2)))
    return MirrorScan(cells=cells)
