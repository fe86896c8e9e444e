"""Parametric nanobeam cavity geometry and permittivity rasterization.

Lengths are in nanometers throughout. The beam axis is x, the width
direction is y, and every design is mirror symmetric about x = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

__all__ = [
    "MaterialStack",
    "CavityDesign",
    "quadratic_width",
    "linear_taper",
    "hole_positions",
    "beam_width_profile",
    "background_index",
    "rasterize",
    "rasterize_reference",
    "unit_cell_raster",
]


@dataclass(frozen=True)
class MaterialStack:
    """Vertical layer stack: cladding on top of a core film on a substrate.

    Parameters
    ----------
    n_core : float
        Core film refractive index.
    n_substrate : float
        Substrate index (1.0 for a free-standing beam).
    n_cladding : float
        Top cladding index.
    t : float
        Core film thickness in nm.
    """

    n_core: float
    n_substrate: float = 1.0
    n_cladding: float = 1.0
    t: float = 200.0

    def validate(self) -> None:
        if self.t <= 0:
            raise ConfigError(f"film thickness must be positive, got t={self.t}")
        for name in ("n_core", "n_substrate", "n_cladding"):
            if getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_core <= max(self.n_substrate, self.n_cladding):
            raise ConfigError(
                "core index must exceed both substrate and cladding "
                f"({self.n_core} vs {self.n_substrate}, {self.n_cladding})"
            )


@dataclass(frozen=True)
class CavityDesign:
    """Hole-by-hole description of a tapered nanobeam cavity.

    One side of the cavity has ``n_taper`` taper holes followed by
    ``n_mirror`` mirror holes; the other side is its mirror image.
    Taper hole i (1 = innermost) interpolates linearly from the center
    values (an, rn) at i = 1 to the mirror values (a0, r0) at
    i = n_taper.  The beam width interpolates quadratically from wn at
    the cavity center to w0 at the outermost taper hole.

    l_h, when set, is the extra gap added between the two innermost
    holes (center-to-center distance an + l_h) to tune a mode-matched
    cavity; None gives the standard centered lattice.
    """

    a0: float
    r0: float
    w0: float
    an: float | None = None
    rn: float | None = None
    wn: float | None = None
    n_taper: int = 1
    n_mirror: int = 10
    l_h: float | None = None

    def __post_init__(self):
        # A pure mirror section: center values default to mirror values.
        for name, fallback in (("an", self.a0), ("rn", self.r0), ("wn", self.w0)):
            if getattr(self, name) is None:
                object.__setattr__(self, name, fallback)

    def validate(self) -> None:
        if self.n_taper < 1:
            raise ConfigError(f"n_taper must be >= 1, got {self.n_taper}")
        if self.n_mirror < 0:
            raise ConfigError(f"n_mirror must be >= 0, got {self.n_mirror}")
        for name in ("a0", "r0", "w0", "an", "rn", "wn"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.l_h is not None and self.l_h < 0:
            raise ConfigError(f"l_h must be >= 0, got {self.l_h}")
        holes = hole_positions(self)
        xs = np.array([x for x, _ in holes])
        rs = np.array([r for _, r in holes])
        # width violation first: a hole wider than its beam is the more
        # fundamental absurdity and should win the error message
        widths = beam_width_profile(self, xs)
        if np.any(2 * rs >= widths):
            k = int(np.argmax(2 * rs - widths))
            raise ConfigError(
                f"hole at x={xs[k]:.4g} (r={rs[k]:.4g}) violates 2r < w: "
                f"local beam width is {widths[k]:.4g}"
            )
        gaps = np.diff(xs) - (rs[:-1] + rs[1:])
        if np.any(gaps <= 0):
            k = int(np.argmin(gaps))
            raise ConfigError(
                f"holes {k} and {k + 1} overlap (edge gap {gaps[k]:.3g} nm)"
            )

    def with_(self, **kw) -> "CavityDesign":
        """Copy with selected fields replaced."""
        return replace(self, **kw)

    @property
    def n_holes(self) -> int:
        """Total hole count, both sides."""
        return 2 * (self.n_taper + self.n_mirror)

    def half_length(self) -> float:
        """Distance from x = 0 to the outer edge of the outermost hole."""
        x, r = hole_positions(self)[-1]
        return x + r


def quadratic_width(i: int | np.ndarray, n_taper: int, w0: float, wn: float):
    """Beam width at taper index i: wn + (w0 - wn) * (i / n_taper)**2."""
    u = np.asarray(i, dtype=float) / n_taper
    return wn + (w0 - wn) * u * u


def linear_taper(i, n_taper: int, a0: float, an: float, r0: float, rn: float):
    """Period and radius of taper hole i in 1..n_taper.

    Linear interpolation from (an, rn) at i = 1 to (a0, r0) at
    i = n_taper.  A single-hole taper (n_taper = 1) sits at the center
    values.
    """
    if n_taper == 1:
        u = np.zeros_like(np.asarray(i, dtype=float))
    else:
        u = (np.asarray(i, dtype=float) - 1.0) / (n_taper - 1.0)
    return an + (a0 - an) * u, rn + (r0 - rn) * u


def _side_periods_radii(design: CavityDesign):
    idx = np.arange(1, design.n_taper + 1)
    a_t, r_t = linear_taper(idx, design.n_taper, design.a0, design.an,
                            design.r0, design.rn)
    a = np.concatenate([a_t, np.full(design.n_mirror, design.a0)])
    r = np.concatenate([r_t, np.full(design.n_mirror, design.r0)])
    return a, r


def hole_positions(design: CavityDesign) -> list[tuple[float, float]]:
    """All hole centers and radii, sorted by x.

    Adjacent holes k and k+1 on one side are spaced by the mean of
    their cell periods (a_k + a_{k+1}) / 2, so a uniform lattice lands
    on x = (k - 1/2) a.  The innermost pair straddles x = 0 at
    +-(an + l_h)/2, with l_h = 0 for the standard lattice.
    """
    a, r = _side_periods_radii(design)
    gap = design.an + (design.l_h or 0.0)
    x = np.empty_like(a)
    x[0] = 0.5 * gap
    if len(a) > 1:
        x[1:] = x[0] + np.cumsum(0.5 * (a[:-1] + a[1:]))
    out = [(-xi, ri) for xi, ri in zip(x[::-1], r[::-1])]
    out += [(xi, ri) for xi, ri in zip(x, r)]
    return out


def beam_width_profile(design: CavityDesign, x) -> np.ndarray:
    """Local beam width w(|x|).

    Piecewise linear through the taper-law values at the hole centers
    (index 0 maps to the cavity center x = 0), constant at w0 outside
    the outermost taper hole.
    """
    a, r = _side_periods_radii(design)
    gap = design.an + (design.l_h or 0.0)
    xc = np.empty(design.n_taper + 1)
    xc[0] = 0.0
    xc[1] = 0.5 * gap
    for k in range(1, design.n_taper):
        xc[k + 1] = xc[k] + 0.5 * (a[k - 1] + a[k])
    wi = quadratic_width(np.arange(design.n_taper + 1), design.n_taper,
                         design.w0, design.wn)
    return np.interp(np.abs(np.asarray(x, dtype=float)), xc, wi,
                     right=design.w0)


def background_index(stack: MaterialStack, substrate_weight: float = 0.5) -> float:
    """Effective 2D background index around the beam.

    Permittivity-weighted mix of substrate and cladding; weight 0 is
    pure cladding, 1 pure substrate.  Free-standing stacks give 1.
    """
    if not 0.0 <= substrate_weight <= 1.0:
        raise ConfigError(f"substrate_weight must be in [0, 1], got {substrate_weight}")
    eps = (substrate_weight * stack.n_substrate**2
           + (1.0 - substrate_weight) * stack.n_cladding**2)
    return float(np.sqrt(eps))


def _raster_eps(xg, yg, dx, holes, width_fn, eps_in, eps_out, supersample):
    """Supersampled raster: average of eps over an s x s subgrid per cell.

    Builds the full supersampled occupancy grid, then box-averages back
    to the requested pitch.  Hole masks are applied inside bounding
    windows so cost stays proportional to hole area.
    """
    s = supersample
    sub = (np.arange(s) + 0.5) / s - 0.5
    xs = (xg[:, None] + sub[None, :] * dx).ravel()
    ys = (yg[:, None] + sub[None, :] * dx).ravel()
    w_half = 0.5 * width_fn(xs)
    inside = np.abs(ys)[None, :] <= w_half[:, None]
    for hx, hr in holes:
        ix = np.nonzero(np.abs(xs - hx) <= hr)[0]
        iy = np.nonzero(np.abs(ys) <= hr)[0]
        if len(ix) == 0 or len(iy) == 0:
            continue
        sl = np.s_[ix[0]:ix[-1] + 1, iy[0]:iy[-1] + 1]
        dx2 = (xs[ix[0]:ix[-1] + 1] - hx) ** 2
        dy2 = ys[iy[0]:iy[-1] + 1] ** 2
        inside[sl] &= dx2[:, None] + dy2[None, :] > hr * hr
    occ = np.where(inside, eps_in, eps_out)
    nx, ny = len(xg), len(yg)
    return occ.reshape(nx, s, ny, s).mean(axis=(1, 3))


def rasterize(design: CavityDesign, stack: MaterialStack, dx: float,
              margin_x: float = 600.0, margin_y: float = 500.0,
              n_beam: float | None = None,
              substrate_weight: float = 0.5,
              supersample: int = 8):
    """Permittivity grid for a full cavity.

    Parameters
    ----------
    design, stack
        Cavity geometry and layer stack.
    dx : float
        Grid pitch in nm (square cells).
    margin_x, margin_y : float
        Background padding beyond the structure on each side.  Any
        absorbing boundary layers live inside these margins.
    n_beam : float, optional
        In-plane index used for the beam material.  Pass the slab
        effective index for a 2D collapse of the 3D film; defaults to
        the raw core index.
    substrate_weight : float
        Mixing weight for the out-of-plane background, see
        :func:`background_index`.
    supersample : int
        Subpixel sampling factor per axis for boundary smoothing.

    Returns
    -------
    eps : ndarray, shape (nx, ny)
        Relative permittivity, x along axis 0.
    x, y : ndarray
        Cell-center coordinates in nm.
    """
    return _full_raster(design, stack, dx, margin_x, margin_y, n_beam,
                        substrate_weight, supersample,
                        hole_positions(design))


def rasterize_reference(design: CavityDesign, stack: MaterialStack,
                        dx: float, margin_x: float = 600.0,
                        margin_y: float = 500.0,
                        n_beam: float | None = None,
                        substrate_weight: float = 0.5,
                        supersample: int = 8):
    """Grid-matched unpatterned beam: rasterize with every hole filled.

    Same extents and width profile as :func:`rasterize` on the same
    arguments, so it serves as the normalization reference for
    transmission runs.
    """
    return _full_raster(design, stack, dx, margin_x, margin_y, n_beam,
                        substrate_weight, supersample, [])


def _full_raster(design, stack, dx, margin_x, margin_y, n_beam,
                 substrate_weight, supersample, holes):
    design.validate()
    stack.validate()
    if dx <= 0:
        raise ConfigError(f"dx must be positive, got {dx}")
    if supersample < 1:
        raise ConfigError(f"supersample must be >= 1, got {supersample}")
    nb = stack.n_core if n_beam is None else n_beam
    n_bg = background_index(stack, substrate_weight)

    half_x = design.half_length() + margin_x
    half_y = 0.5 * max(design.w0, design.wn) + margin_y
    # symmetric grid: even cell count, centers at +-dx/2
    nx = 2 * int(np.ceil(half_x / dx))
    ny = 2 * int(np.ceil(half_y / dx))
    x = (np.arange(nx) - (nx - 1) / 2.0) * dx
    y = (np.arange(ny) - (ny - 1) / 2.0) * dx

    eps = _raster_eps(x, y, dx, holes, lambda xs: beam_width_profile(design, xs),
                      nb * nb, n_bg * n_bg, supersample)
    # enforce the design's mirror symmetries exactly
    eps = 0.5 * (eps + eps[::-1, :])
    eps = 0.5 * (eps + eps[:, ::-1])
    return eps, x, y


def unit_cell_raster(a: float, r: float, w: float, stack: MaterialStack,
                     nx: int = 128, supercell_width: float | None = None,
                     n_beam: float | None = None,
                     substrate_weight: float = 0.5,
                     supersample: int = 8):
    """Permittivity raster of one mirror period for the band solver.

    The cell spans x in [0, a) with the hole centered at x = 0 (split
    across the periodic wrap) and y in a supercell of width
    ``supercell_width`` (default 4 w).  The raster is even under both
    x -> -x and y -> -y about the sample origin, which the band solver
    exploits.

    Returns
    -------
    eps : ndarray, shape (nx, ny)
    widths : tuple (a, W)
        Physical extents of the raster.
    """
    stack.validate()
    if min(a, r, w) <= 0:
        raise ConfigError(f"a, r, w must be positive, got {(a, r, w)}")
    if 2 * r >= min(a, w):
        raise ConfigError(f"hole (r={r}) does not fit in cell (a={a}, w={w})")
    W = 4.0 * w if supercell_width is None else supercell_width
    if W < 3.0 * w:
        raise ConfigError(f"supercell width {W} too small for beam width {w}")
    nb = stack.n_core if n_beam is None else n_beam
    n_bg = background_index(stack, substrate_weight)

    dx = a / nx
    ny = int(np.ceil(W / dx / 2)) * 2
    W = ny * dx  # snap to the grid so cells stay square
    # sample positions chosen so index j maps to -index (mod n) under reflection
    xg = np.arange(nx) * dx
    yg = np.arange(ny) * dx
    xg = np.where(xg > a / 2, xg - a, xg)
    yg = np.where(yg > W / 2, yg - W, yg)

    eps = _raster_eps(xg, yg, dx, [(0.0, r)], lambda xs: np.full_like(xs, w),
                      nb * nb, n_bg * n_bg, supersample)
    # exact even symmetry in both axes (indices 0 and n/2 map to themselves)
    eps = 0.5 * (eps + eps[(-np.arange(nx)) % nx, :])
    eps = 0.5 * (eps + eps[:, (-np.arange(ny)) % ny])
    return eps, (a, W)
