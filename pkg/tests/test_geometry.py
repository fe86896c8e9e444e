"""Geometry: hole placement, width law, validation, rasters."""

import numpy as np
import pytest

from nanobeam import ConfigError
from nanobeam.geometry import (
    CavityDesign,
    MaterialStack,
    background_index,
    beam_width_profile,
    hole_positions,
    quadratic_width,
    rasterize,
    rasterize_reference,
    unit_cell_raster,
)

from helpers import PAPER_STACK


def test_stack_validation():
    with pytest.raises(ConfigError):
        MaterialStack(n_core=2.0, t=0.0).validate()
    with pytest.raises(ConfigError):
        MaterialStack(n_core=1.2, n_substrate=1.45).validate()
    with pytest.raises(ConfigError):
        MaterialStack(n_core=2.0, n_substrate=0.9).validate()
    PAPER_STACK.validate()


def test_uniform_lattice_positions():
    # No taper values set: every hole is a mirror hole on pitch a0, so
    # side k sits at (k - 1/2) a0 = 100, 300, 500 for a0 = 200.
    d = CavityDesign(a0=200, r0=60, w0=450, n_taper=2, n_mirror=1)
    holes = hole_positions(d)
    xs = [x for x, _ in holes]
    rs = [r for _, r in holes]
    assert xs == [-500.0, -300.0, -100.0, 100.0, 300.0, 500.0]
    assert rs == [60.0] * 6
    assert d.n_holes == 6
    assert d.half_length() == 560.0


def test_tapered_positions_hand_values():
    # linear_taper over i = 1..3 gives a = 175, 190, 205 and
    # r = 46, 53, 60.  Innermost pair straddles 0 at an/2 = 87.5; each
    # following spacing is the mean of adjacent periods:
    #   x1 = 87.5
    #   x2 = 87.5 + (175 + 190)/2 = 270
    #   x3 = 270 + (190 + 205)/2 = 467.5
    #   x4 = 467.5 + 205 = 672.5   (mirror hole)
    d = CavityDesign(a0=205, r0=60, w0=461, an=175, rn=46,
                     n_taper=3, n_mirror=1)
    holes = hole_positions(d)
    pos = [(x, r) for x, r in holes if x > 0]
    assert pos == [(87.5, 46.0), (270.0, 53.0), (467.5, 60.0), (672.5, 60.0)]
    neg = [(-x, r) for x, r in reversed(holes) if x < 0]
    assert neg == pos
    assert d.half_length() == 732.5


def test_defect_length_widens_center_gap():
    d0 = CavityDesign(a0=200, r0=60, w0=450, n_taper=2, n_mirror=1)
    d1 = d0.with_(l_h=40.0)
    x0 = [x for x, _ in hole_positions(d0) if x > 0]
    x1 = [x for x, _ in hole_positions(d1) if x > 0]
    assert x1 == [x + 20.0 for x in x0]


def test_quadratic_width_law():
    # w(i) = wn + (w0 - wn) (i/n)^2 with w0 = 461, wn = 338, n = 3.
    w = quadratic_width(np.array([0, 1, 2, 3]), 3, 461.0, 338.0)
    assert np.allclose(w, [338.0, 338 + 123 / 9, 338 + 123 * 4 / 9, 461.0])


def test_beam_width_profile_interpolation():
    d = CavityDesign(a0=205, r0=60, w0=461, an=175, rn=46, wn=338,
                     n_taper=3, n_mirror=1)
    # Breakpoints at x = 0, 87.5, 270, 467.5 carry the quadratic law
    # values; beyond the outermost taper hole the width is w0.
    w = beam_width_profile(d, [0.0, 87.5, 270.0, 467.5, 1000.0, -270.0])
    expect = [338.0, 338 + 123 / 9, 338 + 123 * 4 / 9, 461.0, 461.0,
              338 + 123 * 4 / 9]
    assert np.allclose(w, expect)


def test_width_violation_cites_rule():
    d = CavityDesign(a0=205, r0=300, w0=461, n_taper=1, n_mirror=2)
    with pytest.raises(ConfigError, match="2r < w"):
        d.validate()


def test_overlap_detected():
    # 2r = 202 stays under w = 450 but adjacent holes on pitch 200
    # intersect (edge gap 200 - 2r = -2).
    d = CavityDesign(a0=200, r0=101, w0=450, n_taper=1, n_mirror=2)
    with pytest.raises(ConfigError, match="overlap"):
        d.validate()


def test_validate_rejects_nonpositive_and_bad_counts():
    with pytest.raises(ConfigError):
        CavityDesign(a0=200, r0=60, w0=450, n_taper=0).validate()
    with pytest.raises(ConfigError):
        CavityDesign(a0=200, r0=60, w0=450, n_mirror=-1).validate()
    with pytest.raises(ConfigError):
        CavityDesign(a0=200, r0=-5, w0=450).validate()
    with pytest.raises(ConfigError):
        CavityDesign(a0=200, r0=60, w0=450, l_h=-1.0).validate()


def test_background_index_mixing():
    # Permittivity-weighted: eps = 0.5 * 1.45^2 + 0.5 * 1.0 = 1.55125.
    assert background_index(PAPER_STACK, 0.5) == pytest.approx(
        np.sqrt(0.5 * 1.45**2 + 0.5), rel=1e-12)
    assert background_index(PAPER_STACK, 0.0) == 1.0
    assert background_index(PAPER_STACK, 1.0) == pytest.approx(1.45)
    with pytest.raises(ConfigError):
        background_index(PAPER_STACK, 1.5)


def test_rasterize_materials_and_symmetry():
    d = CavityDesign(a0=200, r0=60, w0=450, n_taper=2, n_mirror=2)
    eps, x, y = rasterize(d, PAPER_STACK, dx=10.0, margin_x=300.0,
                          margin_y=300.0)
    nb2 = background_index(PAPER_STACK) ** 2
    # far corner: background
    assert eps[0, 0] == pytest.approx(nb2)
    # beam center between the innermost holes: core material (n_beam
    # defaults to the raw core index)
    ic = np.argmin(np.abs(x)), np.argmin(np.abs(y))
    assert eps[ic] == pytest.approx(4.0)
    # center of the first hole: background again
    ih = np.argmin(np.abs(x - 100.0))
    assert eps[ih, ic[1]] == pytest.approx(nb2)
    # mirror symmetry in both axes (grids are centered)
    assert np.allclose(eps, eps[::-1, :], atol=1e-12)
    assert np.allclose(eps, eps[:, ::-1], atol=1e-12)
    # supersampling puts boundary cells strictly between the phases
    mask_between = (eps > nb2 + 1e-9) & (eps < 4.0 - 1e-9)
    assert mask_between.any()


def test_rasterize_reference_matches_off_hole_columns():
    d = CavityDesign(a0=200, r0=60, w0=450, n_taper=2, n_mirror=2)
    eps, x, y = rasterize(d, PAPER_STACK, dx=10.0, margin_x=300.0,
                          margin_y=300.0)
    ref, xr, yr = rasterize_reference(d, PAPER_STACK, dx=10.0,
                                      margin_x=300.0, margin_y=300.0)
    assert eps.shape == ref.shape
    assert np.array_equal(x, xr) and np.array_equal(y, yr)
    # outside the outer hole edge the two rasters agree exactly
    far = np.abs(x) > d.half_length() + 10.0
    assert np.array_equal(eps[far], ref[far])
    # at the first hole center they differ
    ih = np.argmin(np.abs(x - 100.0))
    iy = np.argmin(np.abs(y))
    assert ref[ih, iy] == pytest.approx(4.0)
    assert eps[ih, iy] < 2.0


def test_unit_cell_raster_even_symmetry():
    eps, (a, W) = unit_cell_raster(205.0, 60.0, 461.0, PAPER_STACK, nx=64)
    assert a == 205.0
    # supercell target 4 w, snapped to a whole number of square cells
    assert W == pytest.approx(4 * 461.0, abs=205.0 / 64)
    assert W / (205.0 / 64) == pytest.approx(round(W / (205.0 / 64)))
    # even under x -> -x and y -> -y about the sample origin
    assert np.allclose(eps, np.roll(eps[::-1, :], 1, axis=0), atol=1e-12)
    assert np.allclose(eps, np.roll(eps[:, ::-1], 1, axis=1), atol=1e-12)
