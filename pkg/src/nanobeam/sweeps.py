"""Parameter-study orchestration: defect, taper and mirror sweeps.

Each sweep point is an independent deterministic job (geometry raster,
ringdown, harmonic inversion, dominant-mode pick), so points can run in
a process pool; results are collected in grid order and are identical
for any worker count.  A sweep can checkpoint each finished point to
disk and resume later from its manifest.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .bands import band_edges
from .errors import ConfigError, IOFailure, NumericalError
from .fdtd import courant_dt, run_ringdown
from .geometry import CavityDesign, MaterialStack, rasterize
from .numerics import levenberg_marquardt
from .resonance import (LeakageWarning, ResonanceResult, harmonic_inversion,
                        mode_volume)
from .slab import slab_neff

__all__ = [
    "SimSettings", "SweepPoint", "SweepResult", "FixedTotal", "FixedMirror",
    "LossDecomposition", "ComparisonRow", "ComparisonReport",
    "characterize", "simulate_ringdown", "sweep_defect_length",
    "sweep_taper_holes",
    "sweep_mirror_holes", "fit_loss_decomposition", "compare_designs",
]

_SATURATION_REL = 0.02      # successive relative Q change defining a plateau
_MIN_PLATEAU_STEPS = 2      # need >= 2 sub-threshold steps (3 points)
_TIE_REL = 0.02             # amplitudes this close count as a tie


@dataclass(frozen=True)
class SimSettings:
    """Numerical knobs shared by all sweep-driven FDTD runs.

    resolution is grid cells per mirror period a0; margins and
    lambda_target are nm.  record_cycles bounds the largest Q the
    matrix pencil can resolve on a clean trace (roughly Q ~ a few 10^4
    at 220 cycles).  Band-solver settings control the gap window used
    both to shape the source and to filter in-gap modes.
    """

    lambda_target: float = 637.0
    resolution: int = 20
    margin_x: float = 600.0
    margin_y: float = 500.0
    pml_cells: int = 10
    substrate_weight: float = 0.5
    bandwidth: float = 0.15
    flush_cycles: int = 30
    record_cycles: int = 220
    snapshot_cycles: int = 80
    max_modes: int = 8
    band_n_pw: tuple[int, int] = (24, 24)
    band_resolution: int = 96
    band_supercell: float = 3.0
    workers: int = 1

    def validate(self) -> None:
        if self.resolution < 8:
            raise ConfigError(
                f"resolution = {self.resolution} cells per period is below "
                "the minimum of 8"
            )
        if not 0.0 <= self.substrate_weight <= 1.0:
            raise ConfigError(
                f"substrate_weight must lie in [0, 1], got "
                f"{self.substrate_weight}"
            )
        for name in ("lambda_target", "margin_x", "margin_y", "bandwidth"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("pml_cells", "flush_cycles", "record_cycles",
                     "snapshot_cycles", "max_modes", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


@dataclass(frozen=True)
class SweepPoint:
    value: float
    result: ResonanceResult | None    # None = no in-gap resonance found
    note: str | None = None
    extra: dict | None = None         # e.g. chosen l_h, resolved N_mir


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    unit: str
    points: tuple[SweepPoint, ...]
    design: CavityDesign
    q_sat: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        vals = [p.value for p in self.points]
        if sorted(vals) != vals:
            raise ConfigError("sweep points must be sorted by value")

    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points], dtype=float)

    def q_values(self) -> np.ndarray:
        return np.array([p.result.Q if p.result else np.nan
                         for p in self.points])

    def lambda_values(self) -> np.ndarray:
        return np.array([p.result.lambda_res if p.result else np.nan
                         for p in self.points])

    def normalized_q(self) -> np.ndarray:
        """Q / Q_sat per point; requires a detected plateau."""
        if self.q_sat is None:
            raise NumericalError(
                "no saturation plateau detected; Q/Q_sat undefined"
            )
        return self.q_values() / self.q_sat

    def best(self) -> SweepPoint:
        present = [p for p in self.points if p.result is not None]
        if not present:
            raise NumericalError(
                f"sweep over {self.parameter} found no in-gap resonance at "
                "any point"
            )
        return max(present, key=lambda p: p.result.Q)


class FixedTotal(NamedTuple):
    """Vary N_tap at fixed holes per side: N_mir = n_total - N_tap."""
    n_total: int


class FixedMirror(NamedTuple):
    """Vary N_tap with the mirror count pinned (saturated convention)."""
    n_mirror: int


# ---------------------------------------------------------------------------
# per-point pipeline

@dataclass(frozen=True)
class _Context:
    """Derived per-sweep constants: gap window, source, step counts."""

    f_lo: float
    f_hi: float
    f0: float
    bandwidth: float
    n_beam: float
    dx: float
    settle_steps: int
    record_steps: int
    snapshot_steps: int
    decimate: int
    lambda_target: float


def _make_context(design: CavityDesign, stack: MaterialStack,
                  settings: SimSettings) -> _Context:
    settings.validate()
    n_beam = slab_neff(stack, settings.lambda_target)
    nu1, nu2 = band_edges(design.a0, design.r0, design.w0, stack,
                          n_pw=settings.band_n_pw,
                          resolution=settings.band_resolution,
                          supercell_factor=settings.band_supercell,
                          n_beam=n_beam,
                          substrate_weight=settings.substrate_weight)
    f_lo, f_hi = nu1 / design.a0, nu2 / design.a0
    f0 = 0.5 * (f_lo + f_hi)
    # source covers the whole gap even when it is wider than the default
    bw = max(settings.bandwidth, 1.5 * (f_hi - f_lo) / f0)
    dx = design.a0 / settings.resolution
    dt = courant_dt(dx)
    cycle = 1.0 / (f0 * dt)
    tau = 1.0 / (math.pi * f0 * bw)
    settle = (int(np.ceil(13.0 * tau / dt)) + 2
              + int(np.ceil(settings.flush_cycles * cycle)))
    record = int(np.ceil(settings.record_cycles * cycle))
    snap = min(record, int(np.ceil(settings.snapshot_cycles * cycle)))
    decimate = max(1, int(0.35 / (f_hi * dt)))
    return _Context(f_lo=f_lo, f_hi=f_hi, f0=f0, bandwidth=bw,
                    n_beam=n_beam, dx=dx, settle_steps=settle,
                    record_steps=record, snapshot_steps=snap,
                    decimate=decimate,
                    lambda_target=settings.lambda_target)


def _probe_layout(design: CavityDesign):
    # source on the center lines so the even-even family dominates; the
    # half-cell raster offset leaks enough into odd modes to detect them
    a, w = design.an, design.wn
    source = (0.0, 0.0)
    probes = [(0.35 * a, 0.0), (1.30 * a, 0.15 * w), (-0.80 * a, -0.10 * w)]
    return source, probes


def _pick_dominant(cands: list[ResonanceResult], ctx: _Context):
    in_gap = [c for c in cands if ctx.f_lo < c.frequency < ctx.f_hi]
    if not in_gap:
        return None
    amax = max(c.amplitude for c in in_gap)
    top = [c for c in in_gap if c.amplitude >= (1.0 - _TIE_REL) * amax]
    return min(top, key=lambda c: abs(c.lambda_res - ctx.lambda_target))


@dataclass(frozen=True)
class _PointJob:
    design: CavityDesign
    stack: MaterialStack
    settings: SimSettings
    ctx: _Context
    want_vm: bool = False
    defect_grid: tuple[float, ...] | None = None   # triggers the nested scan


def _ringdown_point(design: CavityDesign, stack: MaterialStack,
                    settings: SimSettings, ctx: _Context,
                    snapshot_at: float | None = None):
    eps, _, _ = rasterize(design, stack, ctx.dx,
                          margin_x=settings.margin_x,
                          margin_y=settings.margin_y,
                          n_beam=ctx.n_beam,
                          substrate_weight=settings.substrate_weight)
    source, probes = _probe_layout(design)
    snap_steps = ctx.snapshot_steps if snapshot_at is not None else None
    rd = run_ringdown(eps, ctx.dx, ctx.f0, ctx.bandwidth, source, probes,
                      ctx.settle_steps, ctx.record_steps,
                      pml_thickness=settings.pml_cells,
                      snapshot_at=snapshot_at, snapshot_steps=snap_steps)
    cands: list[ResonanceResult] = []
    # widened inversion band so near-edge modes stay retrievable; the
    # strict in-gap filter happens in _pick_dominant
    band = (0.97 * ctx.f_lo, 1.03 * ctx.f_hi)
    for tr in rd.traces:
        try:
            cands.extend(harmonic_inversion(tr, band,
                                            max_modes=settings.max_modes,
                                            decimate=ctx.decimate))
        except NumericalError:
            continue          # dead probe; the others still count
    return _pick_dominant(cands, ctx), rd


def _measure_vm(design: CavityDesign, stack: MaterialStack,
                settings: SimSettings, ctx: _Context,
                res: ResonanceResult):
    """Second ringdown with a DFT at the found frequency; attaches V_m.

    Returns (result, ringdown); the record carries the mode profile
    behind the V_m number in its snapshot.
    """
    _, rd = _ringdown_point(design, stack, settings, ctx,
                            snapshot_at=res.frequency)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", LeakageWarning)
        vm = mode_volume(rd.snapshot, res.lambda_res, stack.n_core,
                         t_eff=stack.t)
    extra = tuple(str(w.message) for w in caught)
    return replace(res, V_m=vm, notes=res.notes + extra), rd


def _evaluate_point(job: _PointJob) -> SweepPoint:
    if job.defect_grid is not None:
        return _evaluate_nested(job)
    pick, _ = _ringdown_point(job.design, job.stack, job.settings, job.ctx)
    if pick is None:
        return SweepPoint(value=np.nan, result=None,
                          note="no in-gap resonance")
    if job.want_vm:
        pick, _ = _measure_vm(job.design, job.stack, job.settings, job.ctx,
                              pick)
    return SweepPoint(value=np.nan, result=pick)


def _evaluate_nested(job: _PointJob) -> SweepPoint:
    """Coarse defect scan, then refine around the winner; serial by design."""
    grid = list(job.defect_grid)
    evals: list[tuple[float, ResonanceResult | None]] = []
    for lh in grid:
        pick, _ = _ringdown_point(job.design.with_(l_h=lh), job.stack,
                                  job.settings, job.ctx)
        evals.append((lh, pick))
    present = [(lh, r) for lh, r in evals if r is not None]
    if not present:
        return SweepPoint(value=np.nan, result=None,
                          note="no in-gap resonance at any defect length")
    best_lh, best = max(present, key=lambda e: e[1].Q)
    if len(grid) > 1:
        step = min(np.diff(sorted(grid)))
        lo, hi = min(grid), max(grid)
        fine = [best_lh - 0.5 * step, best_lh + 0.5 * step]
        for lh in fine:
            if not lo <= lh <= hi:
                continue
            pick, _ = _ringdown_point(job.design.with_(l_h=lh), job.stack,
                                      job.settings, job.ctx)
            if pick is not None and pick.Q > best.Q:
                best_lh, best = lh, pick
    if job.want_vm:
        best, _ = _measure_vm(job.design.with_(l_h=best_lh), job.stack,
                              job.settings, job.ctx, best)
    return SweepPoint(value=np.nan, result=best,
                      extra={"l_h": float(best_lh)})


def simulate_ringdown(design: CavityDesign, stack: MaterialStack, *,
                      settings: SimSettings | None = None,
                      measure_vm: bool = False):
    """One fully configured ringdown: dominant mode plus the raw record.

    Runs the same pipeline a sweep point uses (band window from the
    mirror cell, pulsed ringdown, harmonic inversion, dominant-mode
    pick) and returns (result, ringdown).  With measure_vm the second
    ringdown's record is returned, so its snapshot holds the mode
    profile behind the V_m number.  Raises NumericalError when no
    in-gap mode is found.
    """
    settings = settings or SimSettings()
    settings.validate()
    ctx = _make_context(design, stack, settings)
    pick, rd = _ringdown_point(design, stack, settings, ctx)
    if pick is None:
        raise NumericalError(
            "no in-gap resonance: the band window is "
            f"[{1.0 / ctx.f_hi:.1f}, {1.0 / ctx.f_lo:.1f}] nm and no mode "
            "inside it survived the amplitude floor"
        )
    if measure_vm:
        pick, rd = _measure_vm(design, stack, settings, ctx, pick)
    return pick, rd


def characterize(design: CavityDesign, stack: MaterialStack, *,
                 settings: SimSettings | None = None,
                 measure_vm: bool = False) -> ResonanceResult:
    """Dominant in-gap resonance of one cavity; see simulate_ringdown."""
    res, _ = simulate_ringdown(design, stack, settings=settings,
                               measure_vm=measure_vm)
    return res


# ---------------------------------------------------------------------------
# checkpointing

def _point_to_dict(p: SweepPoint) -> dict:
    d = {"value": p.value, "note": p.note, "extra": p.extra,
         "result": asdict(p.result) if p.result is not None else None}
    if p.result is not None:
        d["result"]["notes"] = list(p.result.notes)
    return d


def _point_from_dict(d: dict) -> SweepPoint:
    res = None
    if d.get("result") is not None:
        rd = dict(d["result"])
        rd["notes"] = tuple(rd.get("notes", ()))
        res = ResonanceResult(**rd)
    return SweepPoint(value=d["value"], result=res, note=d.get("note"),
                      extra=d.get("extra"))


class _Checkpoint:
    """One directory per sweep: manifest.json plus one file per point.

    The manifest freezes the full configuration; resuming against a
    directory whose manifest differs is a ConfigError, never a silent
    mix of two studies.  The pipeline draws no random numbers, so a
    resumed sweep reproduces exactly what a fresh run would.
    """

    def __init__(self, directory, manifest: dict):
        self.dir = Path(directory)
        self.points = self.dir / "points"
        canon = json.dumps(manifest, sort_keys=True, default=_json_default)
        path = self.dir / "manifest.json"
        try:
            self.points.mkdir(parents=True, exist_ok=True)
            if path.exists():
                stored = path.read_text()
                if stored != canon:
                    raise ConfigError(
                        f"checkpoint manifest at {path} was written by a "
                        "different sweep configuration; use a fresh directory"
                    )
            else:
                _write_atomic(path, canon)
        except OSError as e:
            raise IOFailure(f"cannot use checkpoint directory {directory}: "
                            f"{e}") from e

    def load(self, index: int) -> SweepPoint | None:
        path = self.points / f"point_{index:04d}.json"
        if not path.exists():
            return None
        try:
            return _point_from_dict(json.loads(path.read_text()))
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise IOFailure(f"unreadable checkpoint {path}: {e}") from e

    def store(self, index: int, point: SweepPoint) -> None:
        path = self.points / f"point_{index:04d}.json"
        try:
            _write_atomic(path, json.dumps(_point_to_dict(point),
                                           default=_json_default))
        except OSError as e:
            raise IOFailure(f"cannot write checkpoint {path}: {e}") from e


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON-serializable: {type(o)}")


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _manifest(kind: str, design: CavityDesign, stack: MaterialStack,
              settings: SimSettings, grid, **extra) -> dict:
    return {
        "kind": kind,
        "design": asdict(design),
        "stack": asdict(stack),
        "settings": asdict(settings),
        "grid": [float(v) for v in grid],
        "determinism": "seed-free; identical inputs give identical points",
        **extra,
    }


def _run_jobs(jobs: list[_PointJob], values, settings: SimSettings,
              checkpoint: _Checkpoint | None) -> list[SweepPoint]:
    done: dict[int, SweepPoint] = {}
    if checkpoint is not None:
        for i in range(len(jobs)):
            p = checkpoint.load(i)
            if p is not None:
                done[i] = p
    todo = [i for i in range(len(jobs)) if i not in done]
    if settings.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            fresh = list(pool.map(_evaluate_point, [jobs[i] for i in todo]))
    else:
        fresh = [_evaluate_point(jobs[i]) for i in todo]
    for i, p in zip(todo, fresh):
        p = replace(p, value=float(values[i]))
        if checkpoint is not None:
            checkpoint.store(i, p)
        done[i] = p
    return [replace(done[i], value=float(values[i])) for i in range(len(jobs))]


# ---------------------------------------------------------------------------
# sweep drivers

def _as_grid(values, name: str) -> list[float]:
    grid = [float(v) for v in values]
    if not grid:
        raise ConfigError(f"{name} grid is empty")
    if sorted(grid) != grid or len(set(grid)) != len(grid):
        raise ConfigError(f"{name} grid must be strictly increasing")
    return grid


def _as_int_grid(values, name: str) -> list[int]:
    grid = _as_grid(values, name)
    if any(v != int(v) for v in grid):
        raise ConfigError(f"{name} grid must hold integers, got {grid}")
    return [int(v) for v in grid]


def sweep_defect_length(design: CavityDesign, stack: MaterialStack,
                        l_h_values, *, saturated: bool = False,
                        n_mirror_saturated: int | None = None,
                        settings: SimSettings | None = None,
                        checkpoint_dir=None) -> SweepResult:
    """Q(l_h) scan for a defect-length (mode-matching style) template.

    With saturated=False the mirror count keeps the template's
    N_tot = n_taper + n_mirror fixed; with saturated=True it is pinned
    to n_mirror_saturated (default: the template's own n_mirror).
    Points with no in-gap resonance are kept as gaps in the curve.
    """
    if design.l_h is None:
        raise ConfigError(
            "defect-length sweep needs a template with an explicit defect "
            "(l_h is None)"
        )
    settings = settings or SimSettings()
    grid = _as_grid(l_h_values, "l_h")
    if saturated and n_mirror_saturated is not None:
        n_mir = n_mirror_saturated
    else:
        # fixed-N_tot convention: at constant N_tap the template's own
        # mirror count is N_tot - N_tap already
        n_mir = design.n_mirror
    ctx = _make_context(design, stack, settings)
    jobs = [_PointJob(design=design.with_(l_h=v, n_mirror=n_mir),
                      stack=stack, settings=settings, ctx=ctx)
            for v in grid]
    ckpt = None
    if checkpoint_dir is not None:
        ckpt = _Checkpoint(checkpoint_dir,
                           _manifest("defect_length", design, stack,
                                     settings, grid, saturated=saturated,
                                     n_mirror=n_mir))
    points = _run_jobs(jobs, grid, settings, ckpt)
    notes = tuple(f"l_h = {p.value:g}: {p.note}"
                  for p in points if p.note)
    return SweepResult(parameter="l_h", unit="nm", points=tuple(points),
                       design=design, notes=notes)


def sweep_taper_holes(design: CavityDesign, stack: MaterialStack,
                      n_tap_values, *, mode,
                      defect_grid=None,
                      settings: SimSettings | None = None,
                      checkpoint_dir=None,
                      measure_vm: str = "none") -> SweepResult:
    """(Q, lambda_res) vs N_tap at FixedTotal or FixedMirror hole budget.

    Templates carrying a defect (l_h not None) re-optimize l_h at every
    N_tap through a coarse-plus-refine scan over defect_grid; the
    chosen length lands in the point's extra dict.  measure_vm is
    "none", "best" (one extra run at the best-Q point) or "all".
    """
    settings = settings or SimSettings()
    if measure_vm not in ("none", "best", "all"):
        raise ConfigError(f"measure_vm must be none|best|all, got "
                          f"{measure_vm!r}")
    taps = _as_int_grid(n_tap_values, "n_tap")
    grid = [float(t) for t in taps]
    if isinstance(mode, FixedTotal):
        bad = [t for t in taps if not 1 <= t <= mode.n_total]
        if bad:
            raise ConfigError(
                f"N_tap values {bad} outside 1..{mode.n_total} for "
                f"FixedTotal({mode.n_total})"
            )
        mirrors = [mode.n_total - t for t in taps]
    elif isinstance(mode, FixedMirror):
        if min(taps) < 1:
            raise ConfigError("N_tap must be >= 1")
        mirrors = [mode.n_mirror] * len(taps)
    else:
        raise ConfigError(
            f"mode must be FixedTotal or FixedMirror, got {mode!r}"
        )
    nested = design.l_h is not None and defect_grid is not None
    dgrid = tuple(_as_grid(defect_grid, "defect")) if nested else None
    ctx = _make_context(design, stack, settings)
    jobs = [_PointJob(design=design.with_(n_taper=t, n_mirror=m),
                      stack=stack, settings=settings, ctx=ctx,
                      want_vm=(measure_vm == "all"), defect_grid=dgrid)
            for t, m in zip(taps, mirrors)]
    ckpt = None
    if checkpoint_dir is not None:
        mode_tag = {"mode": type(mode).__name__, "count": int(mode[0]),
                    "defect_grid": list(dgrid) if dgrid else None,
                    "measure_vm": measure_vm}
        ckpt = _Checkpoint(checkpoint_dir,
                           _manifest("taper_holes", design, stack, settings,
                                     grid, **mode_tag))
    points = _run_jobs(jobs, grid, settings, ckpt)
    points = [replace(p, extra={**(p.extra or {}), "n_mirror": m})
              for p, m in zip(points, mirrors)]
    sweep = SweepResult(parameter="n_taper", unit="holes per side",
                        points=tuple(points), design=design,
                        notes=tuple(f"N_tap = {p.value:g}: {p.note}"
                                    for p in points if p.note))
    if measure_vm == "best":
        sweep = _attach_best_vm(sweep, stack, settings, ctx, ckpt)
    return sweep


def _attach_best_vm(sweep: SweepResult, stack: MaterialStack,
                    settings: SimSettings, ctx: _Context,
                    ckpt: _Checkpoint | None) -> SweepResult:
    best = sweep.best()
    i = [p.value for p in sweep.points].index(best.value)
    if best.result.V_m is not None:
        return sweep
    cached = ckpt.load(10000 + i) if ckpt is not None else None
    if cached is not None:
        new = cached
    else:
        d = sweep.design.with_(n_taper=int(best.value),
                               n_mirror=int(best.extra["n_mirror"]))
        if best.extra and "l_h" in best.extra:
            d = d.with_(l_h=best.extra["l_h"])
        res, _ = _measure_vm(d, stack, settings, ctx, best.result)
        new = replace(best, result=res)
        if ckpt is not None:
            ckpt.store(10000 + i, new)
    pts = list(sweep.points)
    pts[i] = new
    return replace(sweep, points=tuple(pts))


def sweep_mirror_holes(design: CavityDesign, stack: MaterialStack,
                       n_mir_values, *,
                       settings: SimSettings | None = None,
                       checkpoint_dir=None) -> SweepResult:
    """Q(N_mir) at fixed N_tap, with plateau detection.

    Q_sat is the mean over the trailing plateau where every successive
    relative change stays below 2%; at least two sub-threshold steps
    (three points) are required, otherwise Q_sat is None and the sweep
    is flagged unsaturated.
    """
    settings = settings or SimSettings()
    mirrors = _as_int_grid(n_mir_values, "n_mirror")
    grid = [float(m) for m in mirrors]
    if min(mirrors) < 0:
        raise ConfigError("N_mir must be >= 0")
    ctx = _make_context(design, stack, settings)
    jobs = [_PointJob(design=design.with_(n_mirror=m), stack=stack,
                      settings=settings, ctx=ctx)
            for m in mirrors]
    ckpt = None
    if checkpoint_dir is not None:
        ckpt = _Checkpoint(checkpoint_dir,
                           _manifest("mirror_holes", design, stack,
                                     settings, grid))
    points = _run_jobs(jobs, grid, settings, ckpt)
    qs = [(p.value, p.result.Q) for p in points if p.result is not None]
    q_sat, sat_note = _plateau(qs)
    notes = [f"N_mir = {p.value:g}: {p.note}" for p in points if p.note]
    if sat_note:
        notes.append(sat_note)
    return SweepResult(parameter="n_mirror", unit="holes per side",
                       points=tuple(points), design=design, q_sat=q_sat,
                       notes=tuple(notes))


def _plateau(series: list[tuple[float, float]]):
    if len(series) < _MIN_PLATEAU_STEPS + 1:
        return None, "too few resolved points for saturation detection"
    q = [s[1] for s in series]
    run = 0
    for i in range(len(q) - 1, 0, -1):
        if abs(q[i] - q[i - 1]) / q[i - 1] < _SATURATION_REL:
            run += 1
        else:
            break
    if run < _MIN_PLATEAU_STEPS:
        return None, (f"no plateau: only {run} trailing steps change by "
                      f"< {_SATURATION_REL:.0%}")
    return float(np.mean(q[len(q) - 1 - run:])), None


# ---------------------------------------------------------------------------
# loss decomposition

@dataclass(frozen=True)
class LossDecomposition:
    """Two-channel loss split: 1/Q(N) = 1/Q_sc + 1/(Q0 exp(beta N))."""

    q_sc: float
    q0: float
    beta: float
    fit_residual: float
    inv_q_sc: float
    sigma_inv_q_sc: float
    q_sc_is_lower_bound: bool = False
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.q_sc > 0 and self.q0 > 0 and self.beta > 0):
            raise NumericalError(
                f"loss fit left the physical region: Q_sc = {self.q_sc:g}, "
                f"Q0 = {self.q0:g}, beta = {self.beta:g}"
            )


def fit_loss_decomposition(sweep) -> LossDecomposition:
    """Split a Q(N) curve into scattering and transmission channels.

    Accepts a SweepResult over hole count or a plain (N, Q) pair of
    sequences.  The scattering channel enters as s^2 = 1/Q_sc so the
    pure-exponential limit (no scattering) is reachable at s = 0; its
    uncertainty comes from the LM covariance.  Residuals live in
    log(1/Q), which weights decades evenly.
    """
    if isinstance(sweep, SweepResult):
        pairs = [(p.value, p.result.Q) for p in sweep.points
                 if p.result is not None]
        n = np.array([v for v, _ in pairs])
        q = np.array([qq for _, qq in pairs])
    else:
        n, q = (np.asarray(a, dtype=float) for a in sweep)
    if len(n) != len(q):
        raise ConfigError("N and Q sequences differ in length")
    if len(n) < 4:
        raise ConfigError(
            f"loss fit needs at least 4 resolved points, got {len(n)}"
        )
    if np.any(q <= 0):
        raise ConfigError("Q values must be positive")

    # initial guess: exponential slope from the first points, scattering
    # floor from the largest observed Q
    k = max(2, len(n) // 2)
    beta0 = float(np.polyfit(n[:k], np.log(q[:k]), 1)[0])
    beta0 = max(beta0, 1e-3)
    lq0 = float(np.log(q[0]) - beta0 * n[0])
    s0 = math.sqrt(0.5 / q.max())

    def resid(p):
        s, lnq0, b = p
        inv_model = s * s + np.exp(-lnq0 - b * n)
        return np.log(inv_model * q)

    p, cov, info = levenberg_marquardt(resid, np.array([s0, lq0, beta0]))
    s, lnq0, beta = p
    inv_sc = float(s * s)
    sigma_inv = float(2.0 * abs(s) * math.sqrt(max(cov[0, 0], 0.0)))
    rms = float(np.sqrt(np.mean(resid(p) ** 2)))
    notes = []
    # unidentifiable scattering: consistent with zero, or beyond any
    # observed Q by a wide margin
    lower = inv_sc <= 2.0 * sigma_inv or inv_sc * q.max() < 0.02
    if lower:
        q_sc = math.inf
        notes.append(
            f"scattering channel consistent with zero (1/Q_sc = "
            f"{inv_sc:.3g} +- {sigma_inv:.3g}); Q_sc reported as a lower "
            f"bound > {q.max():.3g}"
        )
    else:
        q_sc = 1.0 / inv_sc
    return LossDecomposition(q_sc=q_sc, q0=float(np.exp(lnq0)),
                             beta=float(beta), fit_residual=rms,
                             inv_q_sc=inv_sc, sigma_inv_q_sc=sigma_inv,
                             q_sc_is_lower_bound=lower, notes=tuple(notes))


# ---------------------------------------------------------------------------
# design comparison

@dataclass(frozen=True)
class ComparisonRow:
    family: str
    n_taper: int
    q: float
    lambda_res: float
    v_m: float
    q_over_vm: float
    l_h: float | None = None


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    lambda_target: float
    notes: tuple[str, ...] = ()


def compare_designs(designs: Mapping[str, CavityDesign],
                    stack: MaterialStack, n_tap_values, *,
                    defect_grid=None,
                    settings: SimSettings | None = None,
                    checkpoint_dir=None
                    ) -> tuple[ComparisonReport, dict[str, SweepResult]]:
    """Best operating point per design family at a fixed hole budget.

    Runs one FixedTotal taper sweep per family (N_tot comes from each
    template's n_taper + n_mirror), measures V_m at each best-Q point,
    and tabulates (family, N_tap, Q, lambda_res, V_m, Q/V_m) in
    alphabetical family order.  Returns the report plus the raw sweeps.
    """
    if not designs:
        raise ConfigError("no design families given")
    settings = settings or SimSettings()
    rows = []
    notes = []
    sweeps: dict[str, SweepResult] = {}
    for name in sorted(designs):
        template = designs[name]
        sub = Path(checkpoint_dir) / name if checkpoint_dir else None
        sweep = sweep_taper_holes(
            template, stack, n_tap_values,
            mode=FixedTotal(template.n_taper + template.n_mirror),
            defect_grid=defect_grid if template.l_h is not None else None,
            settings=settings, checkpoint_dir=sub, measure_vm="best")
        sweeps[name] = sweep
        best = sweep.best()
        r = best.result
        if r.V_m is None:
            raise NumericalError(
                f"family {name!r}: mode volume missing at the best point"
            )
        rows.append(ComparisonRow(
            family=name, n_taper=int(best.value), q=r.Q,
            lambda_res=r.lambda_res, v_m=r.V_m, q_over_vm=r.Q / r.V_m,
            l_h=(best.extra or {}).get("l_h")))
        notes.extend(f"{name}: {n}" for n in sweep.notes)
    report = ComparisonReport(rows=tuple(rows),
                              lambda_target=settings.lambda_target,
                              notes=tuple(notes))
    return report, sweeps
