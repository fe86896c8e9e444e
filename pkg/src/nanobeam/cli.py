"""Command-line front end.

One config document (or packaged preset) drives a study; flags beat
config keys beat built-in defaults.  Exit codes: 0 success, 2
configuration error, 3 numerical failure, 4 IO failure.

Figures: passing --plot renders a PNG next to the delimited output
(same stem), or at an explicit path given as --plot FILE.png.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bands import band_edges, band_structure, optimize_mirror
from .config import ProjectConfig, load_config, load_preset
from .errors import ConfigError, NanobeamError
from .fdtd import run_transmission
from .geometry import MaterialStack, rasterize, rasterize_reference
from .io import (export_geometry, export_results, import_spectrum,
                 import_trace, record_hash, render_results)
from .resonance import (LorentzianModel, harmonic_inversion, lorentzian_fit,
                        purcell_factor)
from .slab import slab_neff
from .sweeps import SimSettings, compare_designs, simulate_ringdown

ENV_WORKERS = "NANOBEAM_WORKERS"


# ---------------------------------------------------------------------------
# small flag parsers


def _parse_range(text: str, name: str):
    """'lo:hi:n' -> linspace, 'lo:hi' -> (lo, hi), 'v' -> [v]."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) == 2:
            return float(parts[0]), float(parts[1])
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise ValueError
            return np.linspace(lo, hi, n)
    except ValueError:
        pass
    raise ConfigError(
        f"--{name} expects 'lo:hi:n', 'lo:hi' or a single value, "
        f"got {text!r}"
    )


def _parse_window(text: str, name: str) -> tuple[float, float]:
    v = _parse_range(text, name)
    if isinstance(v, tuple):
        lo, hi = v
    elif len(v) == 2:
        lo, hi = float(v[0]), float(v[1])
    else:
        raise ConfigError(f"--{name} expects 'lo:hi', got {text!r}")
    if not lo < hi:
        raise ConfigError(f"--{name}: need lo < hi, got {text!r}")
    return lo, hi


def _parse_list(text: str, name: str, integer: bool = False):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok) if integer else float(tok))
        except ValueError:
            raise ConfigError(
                f"--{name}: {tok!r} is not a number"
            ) from None
    if not out:
        raise ConfigError(f"--{name}: empty list")
    return out


# ---------------------------------------------------------------------------
# config / settings plumbing


def _load(args) -> ProjectConfig | None:
    if getattr(args, "config", None):
        return load_config(args.config)
    if getattr(args, "preset", None):
        return load_preset(args.preset)
    return None


def _need_config(args) -> ProjectConfig:
    cfg = _load(args)
    if cfg is None:
        raise ConfigError(
            "this subcommand needs a study file: pass --config PATH or "
            "--preset paper|desk"
        )
    return cfg


def _stack_from(args, cfg: ProjectConfig | None) -> MaterialStack:
    if getattr(args, "n_core", None) is not None:
        stack = MaterialStack(
            n_core=args.n_core,
            n_substrate=args.n_substrate,
            n_cladding=args.n_cladding,
            t=args.thickness)
        stack.validate()
        return stack
    if cfg is not None:
        return cfg.stack
    raise ConfigError("no material stack: pass --config/--preset or "
                      "--n-core [--n-substrate --n-cladding --thickness]")


def _workers(args, settings: SimSettings) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get(ENV_WORKERS)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(
                f"{ENV_WORKERS} must be an integer, got {env!r}"
            ) from None
    return settings.workers


def _settings(args, cfg: ProjectConfig | None) -> SimSettings:
    s = cfg.simulation if cfg is not None else SimSettings(
        lambda_target=getattr(args, "wavelength", None) or 637.0)
    over = {}
    if getattr(args, "resolution", None) is not None:
        over["resolution"] = args.resolution
    over["workers"] = _workers(args, s)
    s = replace(s, **over)
    s.validate()
    return s


def _emit(args, record, default_format: str = "csv", extra_meta=None,
          plot_fn=None) -> None:
    """Shared output tail: stdout or --out file, optional figure."""
    fmt = getattr(args, "format", None)
    out = getattr(args, "out", None)
    if out:
        path = export_results(record, out, format=fmt,
                              extra_meta=extra_meta)
        print(f"wrote {path}")
    else:
        print(render_results(record, fmt or default_format,
                             extra_meta=extra_meta), end="")
    plot = getattr(args, "plot", None)
    if plot is not None:
        if plot_fn is None:
            raise ConfigError("this subcommand has no figure to render")
        if plot == "auto":
            if not out:
                raise ConfigError(
                    "--plot without a file name needs --out to derive one"
                )
            plot = str(Path(out).with_suffix(".png"))
        p = plot_fn(plot)
        print(f"wrote {p}")


def _geometry_meta(design, stack) -> dict:
    import hashlib
    import json
    from dataclasses import asdict
    doc = json.dumps({"design": asdict(design), "stack": asdict(stack)},
                     sort_keys=True)
    return {"geometry": hashlib.sha256(doc.encode()).hexdigest()[:16]}


# ---------------------------------------------------------------------------
# subcommands


def _cmd_neff(args) -> int:
    cfg = _load(args)
    stack = _stack_from(args, cfg)
    lam = args.wavelength or (cfg.lambda_target if cfg else None)
    if lam is None:
        raise ConfigError("pass --wavelength or a config with lambda_target")
    n = slab_neff(stack, lam, mode_index=args.mode_index,
                  polarization=args.polarization)
    print("%.9g" % n)
    return 0


def _design_or_cell(args, cfg):
    """(a, r, w) for cell-level commands: --design wins over -a/-r/-w."""
    if args.design:
        d = _need_config(args).design(args.design)
        return d.a0, d.r0, d.w0
    if args.a is None or args.r is None or args.w is None:
        raise ConfigError("pass --design NAME or all of -a, -r, -w")
    return args.a, args.r, args.w


def _cmd_bands(args) -> int:
    cfg = _load(args)
    stack = _stack_from(args, cfg)
    s = _settings(args, cfg)
    a, r, w = _design_or_cell(args, cfg)
    n_beam = None
    if not args.no_collapse:
        n_beam = slab_neff(stack, s.lambda_target)
    bs = band_structure(a, r, w, stack, n_k=args.n_k,
                        n_pw=s.band_n_pw, resolution=s.band_resolution,
                        supercell_factor=s.band_supercell, n_beam=n_beam,
                        substrate_weight=s.substrate_weight)
    nu1, nu2 = band_edges(a, r, w, stack, n_pw=s.band_n_pw,
                          resolution=s.band_resolution,
                          supercell_factor=s.band_supercell, n_beam=n_beam,
                          substrate_weight=s.substrate_weight)
    meta = {"gap_nu1": "%.9g" % nu1, "gap_nu2": "%.9g" % nu2,
            "gap_lambda_nm": "%.9g:%.9g" % (a / nu2, a / nu1)}

    def plot(path):
        from . import plots
        return plots.plot_bands(bs, path, gap=(nu1, nu2))

    _emit(args, bs, extra_meta=meta, plot_fn=plot)
    return 0


def _cmd_mirror(args) -> int:
    cfg = _load(args)
    stack = _stack_from(args, cfg)
    s = _settings(args, cfg)
    lam = args.wavelength or (cfg.lambda_target if cfg else 637.0)
    if args.design:
        d = _need_config(args).design(args.design)
        w = d.w0
    elif args.w is not None:
        w = args.w
    else:
        raise ConfigError("pass --design NAME or -w WIDTH")
    a_values = np.atleast_1d(_parse_range(args.a_scan, "a-scan"))
    r_values = np.atleast_1d(_parse_range(args.r_scan, "r-scan"))
    n_beam = None if args.no_collapse else slab_neff(stack, lam)
    scan = optimize_mirror(stack, w, lam, a_values, r_values,
                           n_pw=s.band_n_pw, resolution=s.band_resolution,
                           supercell_factor=s.band_supercell, n_beam=n_beam,
                           substrate_weight=s.substrate_weight)
    _emit(args, scan, default_format="text")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _need_config(args)
    design = cfg.design(args.design)
    s = _settings(args, cfg)
    if args.steps is not None:
        # recorded steps -> whole cycles of the target wavelength
        from .fdtd import courant_dt
        dt = courant_dt(design.a0 / s.resolution)
        cycles = max(1, int(round(args.steps * dt / s.lambda_target)))
        s = replace(s, record_cycles=cycles)
    if args.band is not None:
        lo, hi = _parse_window(args.band, "band")
        f1, f2 = 1.0 / hi, 1.0 / lo
        s = replace(s, bandwidth=2.0 * (f2 - f1) / (f2 + f1))
    res, rd = simulate_ringdown(design, cfg.stack, settings=s,
                                measure_vm=args.vm)
    meta = _geometry_meta(design, cfg.stack)
    if args.trace:
        tr = rd.traces[0]
        tmeta = dict(meta)
        tmeta["resolution"] = str(s.resolution)
        export_results(tr, args.trace, format="csv", extra_meta=tmeta)
        print(f"wrote {args.trace}")

    def plot(path):
        from . import plots
        if args.vm and rd.snapshot is not None:
            return plots.plot_snapshot(rd.snapshot, path)
        return plots.plot_trace(rd.traces[0], path)

    _emit(args, res, default_format="text", extra_meta=meta, plot_fn=plot)
    return 0


def _cmd_modevolume(args) -> int:
    cfg = _need_config(args)
    design = cfg.design(args.design)
    s = _settings(args, cfg)
    res, rd = simulate_ringdown(design, cfg.stack, settings=s,
                                measure_vm=True)
    meta = _geometry_meta(design, cfg.stack)
    meta["purcell"] = "%.9g" % purcell_factor(res.Q, res.V_m)

    def plot(path):
        from . import plots
        return plots.plot_snapshot(rd.snapshot, path)

    _emit(args, res, default_format="text", extra_meta=meta, plot_fn=plot)
    return 0


def _cmd_transmit(args) -> int:
    cfg = _need_config(args)
    design = cfg.design(args.design)
    s = _settings(args, cfg)
    v = _parse_range(args.band, "band")
    if isinstance(v, tuple) or len(v) < 2:
        raise ConfigError("--band needs 'lo:hi:n' for a wavelength grid")
    wavelengths = v
    dx = design.a0 / s.resolution
    n_beam = slab_neff(cfg.stack, s.lambda_target)
    kw = dict(margin_x=s.margin_x, margin_y=s.margin_y, n_beam=n_beam,
              substrate_weight=s.substrate_weight)
    eps_dev, x, _ = rasterize(design, cfg.stack, dx, **kw)
    eps_ref, _, _ = rasterize_reference(design, cfg.stack, dx, **kw)
    edge = design.half_length()
    source_x = -(edge + 0.65 * s.margin_x)
    monitor_x = +(edge + 0.65 * s.margin_x)
    spec = run_transmission(eps_dev, eps_ref, dx, wavelengths, source_x,
                            monitor_x, n_steps=args.steps,
                            beam_width=3.0 * design.w0,
                            pml_thickness=s.pml_cells)
    meta = _geometry_meta(design, cfg.stack)
    meta["steps"] = str(args.steps)

    def plot(path):
        from . import plots
        return plots.plot_spectrum(spec, path)

    _emit(args, spec, extra_meta=meta, plot_fn=plot)
    return 0


def _cmd_fit(args) -> int:
    spec = import_spectrum(args.spectrum)
    window = _parse_window(args.window, "window") if args.window else None
    res = lorentzian_fit(spec, window=window)

    def plot(path):
        from . import plots
        lam = np.asarray(spec.wavelengths)
        y = np.asarray(spec.values)
        if window is not None:
            m = (lam >= window[0]) & (lam <= window[1])
            lam, y = lam[m], y[m]
        base = float(np.percentile(y, 10))
        model = LorentzianModel(lambda0=res.lambda_res,
                                gamma=res.lambda_res / res.Q,
                                amplitude=res.amplitude, baseline=base)
        from .fdtd import Spectrum
        return plots.plot_spectrum(Spectrum(lam, y, kind=spec.kind),
                                   path, fit=model)

    _emit(args, res, default_format="text", plot_fn=plot)
    return 0


def _cmd_invert(args) -> int:
    trace = import_trace(args.trace)
    lo, hi = _parse_window(args.window, "window")
    band = (1.0 / hi, 1.0 / lo)
    modes = harmonic_inversion(trace, band, max_modes=args.max_modes,
                               decimate=args.decimate)

    def plot(path):
        from . import plots
        return plots.plot_trace(trace, path)

    _emit(args, modes, plot_fn=plot)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _need_config(args)
    spec = cfg.sweep(args.name)
    s = _settings(args, cfg)
    result = spec.run(cfg, checkpoint_dir=args.checkpoint, settings=s)
    meta = {"sweep": args.name, "hash": record_hash(result)}

    def plot(path):
        from . import plots
        return plots.plot_sweep(result, path)

    _emit(args, result, extra_meta=meta, plot_fn=plot)
    return 0


def _cmd_compare(args) -> int:
    cfg = _need_config(args)
    s = _settings(args, cfg)
    names = (args.designs.split(",") if args.designs
             else sorted(cfg.designs))
    designs = {n.strip(): cfg.design(n.strip()) for n in names if n.strip()}
    taps = _parse_list(args.taps, "taps", integer=True)
    grid = (_parse_list(args.defect_grid, "defect-grid")
            if args.defect_grid else None)
    report, sweeps = compare_designs(designs, cfg.stack, taps,
                                     defect_grid=grid, settings=s,
                                     checkpoint_dir=args.checkpoint)
    if args.sweep_dir:
        for name in sorted(sweeps):
            p = Path(args.sweep_dir) / f"{name}.csv"
            export_results(sweeps[name], p, format="csv")
            print(f"wrote {p}")
    _emit(args, report)
    return 0


def _cmd_geometry(args) -> int:
    cfg = _need_config(args)
    design = cfg.design(args.design)
    if not args.out:
        raise ConfigError("geometry export needs --out PATH")
    p = export_geometry(design, cfg.stack, args.out)
    print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(p: argparse.ArgumentParser, *, out: bool = True) -> None:
    p.add_argument("--config", help="study configuration file (JSON)")
    p.add_argument("--preset", help="packaged study preset: paper or desk")
    if out:
        p.add_argument("--out", help="output file; stdout when omitted")
        p.add_argument("--format", choices=["csv", "text"],
                       help="output format (default: by file suffix)")
        p.add_argument("--plot", nargs="?", const="auto", metavar="PNG",
                       help="also render a figure (default: <out>.png)")


def _add_stack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-core", type=float, help="core film index")
    p.add_argument("--n-substrate", type=float, default=1.0)
    p.add_argument("--n-cladding", type=float, default=1.0)
    p.add_argument("--thickness", type=float, default=200.0,
                   help="film thickness in nm")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nanobeam",
        description="Design and 2D-FDTD simulation of 1D photonic-crystal "
                    "nanobeam cavities.")
    ap.add_argument("--version", action="version",
                    version=f"nanobeam {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("neff", help="slab effective index of the stack")
    _add_common(p, out=False)
    _add_stack_flags(p)
    p.add_argument("--wavelength", type=float, help="vacuum nm")
    p.add_argument("--mode-index", type=int, default=0)
    p.add_argument("--polarization", choices=["TE", "TM"], default="TE")
    p.set_defaults(fn=_cmd_neff)

    p = sub.add_parser("bands", help="Bloch bands of one mirror period")
    _add_common(p)
    _add_stack_flags(p)
    p.add_argument("--design", help="take (a0, r0, w0) from this preset")
    p.add_argument("-a", type=float, help="period in nm")
    p.add_argument("-r", type=float, help="hole radius in nm")
    p.add_argument("-w", type=float, help="beam width in nm")
    p.add_argument("--n-k", type=int, default=16)
    p.add_argument("--resolution", type=int,
                   help="grid cells per period (FDTD-style override)")
    p.add_argument("--no-collapse", action="store_true",
                   help="use the raw core index, not the slab n_eff")
    p.set_defaults(fn=_cmd_bands)

    p = sub.add_parser("mirror", help="scan mirror cells, rank by strength")
    _add_common(p)
    _add_stack_flags(p)
    p.add_argument("--design", help="take the beam width from this preset")
    p.add_argument("-w", type=float, help="beam width in nm")
    p.add_argument("--wavelength", type=float, help="target vacuum nm")
    p.add_argument("--a-scan", required=True, metavar="LO:HI:N",
                   help="period grid in nm")
    p.add_argument("--r-scan", required=True, metavar="LO:HI:N",
                   help="radius grid in nm")
    p.add_argument("--resolution", type=int)
    p.add_argument("--no-collapse", action="store_true")
    p.set_defaults(fn=_cmd_mirror)

    p = sub.add_parser("simulate", help="pulsed ringdown of one cavity")
    _add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--resolution", type=int)
    p.add_argument("--steps", type=int,
                   help="recorded steps (rounded to whole cycles)")
    p.add_argument("--band", metavar="LO:HI",
                   help="source band as a wavelength window in nm")
    p.add_argument("--vm", action="store_true",
                   help="second pass for the mode volume")
    p.add_argument("--trace", metavar="CSV",
                   help="also export the primary probe trace")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("modevolume",
                       help="mode volume and Purcell factor of one cavity")
    _add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--resolution", type=int)
    p.set_defaults(fn=_cmd_modevolume)

    p = sub.add_parser("transmit", help="normalized transmission spectrum")
    _add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--band", required=True, metavar="LO:HI:N",
                   help="wavelength grid in nm")
    p.add_argument("--steps", type=int, default=60000,
                   help="FDTD steps per run")
    p.add_argument("--resolution", type=int)
    p.set_defaults(fn=_cmd_transmit)

    p = sub.add_parser("fit", help="Lorentzian fit of a spectrum CSV")
    _add_common(p)
    p.add_argument("spectrum", help="CSV: wavelength_nm, value "
                                    "[, reference]")
    p.add_argument("--window", metavar="LO:HI",
                   help="restrict the fit to this wavelength window (nm)")
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("invert", help="harmonic inversion of a time trace")
    _add_common(p)
    p.add_argument("trace", help="CSV: t, field")
    p.add_argument("--window", required=True, metavar="LO:HI",
                   help="wavelength window in nm")
    p.add_argument("--max-modes", type=int, default=8)
    p.add_argument("--decimate", type=int, default=1)
    p.set_defaults(fn=_cmd_invert)

    p = sub.add_parser("sweep", help="run a named sweep preset")
    _add_common(p)
    p.add_argument("name", help="sweep name from the config's sweeps table")
    p.add_argument("--checkpoint", metavar="DIR",
                   help="resume-able per-point results")
    p.add_argument("--workers", type=int,
                   help=f"parallel FDTD workers (or ${ENV_WORKERS})")
    p.add_argument("--resolution", type=int)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("compare",
                       help="best Q / V_m per design family vs taper count")
    _add_common(p)
    p.add_argument("--designs", help="comma-separated names (default: all)")
    p.add_argument("--taps", required=True,
                   help="comma-separated taper hole counts")
    p.add_argument("--defect-grid",
                   help="comma-separated l_h grid for mode-matched designs")
    p.add_argument("--checkpoint", metavar="DIR")
    p.add_argument("--workers", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--sweep-dir", metavar="DIR",
                   help="also write each family's sweep CSV here")
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("geometry", help="export holes and width profile")
    _add_common(p, out=False)
    p.add_argument("--design", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_geometry)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except NanobeamError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
