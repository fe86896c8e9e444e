"""Result persistence: deterministic CSV and structured-text files.

Every exported file opens with a version line and a sha256 line; the
hash covers every byte below it, so any later edit to the data is
detectable.  Numbers are written with 9 significant digits ('%.9g'),
which makes two exports of the same record byte-identical and bounds
round-trip error at 1e-9 relative.

Structured text is a JSON document prefixed by the two comment lines;
strip lines starting with '#' to parse it.  Infinity is written bare,
as Python's json module reads it.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .bands import BandStructure, MirrorCell, MirrorScan
from .errors import ConfigError, IOFailure, NumericalError
from .fdtd import Spectrum, TimeTrace
from .geometry import CavityDesign, MaterialStack, beam_width_profile, hole_positions
from .resonance import ResonanceResult
from .sweeps import ComparisonReport, LossDecomposition, SweepResult

__all__ = [
    "export_results",
    "render_results",
    "import_spectrum",
    "import_trace",
    "export_geometry",
    "export_permittivity",
    "record_hash",
]


def _toolkit() -> str:
    from nanobeam import __version__
    return f"nanobeam {__version__}"


def _fmt(v) -> str:
    """One value as text: 9 significant digits for floats."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % v
    return str(v)


def _jtext(v, indent: int = 0) -> str:
    """Deterministic JSON with '%.9g' floats; dict order is kept."""
    pad = "  " * indent
    pad1 = "  " * (indent + 1)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f'{pad1}"{k}": {_jtext(val, indent + 1)}'
                 for k, val in v.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        flat = all(not isinstance(e, (dict, list, tuple)) for e in v)
        if flat:
            return "[" + ", ".join(_jtext(e) for e in v) + "]"
        items = [pad1 + _jtext(e, indent + 1) for e in v]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        if math.isnan(x):
            return "NaN"
        return "%.9g" % x
    s = str(v)
    for a, b in (("\\", "\\\\"), ('"', '\\"'), ("\n", "\\n"), ("\t", "\\t")):
        s = s.replace(a, b)
    return f'"{s}"'


# ---------------------------------------------------------------------------
# Per-record tables: (kind, meta key/value pairs, columns, rows, footer)


def _notes_cell(notes) -> str:
    return "; ".join(notes)


def _resonance_row(r: ResonanceResult | None, note=None) -> list:
    if r is None:
        return [None, None, None, None, note or ""]
    merged = _notes_cell(r.notes) if note is None else note
    return [r.lambda_res, r.Q, r.amplitude, r.V_m, merged]


def _table(record):
    if isinstance(record, Spectrum):
        meta = [("kind", record.kind)]
        rows = [[w, v] for w, v in zip(record.wavelengths, record.values)]
        return "Spectrum", meta, ["wavelength_nm", "value"], rows, []

    if isinstance(record, TimeTrace):
        meta = [("dt", _fmt(record.dt)), ("t0", _fmt(record.t0)),
                ("position", f"{_fmt(record.position[0])} "
                             f"{_fmt(record.position[1])}"),
                ("steps", str(len(record.samples)))]
        t = record.times()
        rows = [[ti, si] for ti, si in zip(t, record.samples)]
        return "TimeTrace", meta, ["t", "field"], rows, []

    if isinstance(record, BandStructure):
        meta = [("a", _fmt(record.a)), ("supercell", _fmt(record.supercell)),
                ("n_background", _fmt(record.n_background))]
        nb = record.freqs.shape[1]
        cols = (["k"] + [f"band{j + 1}" for j in range(nb)]
                + [f"guided{j + 1}" for j in range(nb)])
        ll = record.light_line()
        rows = []
        for i in range(len(record.k)):
            flags = [bool(record.freqs[i, j] < ll[i]) for j in range(nb)]
            rows.append([record.k[i]] + list(record.freqs[i]) + flags)
        return "BandStructure", meta, cols, rows, []

    if isinstance(record, ResonanceResult):
        kind, rs = "ResonanceResult", [record]
    elif (isinstance(record, (list, tuple)) and record
          and all(isinstance(r, ResonanceResult) for r in record)):
        kind, rs = "ResonanceList", list(record)
    else:
        kind, rs = "", []
    if rs:
        cols = ["lambda_res", "Q", "amplitude", "method", "V_m",
                "sigma_lambda", "sigma_Q", "notes"]
        rows = [[r.lambda_res, r.Q, r.amplitude, r.method, r.V_m,
                 r.sigma_lambda, r.sigma_Q, _notes_cell(r.notes)]
                for r in rs]
        return kind, [], cols, rows, []

    if isinstance(record, SweepResult):
        meta = [("parameter", record.parameter), ("unit", record.unit)]
        if record.design is not None:
            meta.append(("design", _design_line(record.design)))
        for n in record.notes:
            meta.append(("note", n))
        cols = [record.parameter, "lambda_res", "Q", "amplitude", "V_m",
                "note"]
        rows = []
        for p in record.points:
            r = p.result
            if r is None:
                rows.append([p.value, None, None, None, None, p.note or ""])
            else:
                note = p.note if p.note else _notes_cell(r.notes)
                extra = ""
                if p.extra:
                    extra = " ".join(f"{k}={_fmt(v)}"
                                     for k, v in sorted(p.extra.items()))
                    note = f"{note}; {extra}" if note else extra
                rows.append([p.value, r.lambda_res, r.Q, r.amplitude,
                             r.V_m, note])
        footer = []
        if record.q_sat is not None:
            footer.append(("q_sat", _fmt(record.q_sat)))
        return "SweepResult", meta, cols, rows, footer

    if isinstance(record, (MirrorScan, MirrorCell)):
        cells = record.cells if isinstance(record, MirrorScan) else [record]
        cols = ["a", "r", "w", "nu1", "nu2", "gamma", "lambda_mid",
                "gap_fraction"]
        rows = [[c.a, c.r, c.w, c.nu1, c.nu2, c.gamma, c.lambda_mid,
                 c.gap_fraction] for c in cells]
        footer = []
        if isinstance(record, MirrorScan) and rows:
            try:
                b = record.best
                footer.append(("best", f"a={_fmt(b.a)} r={_fmt(b.r)} "
                                       f"w={_fmt(b.w)}"))
            except NumericalError:
                footer.append(("best", "none (target outside every gap)"))
        kind = "MirrorScan" if isinstance(record, MirrorScan) else "MirrorCell"
        return kind, [], cols, rows, footer

    if isinstance(record, ComparisonReport):
        meta = [("lambda_target", _fmt(record.lambda_target))]
        for n in record.notes:
            meta.append(("note", n))
        cols = ["family", "n_taper", "l_h", "Q", "lambda_res", "V_m",
                "Q_over_V_m"]
        rows = [[r.family, r.n_taper, r.l_h, r.q, r.lambda_res, r.v_m,
                 r.q_over_vm] for r in record.rows]
        return "ComparisonReport", meta, cols, rows, []

    if isinstance(record, LossDecomposition):
        cols = ["q_sc", "q0", "beta", "inv_q_sc", "sigma_inv_q_sc",
                "fit_residual", "q_sc_is_lower_bound"]
        row = [record.q_sc, record.q0, record.beta, record.inv_q_sc,
               record.sigma_inv_q_sc, record.fit_residual,
               record.q_sc_is_lower_bound]
        meta = [("note", n) for n in record.notes]
        return "LossDecomposition", meta, cols, [row], []

    raise ConfigError(
        f"no exporter for records of type {type(record).__name__}"
    )


def _design_line(design: CavityDesign) -> str:
    d = asdict(design)
    return " ".join(f"{k}={_fmt(v)}" for k, v in d.items() if v is not None)


# ---------------------------------------------------------------------------
# Structured-text documents


def _data_doc(record):
    if isinstance(record, Spectrum):
        return {"kind": record.kind,
                "wavelength_nm": [float(w) for w in record.wavelengths],
                "value": [float(v) for v in record.values]}
    if isinstance(record, TimeTrace):
        return {"dt": record.dt, "t0": record.t0,
                "position": list(record.position),
                "field": [float(s) for s in record.samples]}
    if isinstance(record, BandStructure):
        return {"a": record.a, "supercell": record.supercell,
                "n_background": record.n_background,
                "k": [float(k) for k in record.k],
                "bands": [[float(f) for f in row] for row in record.freqs],
                "light_line": [float(f) for f in record.light_line()]}
    if isinstance(record, ResonanceResult):
        d = asdict(record)
        d["notes"] = list(record.notes)
        return d
    if (isinstance(record, (list, tuple)) and record
            and all(isinstance(r, ResonanceResult) for r in record)):
        return {"modes": [_data_doc(r) for r in record]}
    if isinstance(record, SweepResult):
        pts = []
        for p in record.points:
            e = {"value": p.value,
                 "result": None if p.result is None else _data_doc(p.result),
                 "note": p.note}
            if p.extra:
                e["extra"] = {k: p.extra[k] for k in sorted(p.extra)}
            pts.append(e)
        return {"parameter": record.parameter, "unit": record.unit,
                "design": None if record.design is None
                else asdict(record.design),
                "q_sat": record.q_sat, "notes": list(record.notes),
                "points": pts}
    if isinstance(record, MirrorCell):
        d = asdict(record)
        d["gap_fraction"] = record.gap_fraction
        return d
    if isinstance(record, MirrorScan):
        doc = {"cells": [_data_doc(c) for c in record.cells]}
        try:
            doc["best"] = _data_doc(record.best)
        except NumericalError:
            doc["best"] = None
        return doc
    if isinstance(record, ComparisonReport):
        return {"lambda_target": record.lambda_target,
                "notes": list(record.notes),
                "rows": [asdict(r) for r in record.rows]}
    if isinstance(record, LossDecomposition):
        d = asdict(record)
        d["notes"] = list(record.notes)
        return d
    raise ConfigError(
        f"no exporter for records of type {type(record).__name__}"
    )


# ---------------------------------------------------------------------------
# Rendering and file output


def _csv_body(meta, cols, rows, footer) -> str:
    buf = _io.StringIO()
    for k, v in meta:
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    for k, v in footer:
        buf.write(f"# {k}: {v}\n")
    return buf.getvalue()


def record_hash(record) -> str:
    """Content hash (first 16 hex of sha256) of a record's data."""
    body = _jtext(_data_doc(record))
    return hashlib.sha256(body.encode()).hexdigest()[:16]


def render_results(record, format: str = "csv", extra_meta=None) -> str:
    """Render a result record to text without touching the filesystem.

    format is "csv" or "text" (structured text).  The first line names
    the toolkit version and record type; the second carries a sha256
    over everything below it.
    """
    fmt = format.strip().lower()
    if fmt in ("csv",):
        kind, meta, cols, rows, footer = _table(record)
        if extra_meta:
            meta = meta + [(k, str(v)) for k, v in sorted(extra_meta.items())]
        body = _csv_body(meta, cols, rows, footer)
    elif fmt in ("text", "structuredtext", "json"):
        kind = ("ResonanceList" if isinstance(record, (list, tuple))
                else type(record).__name__)
        doc = {"data": _data_doc(record)}
        if extra_meta:
            doc["meta"] = {k: str(v) for k, v in sorted(extra_meta.items())}
        body = _jtext(doc) + "\n"
    else:
        raise ConfigError(
            f"unknown export format {format!r}; use 'csv' or 'text'"
        )
    digest = hashlib.sha256(body.encode()).hexdigest()[:16]
    return f"# {_toolkit()} {kind}\n# sha256: {digest}\n{body}"


def export_results(record, path, format: str | None = None,
                   extra_meta=None) -> Path:
    """Write a record to path; format defaults from the suffix.

    .csv gives CSV, anything else structured text.  Returns the path.
    IO problems surface as IOFailure.
    """
    p = Path(path)
    if format is None:
        format = "csv" if p.suffix.lower() == ".csv" else "text"
    text = render_results(record, format, extra_meta=extra_meta)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write {p}: {e}") from e
    return p


# ---------------------------------------------------------------------------
# Ingestion


def _read_table(path):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IOFailure(f"cannot read {path}: {e}") from e
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    header: list[str] | None = None
    for line in lines:
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s.lstrip("#").strip()
            if ":" in body:
                k, v = body.split(":", 1)
                meta[k.strip()] = v.strip()
            continue
        cells = [c.strip() for c in s.split(",")]
        if header is None:
            try:
                float(cells[0])
            except ValueError:
                header = cells
                continue
        rows.append(cells)
    return meta, header, rows


def import_spectrum(path) -> Spectrum:
    """Read a measured or exported spectrum from two-column CSV.

    Columns are wavelength_nm, value, with an optional third reference
    column; when present the values are divided by it point by point
    (reference-device normalization).  The result keeps kind "Raw":
    measured ratios may exceed unity through noise and must not be
    rejected by the normalized-transmission range check.
    """
    meta, header, rows = _read_table(path)
    if not rows:
        raise IOFailure(f"{path}: no data rows")
    ncol = len(rows[0])
    if ncol < 2:
        raise ConfigError(
            f"{path}: need at least wavelength and value columns, "
            f"got {ncol}"
        )
    try:
        data = np.array([[float(c) for c in row[:3]] for row in rows])
    except (ValueError, IndexError) as e:
        raise ConfigError(f"{path}: malformed numeric row: {e}") from None
    w = data[:, 0]
    v = data[:, 1]
    order = np.argsort(w)
    w, v = w[order], v[order]
    if np.any(np.diff(w) <= 0):
        raise ConfigError(f"{path}: duplicate wavelength samples")
    if ncol >= 3:
        ref = data[order, 2]
        if np.any(ref == 0):
            raise NumericalError(
                f"{path}: reference column has zeros; cannot normalize"
            )
        v = v / ref
    return Spectrum(wavelengths=w, values=v, kind="Raw")


def import_trace(path) -> TimeTrace:
    """Read a time trace from CSV columns (t, field).

    dt comes from the header when present, else from the sample
    spacing; a non-uniform time axis is rejected.
    """
    meta, header, rows = _read_table(path)
    if len(rows) < 2:
        raise IOFailure(f"{path}: need at least two samples")
    try:
        data = np.array([[float(row[0]), float(row[1])] for row in rows])
    except (ValueError, IndexError) as e:
        raise ConfigError(f"{path}: malformed numeric row: {e}") from None
    t, field = data[:, 0], data[:, 1]
    steps = np.diff(t)
    if "dt" in meta:
        dt = float(meta["dt"])
    else:
        dt = float(np.median(steps))
    if dt <= 0 or np.any(np.abs(steps - dt) > 1e-6 * dt + 1e-12):
        raise NumericalError(f"{path}: time axis is not uniform")
    pos = (0.0, 0.0)
    if "position" in meta:
        parts = meta["position"].split()
        if len(parts) == 2:
            pos = (float(parts[0]), float(parts[1]))
    return TimeTrace(samples=field, dt=dt, position=pos, t0=float(t[0]))


# ---------------------------------------------------------------------------
# Geometry companions


def export_geometry(design: CavityDesign, stack: MaterialStack, path) -> Path:
    """Structured-text dump of a cavity: stack, holes, width profile."""
    holes = hole_positions(design)
    xs = np.array([0.0] + [x for x, _ in holes if x >= 0])
    widths = beam_width_profile(design, xs)
    doc = {
        "design": {k: v for k, v in asdict(design).items() if v is not None},
        "stack": asdict(stack),
        "holes": [[x, r] for x, r in holes],
        "width_breakpoints": [[float(x), float(w)]
                              for x, w in zip(xs, widths)],
    }
    body = _jtext({"data": doc}) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()[:16]
    text = f"# {_toolkit()} Geometry\n# sha256: {digest}\n{body}"
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write {p}: {e}") from e
    return p


def export_permittivity(eps: np.ndarray, dx: float, path) -> Path:
    """Row-major CSV of a permittivity grid with nx, ny, dx header."""
    eps = np.asarray(eps)
    if eps.ndim != 2:
        raise ConfigError(f"permittivity grid must be 2D, got {eps.ndim}D")
    buf = _io.StringIO()
    buf.write(f"# nx: {eps.shape[0]}\n# ny: {eps.shape[1]}\n")
    buf.write(f"# dx: {_fmt(dx)}\n")
    for row in eps:
        buf.write(",".join(_fmt(v) for v in row))
        buf.write("\n")
    body = buf.getvalue()
    digest = hashlib.sha256(body.encode()).hexdigest()[:16]
    text = f"# {_toolkit()} PermittivityGrid\n# sha256: {digest}\n{body}"
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IOFailure(f"cannot write {p}: {e}") from e
    return p
