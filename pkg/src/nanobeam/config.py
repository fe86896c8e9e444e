"""Project configuration: one JSON document drives a whole study.

Schema (version 1), all keys optional unless marked required:

    {
      "schema_version": 1,            # required
      "lambda_target": 637.0,         # required, nm
      "stack": {                      # required
        "n_core": 2.0, "n_substrate": 1.45, "n_cladding": 1.0, "t": 200.0
      },
      "designs": {                    # named cavity presets
        "<name>": {"a0": .., "r0": .., "w0": ..,
                   "an": .., "rn": .., "wn": ..,      # optional tapers
                   "n_taper": .., "n_mirror": .., "l_h": ..}
      },
      "simulation": {                 # overrides SimSettings defaults
        "resolution": 20, "pml_cells": 10, "margin_x": 600.0, ...
      },
      "sweeps": {                     # named sweep presets
        "<name>": {"kind": "taper" | "defect" | "mirror",
                   "design": "<design name>",
                   "values": [..],
                   "fixed_total": N | "fixed_mirror": N,   # taper only
                   "defect_grid": [..],                    # taper only
                   "saturated": false,                     # defect only
                   "measure_vm": "none" | "best" | "all",  # taper only
                   "stack": {..}}     # optional per-sweep stack override
      }
    }

Unknown keys are rejected with their full path.  parse -> emit ->
parse is the identity on the parsed value.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

from .errors import ConfigError, IOFailure
from .geometry import CavityDesign, MaterialStack
from .sweeps import (FixedMirror, FixedTotal, SimSettings, SweepResult,
                     sweep_defect_length, sweep_mirror_holes,
                     sweep_taper_holes)

SCHEMA_VERSION = 1

_STACK_KEYS = {"n_core", "n_substrate", "n_cladding", "t"}
_DESIGN_KEYS = {"a0", "r0", "w0", "an", "rn", "wn",
                "n_taper", "n_mirror", "l_h"}
_SIM_KEYS = {"resolution", "margin_x", "margin_y", "pml_cells",
             "substrate_weight", "bandwidth", "flush_cycles",
             "record_cycles", "snapshot_cycles", "max_modes",
             "band_n_pw", "band_resolution", "band_supercell", "workers"}
_SWEEP_KEYS = {"kind", "design", "values", "fixed_total", "fixed_mirror",
               "defect_grid", "saturated", "measure_vm", "stack",
               "n_mirror_saturated"}
_TOP_KEYS = {"schema_version", "lambda_target", "stack", "designs",
             "simulation", "sweeps"}


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of one sweep, resolved against a config."""

    kind: str
    design: str
    values: tuple[float, ...]
    fixed_total: int | None = None
    fixed_mirror: int | None = None
    defect_grid: tuple[float, ...] | None = None
    saturated: bool = False
    n_mirror_saturated: int | None = None
    measure_vm: str = "none"
    stack: MaterialStack | None = None

    def run(self, config: "ProjectConfig", *, checkpoint_dir=None,
            settings: SimSettings | None = None) -> SweepResult:
        """Execute against a config's designs and stack."""
        design = config.design(self.design)
        stack = self.stack or config.stack
        settings = settings or config.simulation
        if self.kind == "taper":
            if self.fixed_total is not None:
                mode = FixedTotal(self.fixed_total)
            else:
                mode = FixedMirror(self.fixed_mirror)
            return sweep_taper_holes(design, stack, list(self.values),
                                     mode=mode,
                                     defect_grid=self.defect_grid,
                                     settings=settings,
                                     checkpoint_dir=checkpoint_dir,
                                     measure_vm=self.measure_vm)
        if self.kind == "defect":
            return sweep_defect_length(
                design, stack, list(self.values),
                saturated=self.saturated,
                n_mirror_saturated=self.n_mirror_saturated,
                settings=settings, checkpoint_dir=checkpoint_dir)
        return sweep_mirror_holes(design, stack,
                                  [int(v) for v in self.values],
                                  settings=settings,
                                  checkpoint_dir=checkpoint_dir)


@dataclass(frozen=True)
class ProjectConfig:
    lambda_target: float
    stack: MaterialStack
    designs: dict[str, CavityDesign] = field(default_factory=dict)
    simulation: SimSettings = field(default_factory=SimSettings)
    sweeps: dict[str, SweepSpec] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def design(self, name: str) -> CavityDesign:
        try:
            return self.designs[name]
        except KeyError:
            raise ConfigError(
                f"unknown design {name!r}; available: "
                f"{sorted(self.designs) or 'none'}"
            ) from None

    def sweep(self, name: str) -> SweepSpec:
        try:
            return self.sweeps[name]
        except KeyError:
            raise ConfigError(
                f"unknown sweep {name!r}; available: "
                f"{sorted(self.sweeps) or 'none'}"
            ) from None


def _reject_unknown(d: dict, allowed: set, path: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key {path}.{unknown[0]}; allowed keys here: "
            + ", ".join(sorted(allowed))
        )


def _number(d: dict, key: str, path: str, required: bool = False,
            default=None):
    if key not in d:
        if required:
            raise ConfigError(f"missing required key {path}.{key}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number, got {v!r}")
    return float(v)


def _parse_stack(d, path: str) -> MaterialStack:
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be an object")
    _reject_unknown(d, _STACK_KEYS, path)
    stack = MaterialStack(
        n_core=_number(d, "n_core", path, required=True),
        n_substrate=_number(d, "n_substrate", path, default=1.0),
        n_cladding=_number(d, "n_cladding", path, default=1.0),
        t=_number(d, "t", path, default=200.0))
    try:
        stack.validate()
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None
    return stack


def _parse_design(d, path: str) -> CavityDesign:
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be an object")
    _reject_unknown(d, _DESIGN_KEYS, path)
    kw = {}
    for key in ("a0", "r0", "w0"):
        kw[key] = _number(d, key, path, required=True)
    for key in ("an", "rn", "wn", "l_h"):
        kw[key] = _number(d, key, path)
    for key in ("n_taper", "n_mirror"):
        if key in d:
            v = d[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{path}.{key} must be an integer, "
                                  f"got {v!r}")
            kw[key] = v
    design = CavityDesign(**kw)
    try:
        design.validate()
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None
    return design


def _parse_simulation(d, path: str, lambda_target: float) -> SimSettings:
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be an object")
    _reject_unknown(d, _SIM_KEYS, path)
    kw = {"lambda_target": lambda_target}
    int_keys = {"resolution", "pml_cells", "flush_cycles", "record_cycles",
                "snapshot_cycles", "max_modes", "band_resolution", "workers"}
    for key in _SIM_KEYS:
        if key not in d:
            continue
        v = d[key]
        if key == "band_n_pw":
            if (not isinstance(v, list) or len(v) != 2
                    or not all(isinstance(n, int) and n > 0 for n in v)):
                raise ConfigError(
                    f"{path}.band_n_pw must be a pair of positive "
                    f"integers, got {v!r}"
                )
            kw[key] = (v[0], v[1])
        elif key in int_keys:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{path}.{key} must be an integer, "
                                  f"got {v!r}")
            kw[key] = v
        else:
            kw[key] = _number(d, key, path)
    settings = SimSettings(**kw)
    try:
        settings.validate()
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None
    return settings


def _parse_sweep(d, path: str, designs: dict) -> SweepSpec:
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be an object")
    _reject_unknown(d, _SWEEP_KEYS, path)
    kind = d.get("kind")
    if kind not in ("taper", "defect", "mirror"):
        raise ConfigError(
            f"{path}.kind must be one of taper|defect|mirror, got {kind!r}"
        )
    name = d.get("design")
    if name not in designs:
        raise ConfigError(
            f"{path}.design references {name!r} which is not in designs "
            f"({sorted(designs) or 'none'})"
        )
    values = d.get("values")
    if (not isinstance(values, list) or not values
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in values)):
        raise ConfigError(f"{path}.values must be a non-empty number list")
    kw = dict(kind=kind, design=name,
              values=tuple(float(v) for v in values))
    if kind == "taper":
        ft, fm = d.get("fixed_total"), d.get("fixed_mirror")
        if (ft is None) == (fm is None):
            raise ConfigError(
                f"{path}: taper sweeps need exactly one of fixed_total or "
                "fixed_mirror"
            )
        for key, v in (("fixed_total", ft), ("fixed_mirror", fm)):
            if v is not None:
                if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                    raise ConfigError(f"{path}.{key} must be a positive "
                                      f"integer, got {v!r}")
                kw[key] = v
        if "defect_grid" in d:
            g = d["defect_grid"]
            if not isinstance(g, list) or not g:
                raise ConfigError(f"{path}.defect_grid must be a non-empty "
                                  "list")
            kw["defect_grid"] = tuple(float(v) for v in g)
        mv = d.get("measure_vm", "none")
        if mv not in ("none", "best", "all"):
            raise ConfigError(f"{path}.measure_vm must be none|best|all, "
                              f"got {mv!r}")
        kw["measure_vm"] = mv
    elif kind == "defect":
        if "saturated" in d:
            if not isinstance(d["saturated"], bool):
                raise ConfigError(f"{path}.saturated must be a boolean")
            kw["saturated"] = d["saturated"]
        if "n_mirror_saturated" in d:
            v = d["n_mirror_saturated"]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{path}.n_mirror_saturated must be a "
                                  f"non-negative integer, got {v!r}")
            kw["n_mirror_saturated"] = v
    if "stack" in d:
        kw["stack"] = _parse_stack(d["stack"], f"{path}.stack")
    return SweepSpec(**kw)


def parse_config(text: str, source: str = "<config>") -> ProjectConfig:
    """Parse and validate a JSON study configuration.

    Every violation names the offending key path; design and stack
    invariants are enforced here so a bad geometry fails at load time,
    not hours into a sweep.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    _reject_unknown(doc, _TOP_KEYS, source)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{source}.schema_version must be {SCHEMA_VERSION}, "
            f"got {version!r}"
        )
    lam = _number(doc, "lambda_target", source, required=True)
    if lam <= 0:
        raise ConfigError(f"{source}.lambda_target must be positive, "
                          f"got {lam}")
    if "stack" not in doc:
        raise ConfigError(f"missing required key {source}.stack")
    stack = _parse_stack(doc["stack"], f"{source}.stack")

    designs = {}
    raw = doc.get("designs", {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}.designs must be an object")
    for name in sorted(raw):
        designs[name] = _parse_design(raw[name], f"{source}.designs.{name}")

    sim = _parse_simulation(doc.get("simulation", {}),
                            f"{source}.simulation", lam)

    sweeps = {}
    raw = doc.get("sweeps", {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}.sweeps must be an object")
    for name in sorted(raw):
        sweeps[name] = _parse_sweep(raw[name], f"{source}.sweeps.{name}",
                                    designs)
    return ProjectConfig(lambda_target=lam, stack=stack, designs=designs,
                         simulation=sim, sweeps=sweeps,
                         schema_version=version)


def emit_config(config: ProjectConfig) -> str:
    """Serialize a config to canonical JSON (round-trips exactly)."""
    doc = {
        "schema_version": config.schema_version,
        "lambda_target": config.lambda_target,
        "stack": asdict(config.stack),
        "designs": {k: _design_doc(v)
                    for k, v in sorted(config.designs.items())},
        "simulation": _sim_doc(config.simulation),
        "sweeps": {k: _sweep_doc(v) for k, v in sorted(config.sweeps.items())},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _design_doc(design: CavityDesign) -> dict:
    # l_h: None means "no defect segment"; JSON omits it rather than null.
    d = asdict(design)
    if d["l_h"] is None:
        d.pop("l_h")
    return d


def _sim_doc(sim: SimSettings) -> dict:
    d = asdict(sim)
    d.pop("lambda_target")            # lives at the top level
    d["band_n_pw"] = list(sim.band_n_pw)
    return d


def _sweep_doc(spec: SweepSpec) -> dict:
    d = {"kind": spec.kind, "design": spec.design,
         "values": list(spec.values)}
    if spec.kind == "taper":
        if spec.fixed_total is not None:
            d["fixed_total"] = spec.fixed_total
        else:
            d["fixed_mirror"] = spec.fixed_mirror
        if spec.defect_grid is not None:
            d["defect_grid"] = list(spec.defect_grid)
        d["measure_vm"] = spec.measure_vm
    elif spec.kind == "defect":
        d["saturated"] = spec.saturated
        if spec.n_mirror_saturated is not None:
            d["n_mirror_saturated"] = spec.n_mirror_saturated
    if spec.stack is not None:
        d["stack"] = asdict(spec.stack)
    return d


def load_config(path) -> ProjectConfig:
    """Read a config file; IO problems surface as IOFailure."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise IOFailure(f"cannot read config {path}: {e}") from e
    return parse_config(text, source=str(path))


def load_preset(name: str) -> ProjectConfig:
    """Load a packaged preset configuration ("paper" or "desk")."""
    try:
        ref = resources.files("nanobeam").joinpath(f"presets/{name}.json")
        text = ref.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError):
        raise ConfigError(
            f"no packaged preset named {name!r}; shipped presets: "
            "'paper', 'desk'"
        ) from None
    return parse_config(text, source=f"preset:{name}")
