"""
Design-spec files: YAML documents describing one device to optimize.

A minimal splitter spec::

    kind: splitter
    ports: 2
    layers: 3
    grid: {start_nm: 1400, stop_nm: 1600, count: 32}
    target: {ratios: [0.5, 0.5]}

Every other field falls back to its default; ``DesignSpec.to_dict`` returns
the fully expanded document. Ports in spec files are numbered from 1.
"""

from dataclasses import dataclass, field, fields, replace
import hashlib
import json

import numpy as np
import yaml

from .errors import SpecError
from .mesh import DeviceState, build_topology, default_input_port
from .objective import QUANTITIES, DesignObjective
from .optimize import InitConfig, initialize_parameters
from .waveguide import COUPLER_WAVELENGTH_RANGE, CouplerModel

KINDS = ("splitter", "duplexer", "custom")


@dataclass(frozen=True)
class Grid:
    start_nm: float = 1400.0
    stop_nm: float = 1600.0
    count: int = 32

    def wavelengths(self):
        return np.linspace(self.start_nm, self.stop_nm, self.count)


@dataclass(frozen=True)
class Target:
    ratios: tuple = ()
    cutoff_nm: float = None
    short_pass_output: int = 1
    long_pass_output: int = 2
    table: tuple = ()
    quantity: str = "power"


@dataclass(frozen=True)
class Regularization:
    alpha1: float = 3e-4
    alpha2: float = 1e-4
    w_ref_nm: float = 450.0


@dataclass(frozen=True)
class Physics:
    insertion_loss_db: float = 0.02
    passthrough_phase: bool = False


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 5000
    checkpoint_every: int = 100


@dataclass(frozen=True)
class DesignSpec:
    kind: str = "splitter"
    ports: int = 2
    layers: int = 3
    input_port: int = None
    grid: Grid = field(default_factory=Grid)
    target: Target = field(default_factory=Target)
    init: InitConfig = field(default_factory=InitConfig)
    regularization: Regularization = field(default_factory=Regularization)
    physics: Physics = field(default_factory=Physics)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: int = 0
    output_dir: str = "runs/design"

    @property
    def xi(self):
        return self.init.xi

    @property
    def max_iterations(self):
        return self.optimizer.max_iterations

    @property
    def checkpoint_every(self):
        return self.optimizer.checkpoint_every

    def input_index(self):
        """0-based input port."""
        if self.input_port is None:
            return default_input_port(self.ports)
        return self.input_port - 1

    def wavelengths_nm(self):
        return self.grid.wavelengths()

    def topology(self):
        return build_topology(self.ports, self.layers)

    def coupler_model(self):
        return CouplerModel(insertion_loss_db=self.physics.insertion_loss_db)

    def device(self, params):
        return DeviceState(self.topology(), params, self.xi, 0.0, self.init.bounds(),
                           coupler_model=self.coupler_model(),
                           passthrough_phase=self.physics.passthrough_phase)

    def initial_device(self, seed=None):
        seed = self.seed if seed is None else seed
        cfg = replace(self.init, seed=seed)
        return self.device(initialize_parameters(self.topology(), cfg))

    def objective(self):
        return build_targets(self)

    def to_dict(self):
        return _to_plain(self)

    def dump(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    def spec_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _to_plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


_SECTIONS = {
    "grid": Grid,
    "target": Target,
    "init": InitConfig,
    "regularization": Regularization,
    "physics": Physics,
    "optimizer": OptimizerSettings,
}

_INT_FIELDS = {"ports", "layers", "input_port", "seed", "count", "short_pass_output",
               "long_pass_output", "xi", "max_iterations", "checkpoint_every"}


def _coerce(name, value, problems, where):
    if value is None:
        return None
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            problems.append(f"{where}{name}: expected an integer, got {value!r}")
            return value
        return int(value)
    if name in ("ratios", "table"):
        if not isinstance(value, (list, tuple)):
            problems.append(f"{where}{name}: expected a list")
            return ()
        if name == "table":
            return tuple(tuple(float(v) for v in row) for row in value)
        return tuple(float(v) for v in value)
    if name in ("kind", "output_dir", "quantity"):
        return str(value)
    if name == "passthrough_phase":
        if not isinstance(value, bool):
            problems.append(f"{where}{name}: expected true/false, got {value!r}")
        return bool(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where}{name}: expected a number, got {value!r}")
        return value
    return float(value)


def _build(cls, data, problems, where=""):
    if not isinstance(data, dict):
        problems.append(f"{where.rstrip('.') or 'document'}: expected a mapping")
        return cls()
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            problems.append(f"{where}{key}: unknown field")
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            continue
        if key in _SECTIONS and cls is DesignSpec:
            kwargs[key] = _build(_SECTIONS[key], value, problems, f"{key}.")
        else:
            kwargs[key] = _coerce(key, value, problems, where)
    return cls(**kwargs)


def validate(spec):
    """List of every violated constraint (empty when valid)."""
    out = []
    if spec.kind not in KINDS:
        out.append(f"kind: must be one of {KINDS}, got {spec.kind!r}")
    if not isinstance(spec.ports, int) or spec.ports < 2:
        out.append("ports: must be >= 2")
    if not isinstance(spec.layers, int) or spec.layers < 1:
        out.append("layers: must be >= 1")
    n = spec.ports if isinstance(spec.ports, int) else 0
    if spec.input_port is not None and not 1 <= spec.input_port <= n:
        out.append(f"input_port: must be between 1 and {n}")
    g = spec.grid
    lo, hi = (1e3 * v for v in COUPLER_WAVELENGTH_RANGE)
    if not isinstance(g.count, int) or g.count < 2:
        out.append("grid.count: must be >= 2")
    if not g.start_nm < g.stop_nm:
        out.append("grid: start_nm must be below stop_nm")
    if g.start_nm < lo or g.stop_nm > hi:
        out.append(f"grid: wavelengths must lie within [{lo:g}, {hi:g}] nm")
    t = spec.target
    if t.quantity not in QUANTITIES:
        out.append(f"target.quantity: must be one of {QUANTITIES}")
    if spec.kind == "splitter":
        if len(t.ratios) != n:
            out.append(f"target.ratios: need one ratio per output ({n}), got {len(t.ratios)}")
        if any(r < 0 or r > 1 for r in t.ratios):
            out.append("target.ratios: each ratio must lie in [0, 1]")
        if sum(t.ratios) > 1 + 1e-12:
            out.append(f"target.ratios: split ratios sum to {sum(t.ratios):g}, which exceeds 1")
    elif spec.kind == "duplexer":
        if t.cutoff_nm is None:
            out.append("target.cutoff_nm: required for a duplexer")
        elif not g.start_nm < t.cutoff_nm < g.stop_nm:
            out.append("target.cutoff_nm: cutoff must lie inside the wavelength grid")
        for name in ("short_pass_output", "long_pass_output"):
            if not 1 <= getattr(t, name) <= n:
                out.append(f"target.{name}: must be between 1 and {n}")
        if t.short_pass_output == t.long_pass_output:
            out.append("target: short- and long-pass outputs must differ")
    elif spec.kind == "custom":
        rows = t.table
        if len(rows) != g.count or any(len(r) != n for r in rows):
            out.append(f"target.table: need {g.count} rows of {n} values")
        elif np.any(np.array(rows) < 0) or np.any(np.array(rows) > 1):
            out.append("target.table: values must lie in [0, 1]")
        elif np.any(np.array(rows).sum(axis=1) > 1 + 1e-12):
            out.append("target.table: a row sums to more than 1")
    out.extend(f"init: {p}" for p in spec.init.problems())
    if spec.regularization.alpha1 < 0 or spec.regularization.alpha2 < 0:
        out.append("regularization: alpha1 and alpha2 must be non-negative")
    if spec.physics.insertion_loss_db < 0:
        out.append("physics.insertion_loss_db: must be non-negative")
    if spec.optimizer.max_iterations < 1:
        out.append("optimizer.max_iterations: must be >= 1")
    if spec.optimizer.checkpoint_every < 0:
        out.append("optimizer.checkpoint_every: must be >= 0")
    return out


def spec_from_dict(data):
    problems = []
    if data is None:
        data = {}
    spec = _build(DesignSpec, data, problems)
    # the top-level seed drives initialization
    if isinstance(spec.seed, int):
        spec = replace(spec, init=replace(spec.init, seed=spec.seed))
    try:
        problems += validate(spec)
    except TypeError:
        pass  # mistyped fields are already reported
    if problems:
        raise SpecError(problems)
    return spec


def parse_design_spec(path):
    """Read, default-fill and validate a YAML design spec."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise SpecError(f"{path}: {where}{problem}") from exc
    return spec_from_dict(data)


def build_targets(spec):
    """Target table for a spec as a ``DesignObjective``."""
    lam = spec.wavelengths_nm()
    n = spec.ports
    t = spec.target
    if spec.kind == "splitter":
        targets = np.tile(np.array(t.ratios, dtype=float), (lam.size, 1))
    elif spec.kind == "duplexer":
        targets = np.zeros((lam.size, n))
        below = lam < t.cutoff_nm
        targets[below, t.short_pass_output - 1] = 1.0
        targets[~below, t.long_pass_output - 1] = 1.0
    else:
        targets = np.array(t.table, dtype=float)
    r = spec.regularization
    return DesignObjective(lam, targets, spec.input_index(), r.alpha1, r.alpha2,
                           r.w_ref_nm, t.quantity)
