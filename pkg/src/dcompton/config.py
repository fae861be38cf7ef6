"""Structured configuration for the scan driver.

Scan runs are described by a small block-structured text format::

    physics {
      electron_energy = 1000.0 m_e
      laser_omega = 2.5 eV
      xi = 1.0
    }
    scan {
      observable = rate_map
      axis {
        name = psi_b
        range = 0.0 .. 6.283185307179586 rad
        points = 32
      }
    }

Every physical quantity carries an explicit unit (eV/keV/MeV/GeV/m_e for
energies, rad/mrad for angles).  Parsing converts each field to a fixed
canonical unit and stores that number verbatim, so serialize(parse(text))
is a fixed point after the first normalization: no unit arithmetic is
repeated on an already-canonical file.

Unknown blocks and keys are rejected.  All problems found in one pass are
collected and raised together as a :class:`ConfigError` whose entries are
anchored to line numbers.
"""

import hashlib
import math
import re
from dataclasses import dataclass, field, replace

from .rates import PhaseSpaceCuts
from .kinematics import LaserConfig
from .units import ELECTRON_MASS_EV, ELECTRON_MASS_MEV, ev

TWO_PI = 2.0 * math.pi

OBSERVABLES = ("rate_map", "rate_curve", "concurrence_map", "totals")
POLARIZATIONS = ("summed", "11", "12", "21", "22")
AXIS_NAMES = ("omega_b", "theta_b", "psi_b", "theta_c", "psi_c")


class ConfigError(ValueError):
    """Aggregated, line-anchored configuration problems.

    ``errors`` is a list of ``(line, message)`` pairs; ``line`` is 0 for
    problems that are not tied to a specific line (for example a missing
    required block).
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.format_errors()))

    def format_errors(self):
        out = []
        for line, msg in self.errors:
            prefix = f"line {line}: " if line else ""
            out.append(prefix + msg)
        return out


# Conversion tables into each canonical unit.  A field declares which
# canonical unit it uses; the stored float is always in that unit.
_UNIT_TABLES = {
    "energy_me": {
        "m_e": 1.0,
        "ev": 1.0 / ELECTRON_MASS_EV,
        "kev": 1e3 / ELECTRON_MASS_EV,
        "mev": 1e6 / ELECTRON_MASS_EV,
        "gev": 1e9 / ELECTRON_MASS_EV,
    },
    "energy_ev": {
        "ev": 1.0,
        "kev": 1e3,
        "mev": 1e6,
        "gev": 1e9,
        "m_e": ELECTRON_MASS_EV,
    },
    "energy_mev": {
        "ev": 1e-6,
        "kev": 1e-3,
        "mev": 1.0,
        "gev": 1e3,
        "m_e": ELECTRON_MASS_MEV,
    },
    "angle": {
        "rad": 1.0,
        "mrad": 1e-3,
    },
}

_CANONICAL_UNIT = {
    "energy_me": "m_e",
    "energy_ev": "eV",
    "energy_mev": "MeV",
    "angle": "rad",
}


@dataclass(frozen=True)
class PhysicsBlock:
    """Beam and laser parameters.

    electron_energy is in units of the electron mass, laser_omega in eV;
    xi is the dimensionless laser strength.  n_max bounds the net
    laser-photon number summed over, and resonance_threshold is the
    cascade-pole exclusion distance in units of m_*^2.
    """

    electron_energy: float = 1000.0
    laser_omega: float = 2.5
    xi: float = 1.0
    n_max: int = 30
    resonance_threshold: float = 1e-3

    def laser(self) -> LaserConfig:
        return LaserConfig(omega=ev(self.laser_omega), xi=self.xi)


@dataclass(frozen=True)
class CutsBlock:
    """Phase-space cuts; energies in MeV, angles in rad.

    Azimuths always cover the full [0, 2pi) and are not configurable.
    """

    omega_b: tuple = (1e-3, 1.0)
    theta_b: tuple = (0.0, 1.5e-3)
    theta_c: tuple = (0.0, 1.5e-3)

    def to_phase_space(self) -> PhaseSpaceCuts:
        return PhaseSpaceCuts(
            omega_b_lo=ev(self.omega_b[0] * 1e6),
            omega_b_hi=ev(self.omega_b[1] * 1e6),
            theta_b_lo=self.theta_b[0],
            theta_b_hi=self.theta_b[1],
            theta_c_lo=self.theta_c[0],
            theta_c_hi=self.theta_c[1],
        )


@dataclass(frozen=True)
class AxisSpec:
    """One scanned coordinate: energies in MeV, angles in rad."""

    name: str
    lo: float
    hi: float
    points: int

    def grid(self):
        import numpy as np

        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class ScanBlock:
    """What to compute.

    The fixed-point fields (omega_b in MeV, angles in rad) pin the
    coordinates that are not scanned over; axes override them where they
    apply.  rate_map and concurrence_map take exactly two axes,
    rate_curve exactly one (theta_c), totals none.
    """

    observable: str = "totals"
    polarization: str = "summed"
    perturbative: bool = False
    omega_b: float = 1.0
    theta_b: float = 1e-3
    theta_c: float = 1e-3
    psi_b: float = 0.0
    psi_c: float = 0.0
    axes: tuple = ()


@dataclass(frozen=True)
class ExecutionBlock:
    """Worker count, RNG seed, Monte-Carlo budget and checkpointing.

    tolerance is the target relative statistical error for integrated
    cells; cells above it are reported, not failed.  An empty checkpoint
    path disables checkpointing.
    """

    workers: int = 1
    seed: int = 20260814
    samples: int = 4096
    tolerance: float = 0.05
    checkpoint: str = ""


@dataclass(frozen=True)
class OutputBlock:
    format: str = "csv"
    path: str = "scan"
    precision: int = 12


@dataclass(frozen=True)
class ScanConfig:
    physics: PhysicsBlock = field(default_factory=PhysicsBlock)
    cuts: CutsBlock = field(default_factory=CutsBlock)
    scan: ScanBlock = field(default_factory=ScanBlock)
    execution: ExecutionBlock = field(default_factory=ExecutionBlock)
    output: OutputBlock = field(default_factory=OutputBlock)


# Field schema: key -> (kind, extra).  Kinds: unit-bearing scalars and
# ranges name their canonical table; plain kinds are float/int/bool/word.
_SCHEMAS = {
    "physics": {
        "electron_energy": ("scalar", "energy_me"),
        "laser_omega": ("scalar", "energy_ev"),
        "xi": ("float", None),
        "n_max": ("int", None),
        "resonance_threshold": ("float", None),
    },
    "cuts": {
        "omega_b": ("range", "energy_mev"),
        "theta_b": ("range", "angle"),
        "theta_c": ("range", "angle"),
    },
    "scan": {
        "observable": ("word", OBSERVABLES),
        "polarization": ("word", POLARIZATIONS),
        "perturbative": ("bool", None),
        "omega_b": ("scalar", "energy_mev"),
        "theta_b": ("scalar", "angle"),
        "theta_c": ("scalar", "angle"),
        "psi_b": ("scalar", "angle"),
        "psi_c": ("scalar", "angle"),
    },
    "execution": {
        "workers": ("int", None),
        "seed": ("int", None),
        "samples": ("int", None),
        "tolerance": ("float", None),
        "checkpoint": ("word", None),
    },
    "output": {
        "format": ("word", ("csv",)),
        "path": ("word", None),
        "precision": ("int", None),
    },
}

_AXIS_SCHEMA = {
    "name": ("word", AXIS_NAMES),
    "range": ("range", None),  # unit table chosen by the axis name
    "points": ("int", None),
}

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_UNIT = r"[A-Za-z_][A-Za-z0-9_]*"
_OPEN_RE = re.compile(r"^([a-z_][a-z0-9_]*)\s*\{$")
_CLOSE_RE = re.compile(r"^\}$")
_KV_RE = re.compile(r"^([a-z_][a-z0-9_]*)\s*=\s*(.+)$")
_SCALAR_RE = re.compile(rf"^({_NUM})(?:\s+({_UNIT}))?$")
_RANGE_RE = re.compile(
    rf"^({_NUM})(?:\s+({_UNIT}))?\s*\.\.\s*({_NUM})(?:\s+({_UNIT}))?$"
)
_INT_RE = re.compile(r"^[+-]?\d+$")
_WORD_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.\-/]*$")


def _convert(value, unit, table_name, line, errors, what):
    table = _UNIT_TABLES[table_name]
    if unit is None:
        errors.append((line, f"{what}: unit required "
                             f"(one of {', '.join(sorted(table))})"))
        return None
    factor = table.get(unit.lower())
    if factor is None:
        errors.append((line, f"{what}: unknown unit {unit!r} "
                             f"(one of {', '.join(sorted(table))})"))
        return None
    return value * factor


def _parse_scalar(raw, table_name, line, errors, what):
    m = _SCALAR_RE.match(raw)
    if not m:
        errors.append((line, f"{what}: expected 'NUMBER UNIT', got {raw!r}"))
        return None
    return _convert(float(m.group(1)), m.group(2), table_name, line, errors, what)


def _parse_range(raw, table_name, line, errors, what):
    m = _RANGE_RE.match(raw)
    if not m:
        errors.append((line, f"{what}: expected 'LO .. HI UNIT', got {raw!r}"))
        return None
    lo_raw, lo_unit, hi_raw, hi_unit = m.groups()
    # A single trailing unit distributes over both endpoints.
    if lo_unit is None:
        lo_unit = hi_unit
    if hi_unit is None:
        hi_unit = lo_unit
    lo = _convert(float(lo_raw), lo_unit, table_name, line, errors, what)
    hi = _convert(float(hi_raw), hi_unit, table_name, line, errors, what)
    if lo is None or hi is None:
        return None
    if not lo < hi:
        errors.append((line, f"{what}: range must be ordered, got {raw!r}"))
        return None
    return (lo, hi)


def _parse_leaf(raw, kind, extra, line, errors, what):
    if kind == "scalar":
        return _parse_scalar(raw, extra, line, errors, what)
    if kind == "range":
        return _parse_range(raw, extra, line, errors, what)
    if kind == "float":
        m = _SCALAR_RE.match(raw)
        if not m or m.group(2) is not None:
            errors.append((line, f"{what}: expected a plain number, got {raw!r}"))
            return None
        return float(m.group(1))
    if kind == "int":
        if not _INT_RE.match(raw):
            errors.append((line, f"{what}: expected an integer, got {raw!r}"))
            return None
        return int(raw)
    if kind == "bool":
        if raw not in ("true", "false"):
            errors.append((line, f"{what}: expected true or false, got {raw!r}"))
            return None
        return raw == "true"
    if kind == "word":
        if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
            raw = raw[1:-1]
        if not _WORD_RE.match(raw):
            errors.append((line, f"{what}: malformed value {raw!r}"))
            return None
        if extra is not None and raw not in extra:
            errors.append((line, f"{what}: must be one of "
                                 f"{', '.join(extra)}, got {raw!r}"))
            return None
        return raw
    raise AssertionError(kind)


def _tokenize(text, errors):
    """Split into (kind, payload, line) events; kind in open/close/kv."""
    events = []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        m = _OPEN_RE.match(line)
        if m:
            events.append(("open", m.group(1), lineno))
            continue
        if _CLOSE_RE.match(line):
            events.append(("close", None, lineno))
            continue
        m = _KV_RE.match(line)
        if m:
            events.append(("kv", (m.group(1), m.group(2).strip()), lineno))
            continue
        errors.append((lineno, f"cannot parse line: {rawline.strip()!r}"))
    return events


def _collect_blocks(events, errors):
    """Group events into {block: [(key, raw, line)]} plus scan axes."""
    blocks = {}
    axes = []
    stack = []  # list of (name, line)
    current_axis = None
    for kind, payload, line in events:
        if kind == "open":
            if not stack:
                if payload not in _SCHEMAS:
                    errors.append((line, f"unknown block {payload!r} (expected "
                                         f"{', '.join(_SCHEMAS)})"))
                    stack.append((payload, line))
                    continue
                if payload in blocks:
                    errors.append((line, f"block {payload!r} appears twice"))
                blocks.setdefault(payload, [])
                stack.append((payload, line))
            elif len(stack) == 1 and stack[0][0] == "scan" and payload == "axis":
                current_axis = {"_line": line}
                axes.append(current_axis)
                stack.append((payload, line))
            else:
                errors.append((line, f"block {payload!r} not allowed here"))
                stack.append((payload, line))
        elif kind == "close":
            if not stack:
                errors.append((line, "unmatched '}'"))
                continue
            name, _ = stack.pop()
            if name == "axis":
                current_axis = None
        else:
            key, raw = payload
            if not stack:
                errors.append((line, f"key {key!r} outside any block"))
            elif stack[-1][0] == "axis" and current_axis is not None:
                if key in current_axis:
                    errors.append((line, f"axis key {key!r} repeated"))
                current_axis[key] = (raw, line)
            elif stack[-1][0] in _SCHEMAS and len(stack) == 1:
                if any(k == key for k, _, _ in blocks.get(stack[-1][0], ())):
                    errors.append((line, f"key {key!r} repeated in block "
                                         f"{stack[-1][0]!r}"))
                blocks.setdefault(stack[-1][0], []).append((key, raw, line))
            # keys inside an unknown block were already reported once
    for name, line in stack:
        errors.append((line, f"block {name!r} is never closed"))
    return blocks, axes


def _build_axis(axis_dict, errors):
    line0 = axis_dict.pop("_line")
    parsed = {}
    for key, (raw, line) in axis_dict.items():
        if key not in _AXIS_SCHEMA:
            errors.append((line, f"unknown axis key {key!r}"))
            continue
        kind, extra = _AXIS_SCHEMA[key]
        if key == "range":
            parsed[key] = (raw, line)  # needs the name first
        else:
            val = _parse_leaf(raw, kind, extra, line, errors, f"axis.{key}")
            if val is not None:
                parsed[key] = val
    name = parsed.get("name")
    if name is None:
        errors.append((line0, "axis block needs a name"))
        return None
    table = "energy_mev" if name == "omega_b" else "angle"
    if "range" not in parsed:
        errors.append((line0, f"axis {name!r} needs a range"))
        return None
    raw, line = parsed["range"]
    rng = _parse_range(raw, table, line, errors, f"axis.{name}.range")
    points = parsed.get("points")
    if points is None:
        errors.append((line0, f"axis {name!r} needs points"))
        return None
    if points < 2:
        errors.append((line0, f"axis {name!r}: points must be >= 2"))
        return None
    if rng is None:
        return None
    return AxisSpec(name=name, lo=rng[0], hi=rng[1], points=points)


_BLOCK_TYPES = {
    "physics": PhysicsBlock,
    "cuts": CutsBlock,
    "scan": ScanBlock,
    "execution": ExecutionBlock,
    "output": OutputBlock,
}


def _validate_semantics(cfg, errors):
    p, c, s, e, o = cfg.physics, cfg.cuts, cfg.scan, cfg.execution, cfg.output
    if p.electron_energy <= 1.0:
        errors.append((0, "physics.electron_energy must exceed the electron "
                          "mass (1 m_e)"))
    if p.laser_omega <= 0:
        errors.append((0, "physics.laser_omega must be positive"))
    if p.xi <= 0:
        errors.append((0, "physics.xi must be positive"))
    if p.n_max < 1:
        errors.append((0, "physics.n_max must be at least 1"))
    if p.resonance_threshold <= 0:
        errors.append((0, "physics.resonance_threshold must be positive"))
    if c.omega_b[0] <= 0:
        errors.append((0, "cuts.omega_b lower edge must be positive"))
    for nm in ("theta_b", "theta_c"):
        lo, hi = getattr(c, nm)
        if lo < 0 or hi > math.pi:
            errors.append((0, f"cuts.{nm} must lie within [0, pi] rad"))
    if s.omega_b <= 0:
        errors.append((0, "scan.omega_b must be positive"))
    if e.workers < 1:
        errors.append((0, "execution.workers must be at least 1"))
    if e.samples < 16:
        errors.append((0, "execution.samples must be at least 16"))
    if e.tolerance <= 0:
        errors.append((0, "execution.tolerance must be positive"))
    if e.seed < 0:
        errors.append((0, "execution.seed must be nonnegative"))
    if not 3 <= o.precision <= 17:
        errors.append((0, "output.precision must be between 3 and 17"))

    need = {"rate_map": 2, "concurrence_map": 2, "rate_curve": 1, "totals": 0}
    n_axes = len(s.axes)
    if n_axes != need[s.observable]:
        errors.append((0, f"scan.observable {s.observable!r} takes exactly "
                          f"{need[s.observable]} axis block(s), got {n_axes}"))
    names = [a.name for a in s.axes]
    if len(set(names)) != len(names):
        errors.append((0, "axis names must be distinct"))
    if s.observable == "rate_curve" and names and names != ["theta_c"]:
        errors.append((0, "rate_curve scans theta_c; use an axis named "
                          "theta_c"))
    for a in s.axes:
        if a.name in ("psi_b", "psi_c") and (a.lo < 0 or a.hi > TWO_PI):
            errors.append((0, f"axis {a.name!r} must lie within [0, 2pi] rad"))
        if a.name in ("theta_b", "theta_c") and (a.lo < 0 or a.hi > math.pi):
            errors.append((0, f"axis {a.name!r} must lie within [0, pi] rad"))
        if a.name == "omega_b" and a.lo <= 0:
            errors.append((0, "axis 'omega_b' must start above 0"))


def parse_config(text: str) -> ScanConfig:
    """Parse config text into a fully-resolved ScanConfig.

    Missing blocks and keys fall back to defaults (the standard cuts are
    the documented defaults).  Raises ConfigError carrying every problem
    found, each anchored to its line where one exists.
    """
    errors = []
    events = _tokenize(text, errors)
    blocks, axis_dicts = _collect_blocks(events, errors)

    built = {}
    for block_name, schema in _SCHEMAS.items():
        values = {}
        for key, raw, line in blocks.get(block_name, ()):
            if key not in schema:
                errors.append((line, f"unknown key {key!r} in block "
                                     f"{block_name!r}"))
                continue
            kind, extra = schema[key]
            val = _parse_leaf(raw, kind, extra, line, errors,
                              f"{block_name}.{key}")
            if val is not None:
                values[key] = val
        built[block_name] = values

    axes = []
    for axis_dict in axis_dicts:
        spec = _build_axis(axis_dict, errors)
        if spec is not None:
            axes.append(spec)
    if axes:
        built["scan"]["axes"] = tuple(axes)

    cfg = ScanConfig(**{
        name: _BLOCK_TYPES[name](**vals) for name, vals in built.items()
    })
    _validate_semantics(cfg, errors)
    if errors:
        deduped = list(dict.fromkeys(errors))
        deduped.sort(key=lambda it: it[0] if it[0] else 1 << 30)
        raise ConfigError(deduped)
    return cfg


def load_config(path) -> ScanConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def serialize_config(cfg: ScanConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    lines = []
    for block_name in _SCHEMAS:
        block = getattr(cfg, block_name)
        lines.append(f"{block_name} {{")
        schema = _SCHEMAS[block_name]
        for key, (kind, extra) in schema.items():
            value = getattr(block, key)
            if kind == "scalar":
                lines.append(f"  {key} = {_fmt(value)} {_CANONICAL_UNIT[extra]}")
            elif kind == "range":
                lines.append(f"  {key} = {_fmt(value[0])} .. {_fmt(value[1])} "
                             f"{_CANONICAL_UNIT[extra]}")
            elif kind == "word":
                if value != "":
                    lines.append(f"  {key} = {value}")
            else:
                lines.append(f"  {key} = {_fmt(value)}")
        if block_name == "scan":
            for a in cfg.scan.axes:
                unit = "MeV" if a.name == "omega_b" else "rad"
                lines.append("  axis {")
                lines.append(f"    name = {a.name}")
                lines.append(f"    range = {_fmt(a.lo)} .. {_fmt(a.hi)} {unit}")
                lines.append(f"    points = {a.points}")
                lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + "\n"


def normalized_for_digest(cfg: ScanConfig) -> ScanConfig:
    """Strip the knobs that cannot change computed values.

    Worker count, checkpoint path and output location influence neither
    the numbers nor the file contents, so result identity (and hence the
    digest and the config text embedded in outputs) ignores them.
    """
    return replace(
        cfg,
        execution=replace(cfg.execution, workers=1, checkpoint=""),
        output=replace(cfg.output, path="scan"),
    )


def config_hash(cfg: ScanConfig) -> str:
    """Short content hash identifying the computation (see above)."""
    text = serialize_config(normalized_for_digest(cfg))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def with_overrides(cfg: ScanConfig, *, workers=None, seed=None,
                   resolution=None, perturbative=None, out=None) -> ScanConfig:
    """Apply command-line overrides onto a parsed config."""
    execution = cfg.execution
    if workers is not None:
        execution = replace(execution, workers=int(workers))
    if seed is not None:
        execution = replace(execution, seed=int(seed))
    scan = cfg.scan
    if resolution is not None:
        if resolution < 2:
            raise ConfigError([(0, "--resolution must be at least 2")])
        scan = replace(scan, axes=tuple(
            replace(a, points=int(resolution)) for a in scan.axes))
    if perturbative:
        scan = replace(scan, perturbative=True)
    output = cfg.output
    if out is not None:
        output = replace(output, path=str(out))
    return replace(cfg, scan=scan, execution=execution, output=output)


__all__ = [
    "AXIS_NAMES",
    "AxisSpec",
    "ConfigError",
    "CutsBlock",
    "ExecutionBlock",
    "OBSERVABLES",
    "OutputBlock",
    "PhysicsBlock",
    "POLARIZATIONS",
    "ScanBlock",
    "ScanConfig",
    "config_hash",
    "load_config",
    "normalized_for_digest",
    "parse_config",
    "serialize_config",
    "with_overrides",
]
