"""
Scenario Configuration
======================

TOML scenario files (grammar in docs/FORMATS.md, `format_version = 1`).

    name = "plate"
    mode = "antiplane"          # antiplane | planar
    T = 1.0
    steps = 64
    beta = 1.0

    [geometry]                  # width, height, nx, ny, dirichlet_sides | mesh_file
    [crack]                     # nodes = [...] | points = [[x, y], ...]
    [crack.front]               # times/lengths | linear = true | frozen = s
    [materials]                 # A = {lambda, mu}, B = {...}, [[materials.regions]] | table
    [data]                      # f, F, z, N, u0, u1, w0 | past_history | past_strain
    [solver]                    # method, cg_rtol
    [checks]                    # enabled + per-check toggles and tolerances
    [output]                    # directory, snapshot_times

Missing required keys raise ConfigurationError naming the key and, when
the source text is known, the line of the section it belongs to.
"""

import logging
import os
import re
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional

import toml

import config
from errors import ConfigurationError
from mesh import MODES, SIDES

logger = logging.getLogger(__name__)


@dataclass
class GeometryConfig:
    width: float = 1.0
    height: float = 1.0
    nx: Optional[int] = None
    ny: Optional[int] = None
    dirichlet_sides: List[str] = field(default_factory=lambda: list(SIDES))
    mesh_file: Optional[str] = None


@dataclass
class CrackConfig:
    nodes: Optional[List[int]] = None
    points: Optional[List[List[float]]] = None
    front_times: Optional[List[float]] = None
    front_lengths: Optional[List[float]] = None
    linear: bool = False
    frozen_length: Optional[float] = None


@dataclass
class MaterialsConfig:
    A: Dict[str, float] = field(default_factory=dict)
    B: Dict[str, float] = field(default_factory=dict)
    regions: List[Dict[str, Any]] = field(default_factory=list)
    table: Optional[str] = None


@dataclass
class DataConfig:
    f: Any = 0.0
    F: Any = 0.0
    z: Any = 0.0
    N: Any = None
    u0: Any = 0.0
    u1: Any = 0.0
    w0: Any = None
    past_history: Optional[str] = None
    past_strain: Optional[List[str]] = None
    history_window: Optional[float] = None
    history_samples: int = 4001


@dataclass
class SolverConfig:
    method: str = field(default_factory=lambda: config.SOLVER)
    cg_rtol: float = field(default_factory=lambda: config.CG_RTOL)


@dataclass
class ChecksConfig:
    enabled: bool = True
    balance: bool = True
    discrete_inequality: bool = True
    inequality: bool = True
    equivalence: bool = True
    equivalence_refined: bool = True
    attainment: bool = True
    u_only: bool = True
    balance_rtol: float = field(default_factory=lambda: config.BALANCE_RTOL)
    slack_tol: float = field(default_factory=lambda: config.SLACK_TOL)
    slack_tau_factor: float = field(default_factory=lambda: config.SLACK_TAU_FACTOR)

    def active(self, name: str) -> bool:
        return self.enabled and bool(getattr(self, name))


@dataclass
class OutputConfig:
    directory: Optional[str] = None
    snapshot_times: List[float] = field(default_factory=list)


@dataclass
class ScenarioConfig:
    """Validated scenario with defaults applied."""
    name: str
    mode: str
    T: float
    steps: int
    beta: float
    geometry: GeometryConfig
    crack: CrackConfig
    materials: MaterialsConfig
    data: DataConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    format_version: int = config.FORMAT_VERSION
    source: Optional[str] = None

    def with_steps(self, steps: int) -> "ScenarioConfig":
        return replace(self, steps=int(steps))

    def output_dir(self) -> str:
        return self.output.directory or os.path.join(config.OUTPUT_DIR, self.name)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# ==================== PARSING ====================

def _line_of(text: Optional[str], section: str, key: Optional[str] = None) -> Optional[int]:
    """Line of `key` inside `[section]` (or of the section header) in TOML text."""
    if not text:
        return None
    current = ""
    header_line = 1 if not section else None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        match = re.match(r"^\[\[?\s*([^\]]+?)\s*\]\]?", stripped)
        if match:
            current = match.group(1)
            if current == section and header_line is None:
                header_line = number
            continue
        if key and current == section and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return number
    return header_line


class _Reader:
    def __init__(self, raw: Dict[str, Any], text: Optional[str], base_dir: Optional[str]):
        self.raw = raw
        self.text = text
        self.base_dir = base_dir

    def error(self, message: str, section: str, key: Optional[str] = None) -> ConfigurationError:
        name = f"{section}.{key}" if section and key else (key or section)
        return ConfigurationError(message, key=name, line=_line_of(self.text, section, key))

    def section(self, name: str, required: bool = False) -> Dict[str, Any]:
        node: Any = self.raw
        for part in name.split("."):
            node = node.get(part) if isinstance(node, dict) else None
            if node is None:
                break
        if node is None:
            if required:
                raise self.error(f"missing required section [{name}]", "", name)
            return {}
        if not isinstance(node, dict):
            raise self.error(f"[{name}] must be a table", "", name)
        return node

    def get(self, table: Dict[str, Any], section: str, key: str, kind=None, default=None,
            required: bool = False):
        if key not in table:
            if required:
                raise self.error(f"missing required key '{key}'", section, key)
            return default
        value = table[key]
        if kind is not None:
            try:
                value = kind(value)
            except (TypeError, ValueError):
                raise self.error(f"'{key}' must be {kind.__name__}, got {value!r}", section, key) from None
        return value

    def path(self, value: Optional[str], section: str, key: str) -> Optional[str]:
        if value is None:
            return None
        resolved = value if os.path.isabs(value) or not self.base_dir else os.path.join(self.base_dir, value)
        if not os.path.exists(resolved):
            raise self.error(f"referenced file does not exist: {resolved}", section, key)
        return resolved


def _data_paths(reader: _Reader, value: Any, key: str) -> Any:
    if isinstance(value, dict) and "csv" in value:
        return dict(value, csv=reader.path(value["csv"], "data", key))
    if isinstance(value, list):
        return [_data_paths(reader, v, key) for v in value]
    return value


def parse_config_dict(raw: Dict[str, Any], text: Optional[str] = None,
                      base_dir: Optional[str] = None, source: Optional[str] = None) -> ScenarioConfig:
    """Validate a scenario mapping (parsed TOML or a built-in scenario)."""
    r = _Reader(raw, text, base_dir)

    version = r.get(raw, "", "format_version", int, config.FORMAT_VERSION)
    if version > config.FORMAT_VERSION:
        raise r.error(f"format_version {version} is newer than supported {config.FORMAT_VERSION}",
                      "", "format_version")
    name = r.get(raw, "", "name", str, os.path.splitext(os.path.basename(source))[0] if source else "scenario")
    mode = r.get(raw, "", "mode", str, "antiplane")
    if mode not in MODES:
        raise r.error(f"mode must be one of {sorted(MODES)}, got '{mode}'", "", "mode")
    beta = r.get(raw, "", "beta", float, required=True)
    if not beta > 0:
        raise r.error(f"beta must be positive, got {beta}", "", "beta")
    T = r.get(raw, "", "T", float, required=True)
    if not T > 0:
        raise r.error(f"T must be positive, got {T}", "", "T")
    steps = r.get(raw, "", "steps", int, required=True)
    if steps < 2:
        raise r.error(f"steps must be at least 2, got {steps}", "", "steps")

    g = r.section("geometry", required=True)
    geometry = GeometryConfig(
        width=r.get(g, "geometry", "width", float, 1.0),
        height=r.get(g, "geometry", "height", float, 1.0),
        dirichlet_sides=list(r.get(g, "geometry", "dirichlet_sides", list, list(SIDES))),
        mesh_file=r.path(r.get(g, "geometry", "mesh_file", str), "geometry", "mesh_file"),
    )
    if geometry.mesh_file is None:
        geometry.nx = r.get(g, "geometry", "nx", int, required=True)
        geometry.ny = r.get(g, "geometry", "ny", int, required=True)
    bad_sides = set(geometry.dirichlet_sides) - set(SIDES)
    if bad_sides:
        raise r.error(f"unknown sides {sorted(bad_sides)}", "geometry", "dirichlet_sides")

    c = r.section("crack")
    front = r.section("crack.front")
    crack = CrackConfig(
        nodes=r.get(c, "crack", "nodes", list),
        points=r.get(c, "crack", "points", list),
        front_times=r.get(front, "crack.front", "times", list),
        front_lengths=r.get(front, "crack.front", "lengths", list),
        linear=r.get(front, "crack.front", "linear", bool, False),
        frozen_length=r.get(front, "crack.front", "frozen", float),
    )
    if crack.nodes and crack.points:
        raise r.error("give crack 'nodes' or 'points', not both", "crack", "points")
    if (crack.front_times is None) != (crack.front_lengths is None):
        raise r.error("crack front needs both 'times' and 'lengths'", "crack.front", "lengths")

    m = r.section("materials", required=True)
    materials = MaterialsConfig(table=r.path(r.get(m, "materials", "table", str), "materials", "table"))
    if materials.table is None:
        for which in ("A", "B"):
            tensor = r.get(m, "materials", which, dict, required=True)
            if "mu" not in tensor:
                raise r.error(f"materials.{which} needs 'mu'", "materials", which)
            materials.__setattr__(which, {k: float(v) for k, v in tensor.items()})
        for region in r.get(m, "materials", "regions", list, []):
            if not {"where", "A", "B"} <= set(region):
                raise r.error("each region needs 'where', 'A' and 'B'", "materials.regions")
            materials.regions.append(region)

    d = r.section("data")
    data = DataConfig(
        f=_data_paths(r, d.get("f", 0.0), "f"),
        F=_data_paths(r, d.get("F", 0.0), "F"),
        z=_data_paths(r, d.get("z", 0.0), "z"),
        N=_data_paths(r, d.get("N"), "N"),
        u0=d.get("u0", 0.0),
        u1=d.get("u1", 0.0),
        w0=d.get("w0"),
        past_history=r.path(r.get(d, "data", "past_history", str), "data", "past_history"),
        past_strain=r.get(d, "data", "past_strain", list),
        history_window=r.get(d, "data", "history_window", float),
        history_samples=r.get(d, "data", "history_samples", int, 4001),
    )
    if data.N is not None and set(geometry.dirichlet_sides) == set(SIDES) and geometry.mesh_file is None:
        raise r.error("traction N given but every side is dirichlet", "data", "N")

    s = r.section("solver")
    solver = SolverConfig(method=r.get(s, "solver", "method", str, config.SOLVER),
                          cg_rtol=r.get(s, "solver", "cg_rtol", float, config.CG_RTOL))
    if solver.method not in ("direct", "cg"):
        raise r.error(f"solver method must be 'direct' or 'cg', got '{solver.method}'", "solver", "method")

    ch = r.section("checks")
    checks = ChecksConfig()
    for key in ("enabled", "balance", "discrete_inequality", "inequality", "equivalence",
                "equivalence_refined", "attainment", "u_only"):
        setattr(checks, key, r.get(ch, "checks", key, bool, getattr(checks, key)))
    for key in ("balance_rtol", "slack_tol", "slack_tau_factor"):
        setattr(checks, key, r.get(ch, "checks", key, float, getattr(checks, key)))

    o = r.section("output")
    output = OutputConfig(directory=r.get(o, "output", "directory", str),
                          snapshot_times=[float(t) for t in r.get(o, "output", "snapshot_times", list, [T])])
    for t in output.snapshot_times:
        if not 0 <= t <= T:
            raise r.error(f"snapshot time {t} outside [0, {T}]", "output", "snapshot_times")

    return ScenarioConfig(name=name, mode=mode, T=T, steps=steps, beta=beta, geometry=geometry,
                          crack=crack, materials=materials, data=data, solver=solver,
                          checks=checks, output=output, format_version=version, source=source)


def parse_config(path: str) -> ScenarioConfig:
    """Read and validate a TOML scenario file."""
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigurationError(f"cannot read scenario file {path}: {e}") from None
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigurationError(f"invalid TOML in {path}: {e}", line=getattr(e, "lineno", None)) from None
    cfg = parse_config_dict(raw, text=text, base_dir=os.path.dirname(os.path.abspath(path)), source=path)
    logger.info("Loaded scenario '%s' from %s", cfg.name, path)
    return cfg
