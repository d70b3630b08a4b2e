"""Run configuration: a JSON file with five blocks, validated with field-level diagnostics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from .ode import PotentialSpec
from .spectrum import SearchBox, _box_outside_sector

SUITES = ("sign", "monotonicity", "zeros", "green", "convexity", "ortho", "symmetry")


class ConfigError(ValueError):
    pass


@dataclass
class PotentialBlock:
    n: int = 1
    a: list | None = None
    b: list | None = None
    g: float = 1.0
    shift_imag: float = 0.0

    def spec(self) -> PotentialSpec:
        if self.a is None and self.b is None:
            return PotentialSpec.canonical(self.n, g=self.g, xi=1j * self.shift_imag)
        a = self.a if self.a is not None else [0.0] * (self.n + 1)
        b = self.b if self.b is not None else [0.0] * self.n + [float((-1) ** (self.n + 1))]
        return PotentialSpec(self.n, a, b, self.g, 1j * self.shift_imag)


@dataclass
class SolverBlock:
    L: float | None = None
    tol: float = 1e-12
    count_tol: float = 1e-9
    box: list = field(default_factory=lambda: [0.0, -15.0, 40.0, 15.0])   # re_lo, im_lo, re_hi, im_hi
    max_eigenvalues: int | None = None
    sector_prune: bool = True
    slack: float = 0.05

    def search_box(self) -> SearchBox:
        b = self.box
        return SearchBox(complex(b[0], b[1]), complex(b[2], b[3]))


@dataclass
class GridBlock:
    rect: list = field(default_factory=lambda: [-6.0, 6.0, -4.0, 6.0])
    nx: int = 241
    ny: int = 201


@dataclass
class VerificationBlock:
    suites: list = field(default_factory=lambda: list(SUITES))
    eigen_index: int = 0
    green_paths: int = 10
    seed: int = 0
    green_limit: float = 1e-7
    convexity_rect: list = field(default_factory=lambda: [-12.0, 12.0, -2.0, 2.0])
    convexity_nx: int = 2401
    convexity_ny: int = 161
    y_values: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    ortho_depth: int = 3
    ortho_degree_cap: int = 16
    census_heights: list = field(default_factory=lambda: [10.0, 16.0])


@dataclass
class OutputBlock:
    directory: str = "pt-spectra-out"
    formats: list = field(default_factory=lambda: ["json", "csv"])


@dataclass
class RunConfig:
    potential: PotentialBlock = field(default_factory=PotentialBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    verification: VerificationBlock = field(default_factory=VerificationBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> RunConfig:
        p, s, g, v = self.potential, self.solver, self.grid, self.verification
        _check(isinstance(p.n, int) and p.n >= 1, "potential.n", "must be a positive integer")
        for name in ("a", "b"):
            val = getattr(p, name)
            _check(val is None or (isinstance(val, list) and len(val) == p.n + 1),
                   f"potential.{name}", f"must list n+1 = {p.n + 1} numbers")
        _check(p.g != 0, "potential.g", "must be nonzero")
        try:
            p.spec()
        except ValueError as exc:
            raise ConfigError(f"potential: {exc}") from None
        for name in ("tol", "count_tol", "slack"):
            _check(getattr(s, name) > 0, f"solver.{name}", "must be > 0")
        _check(s.L is None or s.L > 0, "solver.L", "must be > 0 or null")
        _check(isinstance(s.box, list) and len(s.box) == 4, "solver.box", "must be [re_lo, im_lo, re_hi, im_hi]")
        try:
            box = s.search_box()
        except ValueError as exc:
            raise ConfigError(f"solver.box: {exc}") from None
        if s.sector_prune:
            _check(not _box_outside_sector(box, p.n, s.slack), "solver.box",
                   f"lies wholly outside |arg lambda| <= pi/{2 * p.n + 3} (+ slack); "
                   "use --no-sector-prune to search there anyway")
        _check(s.max_eigenvalues is None or s.max_eigenvalues >= 1, "solver.max_eigenvalues", "must be >= 1")
        _check(len(g.rect) == 4 and g.rect[0] < g.rect[1] and g.rect[2] < g.rect[3], "grid.rect",
               "must be [x_lo, x_hi, y_lo, y_hi] with lo < hi")
        _check(g.nx >= 9 and g.ny >= 9, "grid.nx/ny", "must both be >= 9")
        bad = [x for x in v.suites if x not in SUITES]
        _check(not bad, "verification.suites", f"unknown suite(s) {bad}; choose from {list(SUITES)}")
        _check(v.convexity_nx >= 9 and v.convexity_ny >= 9, "verification.convexity_nx/ny", "must both be >= 9")
        _check(v.green_limit > 0, "verification.green_limit", "must be > 0")
        _check(len(v.census_heights) == 2 and 0 < v.census_heights[0] < v.census_heights[1],
               "verification.census_heights", "must be two increasing positive heights")
        fmts = [f for f in self.output.formats if f not in ("json", "csv")]
        _check(not fmts, "output.formats", f"unknown format(s) {fmts}")
        return self


def _check(ok: bool, where: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"{where}: {msg}")


_BLOCKS = {"potential": PotentialBlock, "solver": SolverBlock, "grid": GridBlock,
           "verification": VerificationBlock, "output": OutputBlock}


# fields whose default is null, with the type they take otherwise
_NULLABLE = {"potential.a": [0.0], "potential.b": [0.0], "solver.L": 1.0, "solver.max_eigenvalues": 1}


def _coerce(where: str, default: Any, value: Any) -> Any:
    if value is None:
        return None
    if default is None:
        default = _NULLABLE[where]
    if isinstance(default, list) and default and isinstance(value, list):
        return [_coerce(f"{where}[{i}]", default[0], v) for i, v in enumerate(value)]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ConfigError(f"{where}: expected a finite number, got {value!r}")
        return float(value)
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list, got {value!r}")
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    unknown = set(doc) - set(_BLOCKS) - {"schema"}
    if unknown:
        raise ConfigError(f"top level: unknown block(s) {sorted(unknown)}")
    blocks = {}
    for name, cls in _BLOCKS.items():
        raw = doc.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"{name}: expected an object")
        default = cls()
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"{name}: unknown field(s) {sorted(extra)}")
        kw = {k: _coerce(f"{name}.{k}", getattr(default, k), v) for k, v in raw.items()}
        blocks[name] = cls(**kw)
    return RunConfig(**blocks).validate()


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return config_from_dict(doc)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))
