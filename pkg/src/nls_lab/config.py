"""Scenario configuration: strict parsing of flat TOML sections.

Recognized sections and keys::

    [grid]     dim, N, L
    [initial]  kind = "gaussian" | "plane_wave" | "file",
               amplitude, width, center, k, path
    [solver]   lambda, p, T, dt, scheme, picard_max_iters, picard_tol,
               strichartz_q, strichartz_r, strichartz_C, blowup_threshold,
               dealias
    [output]   dir, snapshot_stride, seed

Unknown sections or keys are fatal.
"""

from __future__ import annotations

import difflib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .functionals import INF, validate_pair
from .solver import SolverConfig
from .spectral import Field, Grid, make_grid, sample


class ConfigError(ValueError):
    pass


_KEYS = {
    "grid": {"dim", "N", "L"},
    "initial": {"kind", "amplitude", "width", "center", "k", "path"},
    "solver": {
        "lambda", "p", "T", "dt", "scheme", "picard_max_iters", "picard_tol",
        "strichartz_q", "strichartz_r", "strichartz_C", "blowup_threshold", "dealias",
    },
    "output": {"dir", "snapshot_stride", "seed"},
}
_REQUIRED = {
    "grid": {"dim", "N", "L"},
    "initial": {"kind"},
    "solver": {"lambda", "p", "T", "dt"},
}


@dataclass
class InitialSpec:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple[float, ...] = ()
    k: tuple[float, ...] = ()
    path: Path | None = None

    def build(self, grid: Grid) -> Field:
        d = grid.dim
        if self.kind == "gaussian":
            c = self.center or (0.0,) * d
            return sample(
                grid,
                lambda *x: self.amplitude * np.exp(-sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / (2 * self.width**2)),
            )
        if self.kind == "plane_wave":
            k = self.k or (grid.dk,) + (0.0,) * (d - 1)
            return sample(grid, lambda *x: self.amplitude * np.exp(1j * sum(ki * xi for ki, xi in zip(k, x))))
        from .io import read_snapshot

        u = read_snapshot(self.path)
        if u.grid != grid:
            raise ConfigError(f"snapshot {self.path} grid {u.grid} does not match [grid] {grid}")
        return u


@dataclass
class ScenarioConfig:
    grid: Grid
    initial: InitialSpec
    solver: SolverConfig
    out_dir: Path = Path("nls_out")
    snapshot_stride: int = 0
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    def initial_field(self) -> Field:
        return self.initial.build(self.grid)


def _line_of(err: tomli.TOMLDecodeError) -> str:
    m = re.search(r"line (\d+)", str(err))
    return m.group(1) if m else "?"


def _num(sec: dict, key: str, where: str, default=None, kind=float):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required field {where}.{key}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if isinstance(v, str) and v.lower() in ("inf", "infinity"):
            return INF
        raise ConfigError(f"field {where}.{key} must be numeric, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"field {where}.{key} must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _check_keys(doc: dict) -> None:
    for name, sec in doc.items():
        if name not in _KEYS:
            hint = difflib.get_close_matches(name, list(_KEYS), n=1)
            raise ConfigError(f"unknown section [{name}]" + (f"; did you mean [{hint[0]}]?" if hint else ""))
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a section")
        for key in sec:
            if key not in _KEYS[name]:
                hint = difflib.get_close_matches(key, sorted(_KEYS[name]), n=1)
                msg = f"unknown key {name}.{key}"
                raise ConfigError(msg + (f"; did you mean {hint[0]!r}?" if hint else ""))
    for name, req in _REQUIRED.items():
        if name not in doc:
            raise ConfigError(f"missing section [{name}]")
        missing = sorted(req - set(doc[name]))
        if missing:
            raise ConfigError(f"missing required field {name}.{missing[0]}")


def parse_config(text: str, base_dir: str | Path | None = None) -> ScenarioConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error at line {_line_of(exc)}: {exc}") from exc
    _check_keys(doc)
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    g = doc["grid"]
    try:
        grid = make_grid(_num(g, "dim", "grid", kind=int), _num(g, "N", "grid", kind=int), _num(g, "L", "grid"))
    except ValueError as exc:
        raise ConfigError(f"invalid [grid]: {exc}") from exc

    ini = doc["initial"]
    kind = ini["kind"]
    if kind not in ("gaussian", "plane_wave", "file"):
        raise ConfigError(f"initial.kind must be gaussian, plane_wave or file, got {kind!r}")
    spec = InitialSpec(kind=kind, amplitude=_num(ini, "amplitude", "initial", 1.0), width=_num(ini, "width", "initial", 1.0))
    for key in ("center", "k"):
        if key in ini:
            vec = ini[key]
            if not isinstance(vec, list) or len(vec) != grid.dim:
                raise ConfigError(f"initial.{key} must be a list of {grid.dim} numbers")
            setattr(spec, key, tuple(float(x) for x in vec))
    if not spec.width > 0:
        raise ConfigError("initial.width must be positive")
    if kind == "file":
        if "path" not in ini:
            raise ConfigError("missing required field initial.path for kind = 'file'")
        path = Path(ini["path"])
        path = path if path.is_absolute() else base / path
        if not path.exists():
            raise ConfigError(f"initial.path does not exist: {path}")
        spec.path = path

    s = doc["solver"]
    pair = None
    if "strichartz_q" in s or "strichartz_r" in s:
        try:
            pair = validate_pair(_num(s, "strichartz_q", "solver"), _num(s, "strichartz_r", "solver"), grid.dim)
        except ValueError as exc:
            raise ConfigError(f"invalid solver.strichartz pair: {exc}") from exc
    T, dt = _num(s, "T", "solver"), _num(s, "dt", "solver")
    if dt > T:
        raise ConfigError("dt exceeds T")
    try:
        solver = SolverConfig(
            lam=_num(s, "lambda", "solver"),
            p=_num(s, "p", "solver"),
            T=T,
            dt=dt,
            scheme=str(s.get("scheme", "strang")),
            picard_max_iters=_num(s, "picard_max_iters", "solver", 30, int),
            picard_tol=_num(s, "picard_tol", "solver", 1e-10),
            strichartz_pair=pair,
            strichartz_constant_C=_num(s, "strichartz_C", "solver", 1.0),
            blowup_threshold=_num(s, "blowup_threshold", "solver", 1e3),
            dealias=bool(s.get("dealias", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [solver]: {exc}") from exc

    o = doc.get("output", {})
    stride = _num(o, "snapshot_stride", "output", 0, int)
    if stride < 0:
        raise ConfigError("output.snapshot_stride must be >= 0")
    n, _ = solver.time_nodes()
    if stride and n % stride:
        raise ConfigError(f"output.snapshot_stride={stride} must divide the step count {n}")
    seed = _num(o, "seed", "output", 0, int)
    out = Path(o.get("dir", "nls_out"))
    out = out if out.is_absolute() else base / out
    if not all(math.isfinite(v) for v in (solver.lam, solver.p, solver.T, solver.dt)):
        raise ConfigError("solver fields must be finite")
    return ScenarioConfig(grid, spec, solver, out, stride, seed, doc)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    return parse_config(p.read_text(), base_dir=p.parent)
