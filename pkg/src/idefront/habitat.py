"""Periodic grids, coefficient fields and configuration loading."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .errors import ParseError, RangeError, SchemaError, ValidationError
from .kernel import Kernel, kernel_from_spec

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml


@dataclass(frozen=True)
class Grid:
    """Uniform grid on one period plus the truncated simulation line.

    Args:
        L: Period length.
        n: Points per period (at least 16; powers of two keep ``h*n == L``).
        sim_periods: Even number of periods in the simulation domain
            ``[-(sim_periods/2) L, (sim_periods/2) L)``.
    """

    L: float
    n: int
    sim_periods: int = 40

    def __post_init__(self):
        if not (math.isfinite(self.L) and self.L > 0):
            raise RangeError(f"grid.L must be positive, got {self.L!r}")
        if int(self.n) != self.n or self.n < 16:
            raise RangeError(f"grid.n must be an integer >= 16, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if (self.L / self.n) * self.n != self.L:
            raise RangeError(
                f"grid spacing L/n = {self.L / self.n!r} does not tile L={self.L!r} exactly; "
                "choose n a power of two")
        if int(self.sim_periods) != self.sim_periods or self.sim_periods < 4 or self.sim_periods % 2:
            raise RangeError(f"grid.sim_periods must be an even integer >= 4, got {self.sim_periods!r}")
        object.__setattr__(self, "sim_periods", int(self.sim_periods))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def x(self) -> np.ndarray:
        """Period grid points x_i = i h, i = 0..n-1."""
        return np.arange(self.n) * self.h

    @property
    def sim_size(self) -> int:
        return self.sim_periods * self.n

    @property
    def sim_x(self) -> np.ndarray:
        """Simulation grid points, starting at -(sim_periods/2) L."""
        return (np.arange(self.sim_size) - (self.sim_periods // 2) * self.n) * self.h

    def tile(self, values: np.ndarray) -> np.ndarray:
        """Repeat period values over the simulation domain."""
        return np.tile(np.asarray(values, dtype=float), self.sim_periods)


class PeriodicField:
    """Real values at the grid points of one period, extended L-periodically.

    Off-grid evaluation wraps ``x`` into ``[0, L)`` and interpolates linearly,
    including across the seam between ``x_{n-1}`` and ``L``.
    """

    __slots__ = ("values", "L")

    def __init__(self, values, L: float):
        v = np.array(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValidationError("a periodic field needs a 1-D array of at least 2 values")
        if not np.all(np.isfinite(v)):
            raise ValidationError("periodic field values must be finite")
        v.setflags(write=False)
        self.values = v
        self.L = float(L)

    @classmethod
    def constant(cls, c: float, grid: Grid) -> "PeriodicField":
        return cls(np.full(grid.n, float(c)), grid.L)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.L / self.n

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        t = np.mod(x, self.L) / self.h
        i0 = np.floor(t).astype(np.int64) % self.n
        f = t - np.floor(t)
        out = (1.0 - f) * self.values[i0] + f * self.values[(i0 + 1) % self.n]
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"PeriodicField(n={self.n}, L={self.L:g}, min={self.min():.6g}, max={self.max():.6g})"

    def __eq__(self, other):
        return (isinstance(other, PeriodicField) and self.L == other.L
                and np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def argmin_x(self) -> float:
        return float(np.argmin(self.values) * self.h)

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def to_csv(self, path) -> None:
        """Write columns ``x,value`` with round-trip float formatting."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for i, v in enumerate(self.values):
                w.writerow([repr(i * self.h), repr(float(v))])

    @classmethod
    def from_csv(cls, path, L: float) -> "PeriodicField":
        """Read a field written by :meth:`to_csv` (or any ``x,value`` table on the grid)."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != ["x", "value"]:
                raise SchemaError(f"{path}: expected columns 'x,value', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
        if not rows:
            raise SchemaError(f"{path}: no data rows")
        arr = np.array(rows)
        n = len(rows)
        expected = np.arange(n) * (L / n)
        if np.max(np.abs(arr[:, 0] - expected)) > 1e-9 * L:
            raise ValidationError(f"{path}: x column is not the uniform grid i*L/n on [0, {L:g})")
        return cls(arr[:, 1], L)


def piecewise_two_patch(L: float, L1: float, v_patch1: float, v_patch2: float,
                        grid: Grid) -> PeriodicField:
    """Field equal to ``v_patch1`` on [0, L1) and ``v_patch2`` on [L1, L).

    Grid point x_i = i h is the center of its quadrature cell and is
    classified by that coordinate; a point exactly at L1 goes right.
    """
    if not (0 < L1 < L):
        raise RangeError(f"patch breakpoint must lie in (0, {L:g}), got {L1!r}")
    if L != grid.L:
        raise RangeError(f"field period {L!r} differs from grid period {grid.L!r}")
    values = np.where(grid.x < L1, float(v_patch1), float(v_patch2))
    return PeriodicField(values, L)


_NAMES = ("r1", "r2", "C1", "C2", "a1", "a2")


@dataclass(frozen=True, eq=False)
class Habitat:
    """Coefficient fields of the two-species model on one period."""

    r1: PeriodicField
    r2: PeriodicField
    C1: PeriodicField
    C2: PeriodicField
    a1: PeriodicField
    a2: PeriodicField

    def __post_init__(self):
        n = self.r1.n
        for name in _NAMES:
            f = getattr(self, name)
            if f.n != n or f.L != self.r1.L:
                raise ValidationError(f"{name} is not on the same grid as r1")
        for name, bound, word in (("r1", 1.0, "exceed 1"), ("r2", 1.0, "exceed 1"),
                                  ("C1", 0.0, "be positive"), ("C2", 0.0, "be positive"),
                                  ("a1", 0.0, "be positive"), ("a2", 0.0, "be positive")):
            f = getattr(self, name)
            if not np.all(f.values > bound):
                raise ValidationError(
                    f"{name} must {word} everywhere; min {f.min():g} at x={f.argmin_x():g}")

    @property
    def L(self) -> float:
        return self.r1.L

    @property
    def n(self) -> int:
        return self.r1.n

    @property
    def b1(self) -> PeriodicField:
        return PeriodicField((self.r1.values - 1.0) / self.C1.values, self.L)

    @property
    def b2(self) -> PeriodicField:
        return PeriodicField((self.r2.values - 1.0) / self.C2.values, self.L)

    @classmethod
    def constant(cls, grid: Grid, r1: float, r2: float, C1: float, C2: float,
                 a1: float, a2: float) -> "Habitat":
        c = PeriodicField.constant
        return cls(c(r1, grid), c(r2, grid), c(C1, grid), c(C2, grid), c(a1, grid), c(a2, grid))

    def replace(self, **fields) -> "Habitat":
        kw = {name: getattr(self, name) for name in _NAMES}
        kw.update(fields)
        return Habitat(**kw)

    def summary(self) -> dict[str, Any]:
        return {name: {"min": getattr(self, name).min(), "max": getattr(self, name).max()}
                for name in _NAMES}


@dataclass(frozen=True)
class RunParams:
    """Simulation settings from the ``[run]`` table.

    ``threshold`` of ``None`` means a quarter of the smallest species-1
    carrying capacity. ``snapshots`` lists extra steps to record.
    """

    steps: int = 100
    threshold: float | None = None
    initial: str = "step"
    boundary: str = "invasion"
    snapshot: int = 1
    snapshots: tuple[int, ...] = ()

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError(f"run.steps must be a positive integer, got {self.steps!r}")
        if self.threshold is not None and not self.threshold > 0:
            raise ValidationError(f"run.threshold must be positive, got {self.threshold!r}")
        if self.boundary not in ("invasion", "spread", "compact"):
            raise ValidationError(
                f"run.boundary must be 'invasion', 'spread' or 'compact', got {self.boundary!r}")
        if int(self.snapshot) != self.snapshot or self.snapshot < 1:
            raise ValidationError(f"run.snapshot must be a positive integer, got {self.snapshot!r}")


class Problem(NamedTuple):
    """A validated problem instance."""

    habitat: Habitat
    grid: Grid
    k1: Kernel
    k2: Kernel
    run: RunParams
    config: dict
    base_dir: Path | None = None

    @property
    def kernels(self) -> tuple[Kernel, Kernel]:
        return self.k1, self.k2


_LINE_RE = re.compile(r"line (\d+)")


def load_config(path) -> Problem:
    """Parse and validate a TOML problem description.

    Raises:
        ParseError: Syntax errors (with line number), missing blocks or keys.
        ValidationError: Values that violate a model invariant.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        cfg = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        where = f" at line {m.group(1)}" if m else ""
        raise ParseError(f"{path}: syntax error{where}: {exc}") from exc
    return problem_from_dict(cfg, base_dir=path.parent, source=str(path))


def problem_from_dict(cfg: dict, base_dir: Path | None = None, source: str = "<dict>") -> Problem:
    """Build a :class:`Problem` from an already parsed config mapping."""
    for block in ("grid", "habitat", "kernel"):
        if block not in cfg or not isinstance(cfg[block], dict):
            raise ParseError(f"{source}: missing [{block}] block")
    g = cfg["grid"]
    for key in ("L", "n"):
        if key not in g:
            raise ParseError(f"{source}: missing key grid.{key}")
    _check_keys(g, ("L", "n", "sim_periods"), "grid", source)
    try:
        grid = Grid(float(g["L"]), g["n"], g.get("sim_periods", 40))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: bad [grid] value: {exc}") from exc

    hab = dict(cfg["habitat"])
    _check_keys(hab, _NAMES + ("C",), "habitat", source)
    if "C" in hab:
        if "C1" in hab or "C2" in hab:
            raise ParseError(f"{source}: habitat.C conflicts with habitat.C1/C2")
        hab["C1"] = hab["C2"] = hab.pop("C")
    fields = {}
    for name in _NAMES:
        if name not in hab:
            raise ParseError(f"{source}: missing key habitat.{name}")
        fields[name] = _field_from_spec(hab[name], f"habitat.{name}", grid, base_dir, source)
    habitat = Habitat(**fields)

    kern = cfg["kernel"]
    _check_keys(kern, ("k1", "k2"), "kernel", source)
    ks = []
    for key in ("k1", "k2"):
        if key not in kern or not isinstance(kern[key], dict):
            raise ParseError(f"{source}: missing kernel.{key} table")
        ks.append(kernel_from_spec(kern[key], base_dir))

    run_cfg = dict(cfg.get("run", {}))
    _check_keys(run_cfg, ("steps", "threshold", "initial", "boundary", "snapshot", "snapshots"),
                "run", source)
    if "snapshots" in run_cfg:
        run_cfg["snapshots"] = tuple(int(s) for s in run_cfg["snapshots"])
    initial = run_cfg.get("initial", "step")
    if initial not in ("step", "periodic"):
        p = Path(initial)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        run_cfg["initial"] = str(p)
    run = RunParams(**run_cfg)
    return Problem(habitat, grid, ks[0], ks[1], run, cfg, base_dir)


def _check_keys(table: dict, allowed, where: str, source: str) -> None:
    for key in table:
        if key not in allowed:
            raise ParseError(f"{source}: unknown key {where}.{key}")


def _field_from_spec(spec, key: str, grid: Grid, base_dir: Path | None, source: str) -> PeriodicField:
    if isinstance(spec, bool):
        raise ParseError(f"{source}: {key} must be a number or table, got a boolean")
    if isinstance(spec, (int, float)):
        return PeriodicField.constant(float(spec), grid)
    if isinstance(spec, dict):
        if set(spec) == {"patch1", "patch2", "breakpoint"}:
            return piecewise_two_patch(grid.L, float(spec["breakpoint"]), float(spec["patch1"]),
                                       float(spec["patch2"]), grid)
        if set(spec) == {"path"}:
            p = Path(spec["path"])
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            f = PeriodicField.from_csv(p, grid.L)
            if f.n != grid.n:
                raise ValidationError(f"{key}: table has {f.n} rows but grid.n = {grid.n}")
            return f
    raise ParseError(
        f"{source}: {key} must be a number, {{patch1, patch2, breakpoint}} or {{path}}; got {spec!r}")
