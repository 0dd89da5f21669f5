"""Dispersal kernels and their periodization over one habitat period."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .errors import ConvergenceError, DomainError, SchemaError, ValidationError

TAIL_RTOL = 1e-14
MAX_IMAGES = 200
# mass of the kernel beyond the truncation radius used for discrete weights
_TAIL_MASS = 1e-16

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class Kernel:
    """Base class for symmetric-or-not dispersal densities on the real line.

    Subclasses provide ``density``, ``mgf``, ``cell_mass`` and a few
    geometric hints used by the periodization and the simulator.
    """

    family: str = ""
    kind: int = -1
    abscissa: float = math.inf
    symmetric: bool = True

    # parameters handed to the backend: (kind, par, nodes, dens)
    def _backend_args(self):
        raise NotImplementedError

    def _cumulative(self, mu: float):
        return None

    def check_mu(self, mu: float) -> None:
        """Raise DomainError unless |mu| is below the abscissa of convergence."""
        if not math.isfinite(mu) or abs(mu) >= self.abscissa:
            raise DomainError(
                f"|mu| = {abs(mu):g} is outside the {self.family} kernel's abscissa "
                f"of convergence {self.abscissa:g}"
            )

    def density(self, z):
        """Density k(z); accepts scalars or arrays."""
        kind, par, nodes, dens = self._backend_args()
        out = _backend.impl.weighted_point(kind, par, nodes, dens, 0.0, np.asarray(z, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def mgf(self, mu: float) -> float:
        """M(mu) = integral of k(z) exp(mu z)."""
        raise NotImplementedError

    def cell_mass(self, a, b, mu: float = 0.0):
        """Exact integral of k(z) exp(mu z) over [a, b], elementwise."""
        self.check_mu(mu)
        kind, par, nodes, dens = self._backend_args()
        out = _backend.impl.weighted_cell(kind, par, nodes, dens, self._cumulative(mu), mu,
                                          np.asarray(a, dtype=float), np.asarray(b, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def weighted_mode(self, mu: float) -> float:
        """Location of the maximum of k(z) exp(mu z)."""
        raise NotImplementedError

    @property
    def support_halfwidth(self) -> float:
        """Radius beyond which the kernel carries less than 1e-16 of its mass."""
        raise NotImplementedError

    def weighted_halfwidth(self, mu: float) -> float:
        """Radius holding all but ~1e-16 of the mass of k(z) exp(mu z)."""
        return self.support_halfwidth + abs(self.weighted_mode(mu))

    def discrete_weights(self, h: float, mu: float = 0.0) -> np.ndarray:
        """Weighted cell masses w_k of [k h - h/2, k h + h/2] for k = -S..S.

        The array has odd length 2S + 1 with the k = 0 cell in the middle,
        ready for direct convolution on a grid of spacing ``h``.
        """
        s = int(math.ceil(self.weighted_halfwidth(mu) / h)) + 1
        k = np.arange(-s, s + 1) * h
        return np.asarray(self.cell_mass(k - h / 2, k + h / 2, mu))


@dataclass(frozen=True, eq=True)
class Gaussian(Kernel):
    """Normal density with mean 0 and the given variance."""

    variance: float
    family: str = field(default="gaussian", init=False, repr=False)
    kind: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValidationError(f"gaussian variance must be positive, got {self.variance!r}")

    def _backend_args(self):
        return 0, float(self.variance), None, None

    def mgf(self, mu: float) -> float:
        self.check_mu(mu)
        return math.exp(0.5 * self.variance * mu * mu)

    def weighted_mode(self, mu: float) -> float:
        return mu * self.variance

    @property
    def support_halfwidth(self) -> float:
        return 8.3 * math.sqrt(self.variance)


@dataclass(frozen=True, eq=True)
class Laplace(Kernel):
    """Two-sided exponential density exp(-|z|/scale) / (2 scale)."""

    scale: float
    family: str = field(default="laplace", init=False, repr=False)
    kind: int = field(default=1, init=False, repr=False)

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError(f"laplace scale must be positive, got {self.scale!r}")

    @property
    def abscissa(self) -> float:  # type: ignore[override]
        return 1.0 / self.scale

    def _backend_args(self):
        return 1, float(self.scale), None, None

    def mgf(self, mu: float) -> float:
        self.check_mu(mu)
        return 1.0 / (1.0 - (self.scale * mu) ** 2)

    def weighted_mode(self, mu: float) -> float:
        return 0.0

    @property
    def support_halfwidth(self) -> float:
        return -math.log(_TAIL_MASS) * self.scale

    def weighted_halfwidth(self, mu: float) -> float:
        self.check_mu(mu)
        return -math.log(_TAIL_MASS) / (1.0 / self.scale - abs(mu))


class Table(Kernel):
    """Tabulated density on a uniform, symmetric abscissa.

    Between nodes the density is linear and outside the table it is zero,
    so the abscissa of convergence is infinite.

    Args:
        z: Strictly increasing, uniformly spaced nodes.
        density: Nonnegative values at the nodes.
    """

    family = "table"
    kind = 2

    def __init__(self, z, density):
        z = np.array(z, dtype=float)
        d = np.array(density, dtype=float)
        if z.ndim != 1 or z.shape != d.shape or z.size < 3:
            raise ValidationError("table kernel needs matching 1-D arrays with at least 3 nodes")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(d))):
            raise ValidationError("table kernel contains non-finite values")
        steps = np.diff(z)
        if np.any(steps <= 0):
            raise ValidationError("table kernel nodes must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise ValidationError("table kernel nodes must be uniformly spaced")
        if np.any(d < 0):
            raise ValidationError("table kernel density must be nonnegative")
        nz = np.nonzero(d > 0)[0]
        if nz.size == 0 or np.any(d[nz[0]:nz[-1] + 1] <= 0):
            raise ValidationError("table kernel density must be positive on one connected interval")
        total = float(_trapezoid(d, z))
        if abs(total - 1.0) > 1e-8:
            raise ValidationError(f"table kernel integrates to {total!r}, not 1 within 1e-8")
        z.setflags(write=False)
        d.setflags(write=False)
        self.z = z
        self.values = d
        self.symmetric = bool(
            abs(z[0] + z[-1]) <= 1e-12 * max(1.0, abs(z[0]))
            and np.max(np.abs(d - d[::-1])) <= 1e-12
        )

    def __repr__(self):
        return f"Table(nodes={self.z.size}, support=[{self.z[0]:g}, {self.z[-1]:g}])"

    def __eq__(self, other):
        return (isinstance(other, Table) and np.array_equal(self.z, other.z)
                and np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def from_csv(cls, path) -> "Table":
        """Read a two-column ``z,density`` CSV file."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["z", "density"]:
                raise SchemaError(f"{path}: expected columns 'z,density', got {reader.fieldnames}")
            rows = [(float(r["z"]), float(r["density"])) for r in reader]
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def _backend_args(self):
        return 2, 0.0, self.z, self.values

    def _cumulative(self, mu: float):
        return _backend.impl.table_cumulative(self.z, self.values, mu)

    def mgf(self, mu: float) -> float:
        # exact integral of the piecewise-linear density times exp(mu z);
        # at mu = 0 this is the trapezoid sum
        self.check_mu(mu)
        return float(self._cumulative(mu)[-1])

    def weighted_mode(self, mu: float) -> float:
        return float(self.z[np.argmax(self.values * np.exp(mu * (self.z - self.z[0])))])

    @property
    def support_halfwidth(self) -> float:
        return float(max(abs(self.z[0]), abs(self.z[-1])))


def density(k: Kernel, z):
    """Evaluate k at displacement(s) ``z``."""
    return k.density(z)


def mgf(k: Kernel, mu: float) -> float:
    """Moment-generating function of ``k`` at ``mu``."""
    return k.mgf(mu)


def periodize_weighted(k: Kernel, grid, mu: float, rule: str = "cell") -> np.ndarray:
    """Period-cell matrix of the exponentially weighted kernel.

    Entry ``[i, j]`` approximates sum_m k(x_i - y_j - mL) exp(mu (x_i - y_j - mL)),
    the kernel folded onto one period. With ``rule="cell"`` each image
    is the exact weighted mass of the quadrature cell around ``y_j`` divided
    by ``h``; with ``rule="point"`` it is the weighted density at the node.
    The cell rule integrates the Laplace corner exactly and makes the
    constant-coefficient eigenvalue equal ``M(mu)`` to rounding.

    Args:
        k: Dispersal kernel.
        grid: Any object with ``L``, ``n`` and ``h`` attributes.
        mu: Weight exponent, ``|mu| < k.abscissa``.
        rule: ``"cell"`` or ``"point"``.

    Returns:
        Circulant ``n x n`` array (multiply by ``h`` for quadrature weights).

    Raises:
        DomainError: ``|mu|`` at or beyond the abscissa.
        ConvergenceError: Image terms stopped decaying.
    """
    if rule not in ("cell", "point"):
        raise ValueError(f"rule must be 'cell' or 'point', got {rule!r}")
    k.check_mu(mu)
    n, L, h = grid.n, grid.L, grid.h
    col = periodize_displacements(k, np.arange(n) * h, L, h, mu, rule)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def periodize_displacements(k: Kernel, d, L: float, h: float, mu: float,
                            rule: str = "cell") -> np.ndarray:
    """Folded weighted kernel F(d) for an array of displacements ``d``."""
    k.check_mu(mu)
    kind, par, nodes, dens = k._backend_args()
    values, status = _backend.impl.periodize_entries(
        kind, par, nodes, dens, k._cumulative(mu), np.asarray(d, dtype=float), float(L),
        float(h), float(mu), float(k.weighted_mode(mu)), rule == "cell", TAIL_RTOL, MAX_IMAGES)
    if status == _backend.impl.NONDECREASING:
        raise ConvergenceError(
            f"image terms of the weighted {k.family} kernel did not decrease for 3 "
            f"consecutive periods at mu={mu:g}")
    if status == _backend.impl.CAP_REACHED:
        raise ConvergenceError(
            f"periodization of the {k.family} kernel needed more than {MAX_IMAGES} images "
            f"at mu={mu:g}")
    return values


def kernel_from_spec(spec: dict, base_dir: Path | None = None) -> Kernel:
    """Build a kernel from a config table such as ``{family="laplace", scale=0.5}``."""
    fam = spec.get("family")
    if fam == "gaussian":
        _require(spec, "variance")
        return Gaussian(float(spec["variance"]))
    if fam == "laplace":
        _require(spec, "scale")
        return Laplace(float(spec["scale"]))
    if fam == "table":
        _require(spec, "path")
        p = Path(spec["path"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return Table.from_csv(p)
    raise ValidationError(f"unknown kernel family {fam!r}; expected gaussian, laplace or table")


def kernel_to_spec(k: Kernel) -> dict:
    """Inverse of :func:`kernel_from_spec` for the analytic families."""
    if isinstance(k, Gaussian):
        return {"family": "gaussian", "variance": k.variance}
    if isinstance(k, Laplace):
        return {"family": "laplace", "scale": k.scale}
    return {"family": "table", "nodes": int(k.z.size)}


def _require(spec: dict, key: str) -> None:
    if key not in spec:
        raise ValidationError(f"kernel family {spec.get('family')!r} needs a {key!r} entry")
