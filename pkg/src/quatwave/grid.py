"""Sampling grids of dilations, rotations and translations.

Ring ``t`` of the 2D grid carries the dilation ``a_t = t * lambda0`` and
``t * L`` equally spaced angles, so the arc length per angular cell stays
``2 pi lambda0 / L`` on every ring. Within a dilation-rotation cell with
matrix ``A`` the translations form the sheared lattice ``b = A diag(beta) m``.
The 4D grid pairs two such ring families, one per 2x2 block of the
rotation-dilation matrix.

``scale_rule="growing"`` switches to ring dilations ``t^2 * lambda0``
(the base scale itself grows with the ring); the translation lattice is
still ``A diag(beta) m`` for the ring's matrix ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError
from .quaternion import DihedralSimilitude, rotation, similitude_array

__all__ = [
    "GridSpec2D",
    "GridSpec4D",
    "GridPoint2D",
    "GridPoint4D",
    "Cell",
    "AreaReport",
    "annulus_area",
    "area_bound",
    "validate_area_bound",
    "enumerate_grid_2d",
    "enumerate_grid_4d",
]

SCALE_RULES = ("fixed", "growing")


def annulus_area(t: int, lam: float, L: int) -> float:
    """Exact area of one of the ``t L`` cells between radii ``(t-1) lam`` and ``t lam``."""
    if int(t) != t or t < 1:
        raise DomainError(f"ring index must be a positive integer, got {t}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if int(L) != L or L <= 1:
        raise DomainError(f"L must be an integer > 1, got {L}")
    return np.pi * (2 * t - 1) * lam**2 / (t * L)


def area_bound(lam: float, L: int) -> float:
    """Cell-area bound ``3 pi lam^2 / (2 L)`` used for the eta test."""
    return 3 * np.pi * lam**2 / (2 * L)


@dataclass(frozen=True)
class AreaReport:
    """Outcome of the eta test for one ring family.

    ``ok`` is the strict test ``area_bound < eta``. ``worst_t`` and
    ``worst_area`` give the largest exact cell area over the enumerated
    rings; ``supremum`` is its limit ``2 pi lam^2 / L`` over all rings.
    """

    ok: bool
    eta: float
    bound: float
    worst_t: int
    worst_area: float
    supremum: float
    worst_below_eta: bool

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "eta": self.eta,
            "bound": self.bound,
            "worst_t": self.worst_t,
            "worst_area": self.worst_area,
            "supremum": self.supremum,
            "worst_below_eta": self.worst_below_eta,
        }


def _area_report(lam: float, L: int, eta: float, t_max: int) -> AreaReport:
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    areas = [annulus_area(t, lam, L) for t in range(1, t_max + 1)]
    worst = int(np.argmax(areas))
    bound = area_bound(lam, L)
    return AreaReport(
        ok=bool(bound < eta),
        eta=float(eta),
        bound=bound,
        worst_t=worst + 1,
        worst_area=areas[worst],
        supremum=2 * np.pi * lam**2 / L,
        worst_below_eta=bool(areas[worst] < eta),
    )


def validate_area_bound(spec, eta, t_max: int | None = None):
    """Check the cell-area bound against ``eta``.

    ``spec`` is a :class:`GridSpec2D`, a :class:`GridSpec4D` (then ``eta``
    may be a pair and a pair of reports is returned) or a ``(lam, L)`` tuple.
    """
    if isinstance(spec, GridSpec2D):
        return _area_report(spec.lambda0, spec.L, eta, t_max or spec.t_max)
    if isinstance(spec, GridSpec4D):
        eta1, eta2 = np.broadcast_to(np.asarray(eta, dtype=float), (2,))
        return (
            _area_report(spec.lambda01, spec.L1, eta1, t_max or spec.t_max),
            _area_report(spec.lambda02, spec.L2, eta2, t_max or spec.j_max),
        )
    lam, L = spec
    return _area_report(lam, L, eta, t_max or 1)


@dataclass(frozen=True)
class Cell:
    """One dilation-rotation cell: grid indices and the dilation matrix ``A``."""

    index: tuple[int, ...]
    matrix: NDArray[np.float64] = field(repr=False)
    params: tuple[float, ...]

    @property
    def det(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))


@dataclass(frozen=True)
class GridPoint2D:
    t: int
    l: int
    m0: int
    m1: int
    a: float
    theta: float
    b: tuple[float, float]

    @property
    def matrix(self) -> NDArray[np.float64]:
        return self.a * rotation(self.theta)


@dataclass(frozen=True)
class GridPoint4D:
    t: int
    j: int
    l: int
    k: int
    m: tuple[int, int, int, int]
    similitude: DihedralSimilitude
    b: tuple[float, float, float, float]

    @property
    def matrix(self) -> NDArray[np.float64]:
        return self.similitude.matrix()


def _check_scale(name, value):
    if not 0 < value < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")


def _check_L(name, value):
    if int(value) != value or value <= 1:
        raise DomainError(f"{name} must be an integer > 1, got {value}")


def _check_betas(betas):
    if any(b < 0 or not np.isfinite(b) for b in betas):
        raise DomainError(f"translation steps must be nonnegative, got {betas}")


class _GridBase:
    """Shared lattice machinery; subclasses provide ``cells``."""

    dim: int
    betas: tuple[float, ...]
    m_range: tuple[int, ...]
    b_max: float | None

    def lattice(self, cell: Cell) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        """Translation indices ``m`` (lexicographic) and positions ``b = A diag(beta) m``."""
        ranges = list(self.m_range)
        if self.b_max is not None:
            # a translation with |b|_inf <= b_max has |m_i| <= sqrt(d) b_max / (s_min beta_i)
            s_min = float(np.min(np.linalg.svd(cell.matrix, compute_uv=False)))
            for i, beta in enumerate(self.betas):
                if beta > 0:
                    need = int(np.floor(np.sqrt(self.dim) * self.b_max / (s_min * beta) + 1e-9))
                    ranges[i] = min(ranges[i], need)
        axes = [np.arange(-r, r + 1) for r in ranges]
        m = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        b = (m * np.asarray(self.betas)) @ cell.matrix.T
        if self.b_max is not None:
            keep = np.max(np.abs(b), axis=1) <= self.b_max * (1 + 1e-12)
            m, b = m[keep], b[keep]
        return m, b

    @cached_property
    def lattices(self) -> list[tuple[NDArray[np.int64], NDArray[np.float64]]]:
        return [self.lattice(c) for c in self.cells]

    @property
    def size(self) -> int:
        return sum(len(m) for m, _ in self.lattices)

    def counts(self) -> list[int]:
        return [len(m) for m, _ in self.lattices]

    def offsets(self) -> NDArray[np.int64]:
        """Start index of every cell's block in the flat enumeration."""
        return np.concatenate([[0], np.cumsum(self.counts())])

    def matrices(self) -> NDArray[np.float64]:
        return np.stack([c.matrix for c in self.cells])

    def index_table(self) -> NDArray[np.int64]:
        """One row of integer indices per grid point, in enumeration order."""
        rows = []
        for cell, (m, _) in zip(self.cells, self.lattices):
            head = np.broadcast_to(np.asarray(cell.index), (len(m), len(cell.index)))
            rows.append(np.hstack([head, m]))
        return np.vstack(rows).astype(np.int64)

    def translations(self) -> NDArray[np.float64]:
        return np.vstack([b for _, b in self.lattices])


def _norm_m_range(m_range, dim) -> tuple[int, ...]:
    out = tuple(int(r) for r in np.broadcast_to(np.asarray(m_range), (dim,)))
    if any(r < 0 for r in out):
        raise DomainError(f"m_range must be nonnegative, got {m_range}")
    return out


@dataclass(frozen=True)
class GridSpec2D(_GridBase):
    """Rings ``t = 1..t_max`` with ``t L`` angles each and a square index box of translations.

    ``m_range`` is the index half-width per axis (int or pair). ``b_max``
    optionally drops translations outside ``|b|_inf <= b_max`` and shrinks
    each cell's index box accordingly.
    """

    lambda0: float
    L: int
    beta0: float
    beta1: float
    t_max: int
    m_range: int | tuple[int, int] = 0
    scale_rule: str = "fixed"
    b_max: float | None = None

    dim = 2

    def __post_init__(self):
        _check_scale("lambda0", self.lambda0)
        _check_L("L", self.L)
        _check_betas(self.betas)
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise DomainError(f"t_max must be a positive integer, got {self.t_max}")
        if self.scale_rule not in SCALE_RULES:
            raise DomainError(f"scale_rule must be one of {SCALE_RULES}")
        object.__setattr__(self, "m_range", _norm_m_range(self.m_range, 2))
        if not np.isfinite(area_bound(self.lambda0, self.L)):
            raise DomainError("area bound is not finite")

    @property
    def betas(self) -> tuple[float, float]:
        return (float(self.beta0), float(self.beta1))

    def dilation(self, t: int) -> float:
        if self.scale_rule == "growing":
            return t * t * self.lambda0
        return t * self.lambda0

    @cached_property
    def cells(self) -> list[Cell]:
        out = []
        for t in range(1, self.t_max + 1):
            a = self.dilation(t)
            n = t * self.L
            for l in range(n):
                theta = 2 * np.pi * l / n
                out.append(Cell((t, l), a * rotation(theta), (a, theta)))
        return out

    def with_betas(self, beta0: float, beta1: float) -> GridSpec2D:
        return GridSpec2D(
            self.lambda0, self.L, beta0, beta1, self.t_max, self.m_range, self.scale_rule, self.b_max
        )

    def as_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "L": self.L,
            "beta0": self.beta0,
            "beta1": self.beta1,
            "t_max": self.t_max,
            "m_range": list(self.m_range),
            "scale_rule": self.scale_rule,
            "b_max": self.b_max,
        }


@dataclass(frozen=True)
class GridSpec4D(_GridBase):
    """Two ring families (``t`` with ``t L1`` angles, ``j`` with ``j L2`` angles) and a 4D lattice."""

    lambda01: float
    lambda02: float
    L1: int
    L2: int
    betas: tuple[float, float, float, float]
    t_max: int
    j_max: int
    m_range: int | tuple[int, int, int, int] = 0
    scale_rule: str = "fixed"
    b_max: float | None = None

    dim = 4

    def __post_init__(self):
        _check_scale("lambda01", self.lambda01)
        _check_scale("lambda02", self.lambda02)
        _check_L("L1", self.L1)
        _check_L("L2", self.L2)
        betas = tuple(float(b) for b in np.broadcast_to(np.asarray(self.betas, float), (4,)))
        object.__setattr__(self, "betas", betas)
        _check_betas(betas)
        for name in ("t_max", "j_max"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v}")
        if self.scale_rule not in SCALE_RULES:
            raise DomainError(f"scale_rule must be one of {SCALE_RULES}")
        object.__setattr__(self, "m_range", _norm_m_range(self.m_range, 4))

    def dilations(self, t: int, j: int) -> tuple[float, float]:
        if self.scale_rule == "growing":
            return t * t * self.lambda01, j * j * self.lambda02
        return t * self.lambda01, j * self.lambda02

    @cached_property
    def cells(self) -> list[Cell]:
        out = []
        for t in range(1, self.t_max + 1):
            for j in range(1, self.j_max + 1):
                lam1, lam2 = self.dilations(t, j)
                for l in range(t * self.L1):
                    th1 = 2 * np.pi * l / (t * self.L1)
                    for k in range(j * self.L2):
                        th2 = 2 * np.pi * k / (j * self.L2)
                        A = similitude_array(lam1, th1, lam2, th2)
                        out.append(Cell((t, j, l, k), A, (lam1, th1, lam2, th2)))
        return out

    def with_betas(self, *betas: float) -> GridSpec4D:
        return GridSpec4D(
            self.lambda01, self.lambda02, self.L1, self.L2, tuple(betas),
            self.t_max, self.j_max, self.m_range, self.scale_rule, self.b_max,
        )

    def as_dict(self) -> dict:
        return {
            "lambda01": self.lambda01,
            "lambda02": self.lambda02,
            "L1": self.L1,
            "L2": self.L2,
            "betas": list(self.betas),
            "t_max": self.t_max,
            "j_max": self.j_max,
            "m_range": list(self.m_range),
            "scale_rule": self.scale_rule,
            "b_max": self.b_max,
        }


def enumerate_grid_2d(spec: GridSpec2D) -> Iterator[GridPoint2D]:
    """All grid points in lexicographic ``(t, l, m0, m1)`` order."""
    for cell, (m, b) in zip(spec.cells, spec.lattices):
        t, l = cell.index
        a, theta = cell.params
        for mi, bi in zip(m, b):
            yield GridPoint2D(t, l, int(mi[0]), int(mi[1]), a, theta, (float(bi[0]), float(bi[1])))


def enumerate_grid_4d(spec: GridSpec4D) -> Iterator[GridPoint4D]:
    """All grid points in lexicographic ``(t, j, l, k, m0, m1, m2, m3)`` order."""
    for cell, (m, b) in zip(spec.cells, spec.lattices):
        t, j, l, k = cell.index
        sim = DihedralSimilitude(*cell.params)
        for mi, bi in zip(m, b):
            yield GridPoint4D(t, j, l, k, tuple(int(v) for v in mi), sim, tuple(float(v) for v in bi))


def enumerate_grid(spec) -> Iterator:
    if spec.dim == 2:
        return enumerate_grid_2d(spec)
    return enumerate_grid_4d(spec)


def _product_count(spec) -> int:
    """Closed-form point count when no ``b_max`` filter is active."""
    per_cell = int(np.prod([2 * r + 1 for r in spec.m_range]))
    if spec.dim == 2:
        return spec.L * spec.t_max * (spec.t_max + 1) // 2 * per_cell
    rings1 = spec.L1 * spec.t_max * (spec.t_max + 1) // 2
    rings2 = spec.L2 * spec.j_max * (spec.j_max + 1) // 2
    return rings1 * rings2 * per_cell

