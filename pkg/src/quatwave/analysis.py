"""Wavelet analysis, synthesis, frame operator and reconstruction.

For a dilation-rotation cell with matrix ``A`` let ``W[k]`` be the DFT of
the box-periodized atom with zero translation, read off the closed-form
spectrum. The atom translated by ``b`` has DFT ``W[k] exp(-i k.b)``, so by
Parseval its coefficient against ``f`` is

    <psi_{A,b}|f> = V sum_k exp(i k.b) conj(W[k]) F[k]

(``V`` the cell volume). One product per cell followed by a trigonometric
sum evaluated at every lattice translation gives all coefficients of the
cell. ``evaluation="exact"`` evaluates that sum at the true (sheared,
off-grid) translations with a nonuniform FFT; ``evaluation="nearest"``
uses one inverse FFT and reads the sample nearest to each translation,
which moves every translation by at most half a sample per axis.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from . import _nufft
from .errors import DomainError, ShapeError, StagnationError
from .fields import BoxSpec, SampledField, inner
from .wavelets import Atom, MotherWavelet, normalization_factor, realize_atom

__all__ = [
    "CoefficientSet",
    "AnalysisOperator",
    "analyze",
    "analyze_direct",
    "frame_apply",
    "synthesize",
    "reconstruct",
    "frame_algorithm",
    "Reconstruction",
    "write_coefficients_csv",
    "read_coefficients_csv",
    "write_coefficients_binary",
    "read_coefficients_binary",
]

COEFF_MAGIC = b"QWC1"
EVALUATIONS = ("exact", "nearest")


def index_names(dim: int) -> list[str]:
    if dim == 2:
        return ["t", "l", "m0", "m1"]
    return ["t", "j", "l", "k", "m0", "m1", "m2", "m3"]


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients in grid enumeration order."""

    grid: object
    values: NDArray[np.complex128] = field(repr=False)
    normalization: str = "L2"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        if v.size != self.grid.size:
            raise ShapeError(f"{v.size} coefficients for a grid of {self.grid.size} points")
        if not np.all(np.isfinite(v)):
            raise DomainError("coefficients must be finite")
        object.__setattr__(self, "values", v)

    def per_cell(self) -> list[NDArray[np.complex128]]:
        off = self.grid.offsets()
        return [self.values[a:b] for a, b in zip(off[:-1], off[1:])]

    def energy(self) -> float:
        return float(np.vdot(self.values, self.values).real)

    def __len__(self):
        return self.values.size


class AnalysisOperator:
    """Analysis ``T``, synthesis ``T*`` and frame operator ``T*T`` on a box.

    Works on spectra; batches of ``P`` fields are arrays of shape ``(P, *box.shape)``.
    Per-cell filters are cached when they fit in ``cache_bytes``.
    """

    def __init__(
        self,
        psi: MotherWavelet,
        grid,
        box: BoxSpec,
        normalization: str = "L2",
        evaluation: str = "exact",
        eps: float = 1e-13,
        cache_bytes: float = 6e8,
    ):
        if psi.dim != box.dim or grid.dim != box.dim:
            raise ShapeError("wavelet, grid and box dimensions differ")
        if evaluation not in EVALUATIONS:
            raise DomainError(f"evaluation must be one of {EVALUATIONS}")
        normalization_factor(1.0, normalization)
        self.psi = psi
        self.grid = grid
        self.box = box
        self.normalization = normalization
        self.evaluation = evaluation
        self.eps = eps
        self._k = box.wavevectors()
        L = np.asarray(box.side_length)
        h = box.spacing
        self._points = [2 * np.pi * b / L for _, b in grid.lattices]
        self._nearest = [
            tuple(np.mod(np.rint(b / h).astype(int), box.shape).T) for _, b in grid.lattices
        ]
        self._offsets = grid.offsets()
        n_cells = len(grid.cells)
        self._cache = {} if n_cells * box.size * 16 <= cache_bytes else None

    @property
    def size(self) -> int:
        return self.grid.size

    def filter(self, c: int) -> NDArray[np.complex128]:
        """DFT of the untranslated atom of cell ``c``."""
        if self._cache is not None and c in self._cache:
            return self._cache[c]
        cell = self.grid.cells[c]
        det = cell.det
        amp = normalization_factor(det, self.normalization) * det / self.box.spectral_scale
        W = amp * self.psi.spectrum(self._k @ cell.matrix)
        if self._cache is not None:
            self._cache[c] = W
        return W

    def _sum_at_lattice(self, c, G):
        # G: (P, *shape) -> (P, M_c), sum_k G[k] exp(i k.b)
        if self.evaluation == "exact":
            return _nufft.type2(G, self._points[c], isign=1, modeord=1, eps=self.eps)
        grid_vals = np.fft.ifftn(G, axes=tuple(range(1, G.ndim))) * self.box.size
        return grid_vals[(slice(None),) + self._nearest[c]]

    def _spread_from_lattice(self, c, w):
        # w: (P, M_c) -> (P, *shape), sum_m w[m] exp(-i k.b_m)
        shape = self.box.shape
        if self.evaluation == "exact":
            return _nufft.type1(w, self._points[c], shape, isign=-1, modeord=1, eps=self.eps)
        out = np.zeros((w.shape[0],) + shape, dtype=complex)
        flat = np.ravel_multi_index(self._nearest[c], shape)
        for p in range(w.shape[0]):
            np.add.at(out[p].reshape(-1), flat, w[p])
        return np.fft.fftn(out, axes=tuple(range(1, out.ndim)))

    def cell_coefficients(self, c: int, spectra: NDArray) -> NDArray[np.complex128]:
        """Coefficients of cell ``c`` for a batch of spectra, shape ``(P, M_c)``."""
        G = np.conj(self.filter(c))[None] * spectra
        return self.box.cell_volume * self._sum_at_lattice(c, G)

    def forward(self, spectra: NDArray) -> NDArray[np.complex128]:
        """Analysis of a batch of spectra; returns ``(P, n_points)``."""
        spectra = self._batch(spectra)
        out = np.empty((spectra.shape[0], self.size), dtype=complex)
        for c in range(len(self.grid.cells)):
            a, b = self._offsets[c], self._offsets[c + 1]
            if b > a:
                out[:, a:b] = self.cell_coefficients(c, spectra)
        return out

    def adjoint(self, coeffs: NDArray) -> NDArray[np.complex128]:
        """Synthesis ``sum_i c_i psi_i`` of a batch ``(P, n_points)``; returns spectra."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
        if coeffs.shape[1] != self.size:
            raise ShapeError(f"expected {self.size} coefficients, got {coeffs.shape[1]}")
        out = np.zeros((coeffs.shape[0],) + self.box.shape, dtype=complex)
        for c in range(len(self.grid.cells)):
            a, b = self._offsets[c], self._offsets[c + 1]
            if b > a:
                out += self.filter(c)[None] * self._spread_from_lattice(c, coeffs[:, a:b])
        return out

    def normal(self, spectra: NDArray) -> NDArray[np.complex128]:
        """Frame operator ``T*T`` on a batch of spectra."""
        spectra = self._batch(spectra)
        out = np.zeros_like(spectra)
        for c in range(len(self.grid.cells)):
            if self._offsets[c + 1] > self._offsets[c]:
                coef = self.cell_coefficients(c, spectra)
                out += self.filter(c)[None] * self._spread_from_lattice(c, coef)
        return out

    def gram(self, spectra: NDArray) -> NDArray[np.complex128]:
        """``K[p, q] = sum_i conj(<psi_i|f_p>) <psi_i|f_q>`` accumulated cell by cell."""
        spectra = self._batch(spectra)
        P = spectra.shape[0]
        K = np.zeros((P, P), dtype=complex)
        for c in range(len(self.grid.cells)):
            if self._offsets[c + 1] > self._offsets[c]:
                C = self.cell_coefficients(c, spectra)
                K += np.conj(C) @ C.T
        return K

    def _batch(self, spectra):
        spectra = np.asarray(spectra, dtype=complex)
        if spectra.shape == self.box.shape:
            spectra = spectra[None]
        if spectra.shape[1:] != self.box.shape:
            raise ShapeError(f"spectra of shape {spectra.shape[1:]} do not fit box {self.box.shape}")
        return spectra


def _operator(psi, grid, box, normalization, evaluation, eps) -> AnalysisOperator:
    return AnalysisOperator(psi, grid, box, normalization, evaluation, eps)


def analyze(
    f: SampledField,
    psi: MotherWavelet,
    grid,
    normalization: str = "L2",
    evaluation: str = "exact",
    eps: float = 1e-13,
    operator: AnalysisOperator | None = None,
) -> CoefficientSet:
    """Wavelet coefficients ``<psi_i|f>`` of ``f`` over every grid point."""
    op = operator or _operator(psi, grid, f.box, normalization, evaluation, eps)
    if op.box != f.box:
        raise ShapeError("field and operator boxes differ")
    return CoefficientSet(grid, op.forward(f.spectrum)[0], op.normalization)


def synthesize(coeffs: CoefficientSet, psi: MotherWavelet, box: BoxSpec, evaluation="exact",
               eps=1e-13, operator: AnalysisOperator | None = None) -> SampledField:
    """``sum_i c_i psi_i`` as a field."""
    op = operator or _operator(psi, coeffs.grid, box, coeffs.normalization, evaluation, eps)
    return SampledField(box, op.adjoint(coeffs.values)[0], domain="frequency").to_space()


def frame_apply(
    f: SampledField,
    psi: MotherWavelet,
    grid,
    normalization: str = "L2",
    evaluation: str = "exact",
    eps: float = 1e-13,
    operator: AnalysisOperator | None = None,
) -> SampledField:
    """Frame operator ``sum_i <psi_i|f> psi_i``."""
    op = operator or _operator(psi, grid, f.box, normalization, evaluation, eps)
    return SampledField(f.box, op.normal(f.spectrum)[0], domain="frequency").to_space()


def analyze_direct(
    f: SampledField,
    psi: MotherWavelet,
    grid,
    normalization: str = "L2",
    indices=None,
) -> NDArray[np.complex128]:
    """Coefficients by spatial quadrature against realized periodized atoms.

    ``indices`` selects flat grid positions (default: all). Slow; meant as a
    cross-check of :func:`analyze`.
    """
    offsets = grid.offsets()
    idx = np.arange(grid.size) if indices is None else np.asarray(indices)
    out = np.empty(idx.size, dtype=complex)
    for n, i in enumerate(idx):
        c = int(np.searchsorted(offsets, i, side="right") - 1)
        b = grid.lattices[c][1][i - offsets[c]]
        atom = Atom(psi, grid.cells[c].matrix, b, normalization)
        out[n] = inner(realize_atom(atom, f.box), f)
    return out


@dataclass(frozen=True)
class Reconstruction:
    field: SampledField
    iterations: int
    residual: float
    converged: bool
    history: tuple[float, ...] = ()


def _stalled(history, window):
    if len(history) <= window:
        return False
    return min(history[-window:]) >= min(history[:-window])


def reconstruct(
    coeffs: CoefficientSet,
    psi: MotherWavelet,
    box: BoxSpec,
    iters: int = 200,
    tol: float = 1e-8,
    evaluation: str = "exact",
    eps: float = 1e-13,
    operator: AnalysisOperator | None = None,
    stall_window: int = 10,
) -> Reconstruction:
    """Solve ``T*T f = T* c`` by conjugate gradients.

    Stops at relative residual ``tol`` or after ``iters`` iterations and
    reports which. Raises :class:`StagnationError` when the best residual
    has not improved for ``stall_window`` iterations.
    """
    op = operator or _operator(psi, coeffs.grid, box, coeffs.normalization, evaluation, eps)
    y = op.adjoint(coeffs.values)[0]
    ynorm = np.linalg.norm(y)
    x = np.zeros_like(y)
    if ynorm == 0:
        return Reconstruction(SampledField(box, x, "frequency").to_space(), 0, 0.0, True, (0.0,))
    r = y.copy()
    p = r.copy()
    rr = np.vdot(r, r).real
    history = [1.0]
    it = 0
    while it < iters:
        Ap = op.normal(p)[0]
        alpha = rr / np.vdot(p, Ap).real
        x += alpha * p
        r -= alpha * Ap
        rr_new = np.vdot(r, r).real
        it += 1
        history.append(float(np.sqrt(rr_new) / ynorm))
        if history[-1] <= tol:
            break
        if _stalled(history, stall_window):
            raise StagnationError("frame too loose or not a frame: residual stopped decreasing")
        p = r + (rr_new / rr) * p
        rr = rr_new
    field_ = SampledField(box, x, domain="frequency").to_space()
    return Reconstruction(field_, it, history[-1], history[-1] <= tol, tuple(history))


def frame_algorithm(
    coeffs: CoefficientSet,
    psi: MotherWavelet,
    box: BoxSpec,
    A: float,
    B: float,
    iters: int = 1,
    evaluation: str = "exact",
    eps: float = 1e-13,
    operator: AnalysisOperator | None = None,
) -> Reconstruction:
    """Richardson iteration ``f <- f + 2/(A+B) (T* c - T*T f)`` from ``f = 0``."""
    op = operator or _operator(psi, coeffs.grid, box, coeffs.normalization, evaluation, eps)
    y = op.adjoint(coeffs.values)[0]
    ynorm = np.linalg.norm(y) or 1.0
    x = np.zeros_like(y)
    lam = 2.0 / (A + B)
    history = []
    for _ in range(iters):
        r = y - op.normal(x)[0]
        x = x + lam * r
        history.append(float(np.linalg.norm(y - op.normal(x)[0]) / ynorm))
    field_ = SampledField(box, x, domain="frequency").to_space()
    return Reconstruction(field_, iters, history[-1] if history else 1.0, False, tuple(history))


# -- coefficient files ----------------------------------------------------------


def write_coefficients_csv(path, coeffs: CoefficientSet, header: str | None = None) -> None:
    grid = coeffs.grid
    table = grid.index_table()
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(index_names(grid.dim) + ["re", "im"])
        for row, z in zip(table, coeffs.values):
            w.writerow([*map(int, row), repr(float(z.real)), repr(float(z.imag))])


def read_coefficients_csv(path) -> tuple[NDArray[np.int64], NDArray[np.complex128]]:
    """Index table and values of a coefficient CSV (comment lines skipped)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    body = rows[1:]
    n_idx = len(rows[0]) - 2
    table = np.array([[int(v) for v in r[:n_idx]] for r in body], dtype=np.int64)
    values = np.array([complex(float(r[n_idx]), float(r[n_idx + 1])) for r in body])
    return table.reshape(len(body), n_idx), values


def write_coefficients_binary(path, coeffs: CoefficientSet) -> None:
    """Little-endian: magic, dim, index columns, count, int64 index table, re/im pairs."""
    table = coeffs.grid.index_table().astype("<i8")
    with open(path, "wb") as fh:
        fh.write(COEFF_MAGIC)
        fh.write(struct.pack("<qqq", coeffs.grid.dim, table.shape[1], table.shape[0]))
        fh.write(table.tobytes())
        fh.write(coeffs.values.astype("<c16").view("<f8").tobytes())


def read_coefficients_binary(path) -> tuple[NDArray[np.int64], NDArray[np.complex128]]:
    data = Path(path).read_bytes()
    if data[:4] != COEFF_MAGIC:
        raise DomainError(f"{path}: not a coefficient file (bad magic)")
    dim, ncols, count = struct.unpack_from("<qqq", data, 4)
    off = 28
    table = np.frombuffer(data, dtype="<i8", count=ncols * count, offset=off).reshape(count, ncols)
    off += 8 * ncols * count
    flat = np.frombuffer(data, dtype="<f8", count=2 * count, offset=off)
    return table.astype(np.int64), flat[0::2] + 1j * flat[1::2]
