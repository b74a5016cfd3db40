"""Quaternionic systems lifted from complex bases and frames.

A quaternionic field is a pair ``(f1, f2)`` with 2x2 form
``[[f1, -conj f2], [f2, conj f1]]``. A complex system ``phi_n`` lifts to

    diagonal:  Phi_n = (phi_n, 0)                       -> diag(phi_n, conj phi_n)
    mixed:     Psi_n = (phi_n, -conj phi_n) / sqrt(2)

For a member ``(m1, m2)`` and a field ``(f1, f2)`` the quaternion
``(M|F) = z1 + z2 j`` has ``z1 = <m1|f1> + <m2|f2>`` and
``z2 = V sum (f2 m1 - f1 m2)``. Writing ``a = <phi|f1>`` and
``c = V sum phi f2 = conj <phi|conj f2>``, the diagonal lift gives
``(a, c)`` and the mixed lift ``((a - c), (a + c)) / sqrt(2)``; both have
modulus ``|a|^2 + |c|^2``, so the lifted frame sum is the complex frame sum
of ``f1`` plus that of ``conj f2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .analysis import AnalysisOperator, index_names
from .errors import DomainError, ShapeError, VerdictError
from .fields import BoxSpec, QuaternionField, SampledField
from .framebounds import EmpiricalBounds, FrameReport, _ritz
from .quaternion import Quaternion

__all__ = [
    "LiftedSystem",
    "PreservationReport",
    "Expansion",
    "conjugate_system",
    "lift",
    "expand",
    "verify_frame_preservation",
    "lifted_empirical_bounds",
    "lift_wavelet_frame",
    "write_lifted_coefficients_csv",
]

MODES = ("diagonal", "mixed")
_R2 = np.sqrt(0.5)


def conjugate_system(phis) -> list[SampledField]:
    """Pointwise complex conjugates of every member."""
    return [p.conj() for p in phis]


class LiftedSystem:
    """Diagonal or mixed lift of a complex system, stored through its source.

    The source is either an explicit list of fields or a wavelet analysis
    operator (members realized only on request). Coefficients are
    ``(Phi_n|F)`` as an array of quaternion components ``(N, 4)``.
    """

    def __init__(self, source=None, mode: str = "diagonal", operator: AnalysisOperator | None = None):
        if mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if (source is None) == (operator is None):
            raise DomainError("give either explicit fields or an analysis operator")
        self.mode = mode
        self.operator = operator
        self.certificate: FrameReport | None = None
        if operator is not None:
            self.source = None
            self.box = operator.box
            self._n = operator.size
        else:
            source = list(source)
            if not source:
                raise DomainError("empty system")
            box = source[0].box
            for p in source:
                if p.box != box:
                    raise ShapeError("system members live on different boxes")
            self.source = source
            self.box = box
            self._n = len(source)
            self._phi = np.stack([p.samples.ravel() for p in source])

    def __len__(self) -> int:
        return self._n

    def member(self, n: int) -> QuaternionField:
        """The lifted member ``n`` as a pair of fields."""
        phi = self._source_field(n)
        if self.mode == "diagonal":
            return QuaternionField(phi, SampledField.zeros(self.box))
        return QuaternionField(phi * _R2, -phi.conj() * _R2)

    def members(self):
        for n in range(len(self)):
            yield self.member(n)

    def _source_field(self, n: int) -> SampledField:
        if self.source is not None:
            return self.source[n]
        e = np.zeros((1, self._n), dtype=complex)
        e[0, n] = 1.0
        return SampledField(self.box, self.operator.adjoint(e)[0], domain="frequency").to_space()

    def _combine(self, a, c):
        if self.mode == "diagonal":
            return a, c
        return (a - c) * _R2, (a + c) * _R2

    def _pair_parts(self, F: QuaternionField):
        if F.box != self.box:
            raise ShapeError("field and system boxes differ")
        V = self.box.cell_volume
        if self.source is not None:
            a = V * (np.conj(self._phi) @ F.f1.samples.ravel())
            c = V * (self._phi @ F.f2.samples.ravel())
            return a, c
        a = self.operator.forward(F.f1.spectrum)[0]
        c = np.conj(self.operator.forward(F.f2.conj().spectrum)[0])
        return a, c

    def coefficient_pairs(self, F: QuaternionField) -> tuple[NDArray, NDArray]:
        """``(z1, z2)`` of ``(Phi_n|F)`` for every member."""
        return self._combine(*self._pair_parts(F))

    def coefficients(self, F: QuaternionField) -> NDArray[np.float64]:
        z1, z2 = self.coefficient_pairs(F)
        return np.stack([z1.real, z2.imag, z2.real, z1.imag], axis=-1)

    def synthesize(self, z1, z2) -> QuaternionField:
        """``sum_n Phi_n q_n`` for quaternions ``q_n = z1_n + z2_n j``."""
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        # right_scale of (m1, m2) by (w1, w2): (m1 w1 - conj(m2) w2, m2 w1 + conj(m1) w2)
        if self.mode == "diagonal":
            g1 = self._sum(z1)
            g2 = np.conj(self._sum(np.conj(z2)))
        else:
            # m1 = phi/sqrt2, m2 = -conj(phi)/sqrt2
            g1 = (self._sum(z1) + self._sum(z2)) * _R2
            g2 = np.conj(self._sum(np.conj(z2)) - self._sum(np.conj(z1))) * _R2
        return QuaternionField(SampledField(self.box, g1), SampledField(self.box, g2))

    def _sum(self, w):
        # sum_n w_n phi_n as samples
        if self.source is not None:
            return (w @ self._phi).reshape(self.box.shape)
        spec = self.operator.adjoint(w[None])[0]
        return SampledField(self.box, spec, domain="frequency").samples

    def lifted_gram(self, F_list) -> NDArray[np.complex128]:
        """``K[i, j] = sum_n conj(z_n(F_i)) . z_n(F_j)`` over the pair ``z = (z1, z2)``."""
        if self.source is not None:
            parts = [self.coefficient_pairs(F) for F in F_list]
            Z1 = np.stack([p[0] for p in parts])
            Z2 = np.stack([p[1] for p in parts])
            return np.conj(Z1) @ Z1.T + np.conj(Z2) @ Z2.T
        op = self.operator
        S1 = np.stack([F.f1.spectrum for F in F_list])
        S2 = np.stack([F.f2.conj().spectrum for F in F_list])
        P = len(F_list)
        K = np.zeros((P, P), dtype=complex)
        off = op.grid.offsets()
        for c in range(len(op.grid.cells)):
            if off[c + 1] == off[c]:
                continue
            a = op.cell_coefficients(c, S1)
            cc = np.conj(op.cell_coefficients(c, S2))
            z1, z2 = self._combine(a, cc)
            K += np.conj(z1) @ z1.T + np.conj(z2) @ z2.T
        return K


def lift(phis, mode: str = "diagonal") -> LiftedSystem:
    return LiftedSystem(phis, mode)


def quaternion_modulus_matrix(z1, z2) -> NDArray[np.complex128]:
    """``sum_n q_n^dagger q_n`` in 2x2 form for ``q_n = z1_n + z2_n j``."""
    z1 = np.atleast_1d(z1)
    z2 = np.atleast_1d(z2)
    M = np.empty(z1.shape + (2, 2), dtype=complex)
    M[..., 0, 0] = z1
    M[..., 0, 1] = -np.conj(z2)
    M[..., 1, 0] = z2
    M[..., 1, 1] = np.conj(z1)
    return np.einsum("nji,njk->ik", np.conj(M), M)


@dataclass(frozen=True)
class Expansion:
    coefficients: NDArray[np.float64]
    reconstruction: QuaternionField
    residual: float
    relative_residual: float


def expand(F: QuaternionField, system: LiftedSystem) -> Expansion:
    """Coefficients ``q_n = (Phi_n|F)`` and the partial sum ``sum Phi_n q_n``."""
    z1, z2 = system.coefficient_pairs(F)
    R = system.synthesize(z1, z2)
    res = float(np.sqrt((F - R).norm2()))
    nrm = float(np.sqrt(F.norm2()))
    coeffs = np.stack([z1.real, z2.imag, z2.real, z1.imag], axis=-1)
    return Expansion(coeffs, R, res, res / nrm if nrm > 0 else res)


@dataclass(frozen=True)
class PreservationReport:
    """Diagonal frame sums per probe divided by ``||F||^2`` against ``[A, B]``."""

    A: float
    B: float
    ratios: NDArray[np.float64]
    worst_lower_margin: float
    worst_upper_margin: float
    max_offdiag: float
    ok: bool

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "ratios": self.ratios.tolist(),
            "worst_lower_margin": self.worst_lower_margin,
            "worst_upper_margin": self.worst_upper_margin,
            "max_offdiag": self.max_offdiag,
            "ok": self.ok,
        }


def verify_frame_preservation(system, A: float, B: float, probe_fields, rtol: float = 1e-9):
    """Check ``A ||F||^2 <= sum_n |(F|Phi_n)|^2 <= B ||F||^2`` on both diagonal entries.

    ``system`` is a :class:`LiftedSystem` or a list of complex fields (lifted
    diagonally). Off-diagonal entries must vanish; a magnitude above
    ``1e-12`` of the diagonal raises ``AssertionError``.
    """
    if not isinstance(system, LiftedSystem):
        system = lift(system)
    if not probe_fields:
        raise DomainError("empty probe set")
    ratios, lower, upper, off = [], [], [], 0.0
    for F in probe_fields:
        n2 = F.norm2()
        if n2 == 0:
            raise DomainError("zero probe field")
        z1, z2 = system.coefficient_pairs(F)
        M = quaternion_modulus_matrix(z1, z2)
        scale = max(abs(M[0, 0]), abs(M[1, 1]), 1e-300)
        o = max(abs(M[0, 1]), abs(M[1, 0])) / scale
        assert o < 1e-12, f"lifted frame sum not diagonal (relative {o:.3e})"
        off = max(off, o)
        d = np.array([M[0, 0].real, M[1, 1].real]) / n2
        ratios.append(d)
        lower.append(np.min(d) - A)
        upper.append(B - np.max(d))
    lo = float(min(lower))
    hi = float(min(upper))
    tol = rtol * max(abs(A), abs(B), 1.0)
    return PreservationReport(A, B, np.array(ratios), lo, hi, off, lo >= -tol and hi >= -tol)


def _pair_probes(box: BoxSpec, probes) -> list[QuaternionField]:
    # (p, 0) and (0, conj p) for every complex probe p
    if isinstance(probes, np.ndarray):
        fields = [SampledField(box, s, domain="frequency") for s in probes]
    else:
        fields = list(probes)
    zero = SampledField.zeros(box)
    return [QuaternionField(p, zero) for p in fields] + [QuaternionField(zero, p.conj()) for p in fields]


def lifted_empirical_bounds(system: LiftedSystem, probes, batch: int = 64) -> EmpiricalBounds:
    """Extremal lifted Rayleigh quotients over the span of pair probes.

    Every complex probe ``p`` yields the quaternionic probes ``(p, 0)`` and
    ``(0, conj p)``; the lifted frame sum is computed from lifted
    coefficients and compressed to their span.
    """
    F = _pair_probes(system.box, probes)
    if not F:
        raise DomainError("empty probe set")
    P = len(F)
    K = np.zeros((P, P), dtype=complex)
    for s in range(0, P, batch):
        for t in range(s, P, batch):
            if s == t:
                K[s : s + batch, s : s + batch] = system.lifted_gram(F[s : s + batch])
            else:
                Kb = system.lifted_gram(F[s : s + batch] + F[t : t + batch])
                n = min(batch, P - s)
                K[s : s + n, t : t + batch] = Kb[:n, n:]
                K[t : t + batch, s : s + n] = Kb[n:, :n]
    V = system.box.cell_volume
    X1 = np.stack([f.f1.samples.ravel() for f in F])
    X2 = np.stack([f.f2.samples.ravel() for f in F])
    G = V * (np.conj(X1) @ X1.T + np.conj(X2) @ X2.T)
    quot = np.real(np.diag(K)) / np.real(np.diag(G))
    vals, rank = _ritz(K, G)
    return EmpiricalBounds(
        A_emp=float(min(vals[0], quot.min())),
        B_emp=float(max(vals[-1], quot.max())),
        probe_min=float(quot.min()),
        probe_max=float(quot.max()),
        ritz_min=float(vals[0]),
        ritz_max=float(vals[-1]),
        n_probes=P,
        rank=rank,
    )


def lift_wavelet_frame(
    psi,
    grid,
    box: BoxSpec,
    report: FrameReport,
    normalization: str = "L2",
    mode: str = "diagonal",
    eps: float = 1e-11,
) -> LiftedSystem:
    """Diagonal lift of every wavelet atom, in grid enumeration order.

    Refuses unless ``report`` (from :func:`~quatwave.framebounds.frame_verdict`)
    certifies the complex system as a frame.
    """
    if report is None or report.verdict != "frame":
        raise VerdictError("underlying complex system not certified as frame")
    op = AnalysisOperator(psi, grid, box, normalization, "exact", eps)
    system = LiftedSystem(operator=op, mode=mode)
    system.certificate = report
    return system


def write_lifted_coefficients_csv(path, system: LiftedSystem, coefficients, header: str | None = None):
    """Index columns (grid indices, or ``n`` for explicit systems) then ``q0..q3``."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (len(system), 4):
        raise ShapeError(f"expected ({len(system)}, 4) coefficients")
    if system.operator is not None:
        grid = system.operator.grid
        names = index_names(grid.dim)
        idx = grid.index_table()
    else:
        names = ["n"]
        idx = np.arange(len(system))[:, None]
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["q0", "q1", "q2", "q3"])
        for i, q in zip(idx, coefficients):
            w.writerow([int(v) for v in i] + [repr(float(v)) for v in q])


def read_lifted_coefficients_csv(path) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    head, body = rows[0], rows[1:]
    k = len(head) - 4
    idx = np.array([[int(v) for v in r[:k]] for r in body], dtype=np.int64).reshape(-1, k)
    q = np.array([[float(v) for v in r[k:]] for r in body]).reshape(-1, 4)
    return idx, q


def as_quaternions(coefficients) -> list[Quaternion]:
    return [Quaternion.from_array(c) for c in np.asarray(coefficients)]
