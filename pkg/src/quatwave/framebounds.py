"""Frame-bound criteria in the Fourier domain and their empirical check.

Let ``g_b(k) = sum_c w_c |psihat(A_c^T k + b)| |psihat(A_c^T k)|`` summed
over the dilation-rotation cells ``c`` of a grid, with ``w_c = 1`` for
L2-normalized atoms and ``w_c = 1/|det A_c|`` for L1-normalized ones. For
translations ``b = A_c diag(beta) m`` Poisson summation splits the frame sum
into a diagonal part and aliasing terms at the shifts
``2 pi diag(1/beta) n``, ``n != 0``, which are the same for every cell. With

    s = inf_k g_0(k),   S = sup_k g_0(k),   alpha(b) = sup_k g_b(k),
    E = sum_{n != 0} sqrt(alpha(bt_n) alpha(-bt_n)),  C = (2 pi)^d / prod(beta),

the family is a frame with bounds ``C (s - E)`` and ``C (S + E)`` whenever
``s > E``. Infima and suprema run over a probe set of wavevectors covering
the frequency band of the signal class.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .analysis import AnalysisOperator
from .errors import DomainError, ShapeError
from .fields import BoxSpec, SampledField
from .wavelets import MotherWavelet, normalization_factor

__all__ = [
    "FrequencyBand",
    "FrameReport",
    "EmpiricalBounds",
    "ExplicitFrame",
    "frequency_probes",
    "overlap_sums",
    "compute_s",
    "compute_S",
    "alpha",
    "compute_E",
    "criteria",
    "empirical_bounds",
    "frame_verdict",
    "wave_packets",
    "dft_basis",
    "beta_sweep",
]

SUMMANDS = ("sqrt", "product")


@dataclass(frozen=True)
class FrequencyBand:
    """Annulus ``k_min <= |k| <= k_max`` occupied by the signal class."""

    k_min: float
    k_max: float

    def __post_init__(self):
        if not 0 <= self.k_min < self.k_max < np.inf:
            raise DomainError(f"invalid band [{self.k_min}, {self.k_max}]")


def _sphere_points(dim: int, n: int, seed: int = 0) -> NDArray[np.float64]:
    if dim == 2:
        ang = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    # scrambled Sobol points pushed through the normal quantile, then normalized
    u = qmc.Sobol(dim, scramble=True, seed=seed).random(n)
    v = _normal.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def frequency_probes(dim: int, band: FrequencyBand, n_radii: int, n_dirs: int, seed: int = 0):
    """Stratified probes: log-spaced moduli (endpoints included) times directions."""
    lo = max(band.k_min, 1e-6 * band.k_max)
    radii = np.geomspace(lo, band.k_max, n_radii)
    if band.k_min == 0:
        radii = np.concatenate([[0.0], radii])
    dirs = _sphere_points(dim, n_dirs, seed)
    return (radii[:, None, None] * dirs[None]).reshape(-1, dim)


def _cell_weights(grid, normalization: str) -> NDArray[np.float64]:
    dets = np.array([c.det for c in grid.cells])
    # frame-sum weight per cell: |amplitude|^2 |det A|^2 / |det A|
    return np.array([normalization_factor(d, normalization) ** 2 * d for d in dets])


class _Overlap:
    """Per-cell arguments ``A_c^T k`` and moduli ``|psihat|`` for a fixed probe set.

    ``g_b`` for many shifts reuses them; the unshifted sum uses the same
    products ``a * a``, so ``alpha(0) = S`` holds exactly.
    """

    def __init__(self, psi, grid, k, normalization="L2"):
        k = np.asarray(k, dtype=float)
        if k.ndim != 2 or k.shape[1] != grid.dim:
            raise ShapeError(f"probes must have shape (P, {grid.dim})")
        if k.shape[0] == 0:
            raise DomainError("empty probe set")
        self.psi = psi
        self.w = _cell_weights(grid, normalization)
        self.u = np.einsum("pi,cij->cpj", k, grid.matrices())
        self.a = np.abs(psi.spectrum(self.u))

    def sums(self, shift=None) -> NDArray[np.float64]:
        if shift is None:
            return self.w @ (self.a * self.a)
        b = np.asarray(shift, dtype=float)
        return self.w @ (self.a * np.abs(self.psi.spectrum(self.u + b)))

    def sup(self, shift=None) -> float:
        if shift is not None and not np.any(shift):
            shift = None
        return float(np.max(self.sums(shift)))


def overlap_sums(psi: MotherWavelet, grid, k, shift=None, normalization="L2") -> NDArray[np.float64]:
    """``g_b(k)`` at every probe ``k`` (shape ``(P, d)``); ``shift=None`` means ``b = 0``."""
    return _Overlap(psi, grid, k, normalization).sums(shift)


def compute_s(psi, grid, k_samples, normalization="L2") -> float:
    return float(np.min(overlap_sums(psi, grid, k_samples, None, normalization)))


def compute_S(psi, grid, k_samples, normalization="L2") -> float:
    return float(np.max(overlap_sums(psi, grid, k_samples, None, normalization)))


def alpha(psi, grid, b, k_samples, normalization="L2") -> float:
    """Supremum over probes of the shifted overlap sum."""
    return _Overlap(psi, grid, k_samples, normalization).sup(np.asarray(b, dtype=float))


def _shell(d, r):
    ax = np.arange(-r, r + 1)
    n = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return n[np.max(np.abs(n), axis=1) == r]


def _alias_sum(ov: _Overlap, betas, summand, rel_tail, max_shell):
    d = len(betas)
    total = 0.0
    zero_run = 0
    for r in range(1, max_shell + 1):
        n = _shell(d, r)
        # n and -n give the same summand; evaluate one of each pair
        half = n[[tuple(v) > tuple(-v) for v in n]]
        shell = 0.0
        for v in half:
            bt = 2 * np.pi * v / betas
            ap, am = ov.sup(bt), ov.sup(-bt)
            shell += 2 * (np.sqrt(ap * am) if summand == "sqrt" else ap * am)
        total += shell
        if shell == 0.0:
            zero_run += 1
            if zero_run >= 2:
                return total, r, True
            continue
        zero_run = 0
        if shell <= rel_tail * total:
            return total, r, True
    return total, max_shell, False


def _check_alias_args(betas, summand):
    betas = np.asarray(betas, dtype=float)
    if np.any(betas <= 0):
        raise DomainError("translation lattice degenerate: every beta must be positive")
    if summand not in SUMMANDS:
        raise DomainError(f"summand must be one of {SUMMANDS}")
    return betas


def compute_E(
    psi,
    grid,
    betas=None,
    k_samples=None,
    normalization="L2",
    summand="sqrt",
    rel_tail=1e-10,
    max_shell=64,
):
    """Aliasing sum over ``n != 0`` of ``sqrt(alpha(bt_n) alpha(-bt_n))``.

    Shells ``|n|_inf = r`` are added until a shell contributes less than
    ``rel_tail`` of the partial sum. ``summand="product"`` uses the plain
    product ``alpha(bt_n) alpha(-bt_n)`` instead. Returns ``(E, shells, converged)``.
    """
    betas = _check_alias_args(grid.betas if betas is None else betas, summand)
    ov = _Overlap(psi, grid, k_samples, normalization)
    return _alias_sum(ov, betas, summand, rel_tail, max_shell)


@dataclass
class Criteria:
    s: float
    S: float
    E: float
    constant: float
    n_probes: int
    shells: int
    converged: bool
    last_ring_share: float

    @property
    def A_candidate(self) -> float:
        return self.constant * (self.s - self.E)

    @property
    def B_candidate(self) -> float:
        return self.constant * (self.S + self.E)


def _last_ring_share(ov: _Overlap, grid) -> float:
    # share of S carried by the outermost ring, a truncation indicator
    total = ov.sums()
    i = int(np.argmax(total))
    outer = max(c.index[0] for c in grid.cells)
    keep = np.array([c.index[0] == outer for c in grid.cells])
    part = float(ov.w[keep] @ (ov.a[keep, i] ** 2))
    return part / total[i] if total[i] > 0 else 0.0


def criteria(
    psi: MotherWavelet,
    grid,
    band: FrequencyBand,
    normalization: str = "L2",
    n_radii: int = 48,
    n_dirs: int | None = None,
    rtol: float = 5e-3,
    max_levels: int = 4,
    summand: str = "sqrt",
    seed: int = 0,
    rel_tail: float = 1e-10,
) -> Criteria:
    """``s``, ``S``, ``E`` on a probe set refined until they change by less than ``rtol``.

    Radii and directions are doubled until ``s`` and ``S`` settle; ``E`` is
    then evaluated on the last two probe sets and must settle as well.
    Changes are measured relative to ``S`` (``max(S, E)`` for ``E``). ``converged`` is False when the
    refinement or the aliasing-shell truncation did not settle.
    """
    betas = _check_alias_args(grid.betas, summand)
    if max_levels < 2 or n_radii < 2:
        raise DomainError("refinement needs at least two levels and two radii")
    if n_dirs is None:
        n_dirs = 64 if grid.dim == 2 else 256
    const = (2 * np.pi) ** grid.dim / float(np.prod(betas))

    def level(j):
        # nested refinement: every level contains the previous probes
        k = frequency_probes(grid.dim, band, (n_radii - 1) * 2**j + 1, n_dirs * 2**j, seed)
        ov = _Overlap(psi, grid, k, normalization)
        g = ov.sums()
        return ov, float(g.min()), float(g.max())

    prev = level(0)
    settled = False
    for j in range(1, max_levels):
        cur = level(j)
        change = max(abs(cur[1] - prev[1]), abs(cur[2] - prev[2])) / max(cur[2], 1e-300)
        if change < rtol or cur[2] == 0:
            settled = True
            break
        prev = cur
    ov, s, S = cur
    E, shells, e_ok = _alias_sum(ov, betas, summand, rel_tail, 64)
    E_prev, _, _ = _alias_sum(prev[0], betas, summand, rel_tail, 64)
    settled = settled and abs(E - E_prev) <= rtol * max(S, E, 1e-300)
    return Criteria(s, S, E, const, ov.u.shape[1], shells, settled and e_ok, _last_ring_share(ov, grid))


# -- empirical side ----------------------------------------------------------------


class ExplicitFrame:
    """A finite family of fields; offers the same ``gram`` interface as the analysis operator."""

    def __init__(self, elements: list[SampledField]):
        if not elements:
            raise DomainError("empty frame")
        self.box = elements[0].box
        self.elements = np.stack([e.spectrum for e in elements])

    def coefficients(self, spectra) -> NDArray[np.complex128]:
        spectra = np.asarray(spectra, dtype=complex).reshape(-1, self.box.size)
        return self.box.cell_volume * np.conj(self.elements.reshape(len(self.elements), -1)) @ spectra.T

    def gram(self, spectra) -> NDArray[np.complex128]:
        C = self.coefficients(spectra)
        return np.conj(C).T @ C


@dataclass(frozen=True)
class EmpiricalBounds:
    A_emp: float
    B_emp: float
    probe_min: float
    probe_max: float
    ritz_min: float
    ritz_max: float
    n_probes: int
    rank: int


def _ritz(K, G, rcond=1e-10):
    K = (K + K.conj().T) / 2
    G = (G + G.conj().T) / 2
    lam, U = linalg.eigh(G)
    keep = lam > rcond * lam.max()
    Q = U[:, keep] / np.sqrt(lam[keep])
    vals = linalg.eigvalsh(Q.conj().T @ K @ Q)
    return vals, int(keep.sum())


def empirical_bounds(
    psi: MotherWavelet | None,
    grid,
    probe_signals,
    box: BoxSpec | None = None,
    normalization: str = "L2",
    eps: float = 1e-11,
    operator=None,
    batch: int = 64,
) -> EmpiricalBounds:
    """Extremal Rayleigh quotients ``sum_i |<psi_i|f>|^2 / ||f||^2``.

    ``probe_signals`` is a list of fields or an array of spectra ``(P, *shape)``.
    Reports the extremes over the probes themselves and the Rayleigh-Ritz
    extremes over their span (the frame operator compressed to the span,
    solved densely); ``A_emp``/``B_emp`` are the more extreme pair.
    ``operator`` may be any object with a ``gram(spectra)`` method, such as
    :class:`ExplicitFrame`.
    """
    if probe_signals is None or len(probe_signals) == 0:
        raise DomainError("empty probe set")
    if isinstance(probe_signals, np.ndarray):
        spectra = probe_signals
        if box is None and operator is None:
            raise DomainError("box required with raw spectra")
    else:
        spectra = np.stack([p.spectrum for p in probe_signals])
        box = box or probe_signals[0].box
    if operator is None:
        operator = AnalysisOperator(psi, grid, box, normalization, "exact", eps)
    box = box or operator.box
    P = spectra.shape[0]
    K = np.zeros((P, P), dtype=complex)
    for s in range(0, P, batch):
        for t in range(s, P, batch):
            if s == t:
                K[s : s + batch, s : s + batch] = operator.gram(spectra[s : s + batch])
            else:
                both = np.concatenate([spectra[s : s + batch], spectra[t : t + batch]])
                Kb = operator.gram(both)
                n = min(batch, P - s)
                K[s : s + n, t : t + batch] = Kb[:n, n:]
                K[t : t + batch, s : s + n] = Kb[n:, :n]
    flat = spectra.reshape(P, -1)
    G = box.cell_volume * np.conj(flat) @ flat.T
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


def wave_packets(
    box: BoxSpec,
    band: FrequencyBand,
    sigma: float,
    n_radii: int = 8,
    n_dirs: int = 8,
    centers=None,
    margin: float = 5.0,
    seed: int = 0,
) -> NDArray[np.complex128]:
    """Spectra of Gaussian wave packets whose spectra sit inside ``band``.

    Packet ``exp(-|x - c|^2 / (2 sigma^2)) exp(i k0.(x - c))`` has spectral
    width ``1/sigma``; its centre frequency ``|k0|`` stays ``margin/sigma``
    inside the band. Returns an array ``(P, *box.shape)``.
    """
    lo = band.k_min + margin / sigma
    hi = band.k_max - margin / sigma
    if lo > hi:
        raise DomainError("band too narrow for packets of this width")
    radii = np.linspace(lo, hi, n_radii)
    dirs = _sphere_points(box.dim, n_dirs, seed)
    centers = np.zeros((1, box.dim)) if centers is None else np.atleast_2d(centers)
    x = box.positions()
    out = []
    for c in centers:
        dx = x - c
        env = np.exp(-np.sum(dx * dx, axis=-1) / (2 * sigma**2))
        for r in radii:
            for u in dirs:
                f = env * np.exp(1j * (dx @ (r * u)))
                out.append(SampledField(box, f).spectrum)
    return np.stack(out)


def dft_basis(box: BoxSpec, band: FrequencyBand | None = None) -> NDArray[np.complex128]:
    """Unit-norm plane waves on the box (optionally only those inside ``band``), as spectra."""
    kk = np.linalg.norm(box.wavevectors(), axis=-1).ravel()
    keep = np.ones(kk.shape, bool) if band is None else (kk >= band.k_min) & (kk <= band.k_max)
    idx = np.nonzero(keep)[0]
    out = np.zeros((idx.size, box.size), dtype=complex)
    out[np.arange(idx.size), idx] = 1.0 / np.sqrt(box.cell_volume)
    return out.reshape((idx.size,) + box.shape)


@dataclass
class FrameReport:
    """Candidate and empirical frame bounds with the inputs that produced them."""

    s_val: float
    S_val: float
    E_val: float
    constant: float
    A_candidate: float
    B_candidate: float
    A_emp: float | None
    B_emp: float | None
    verdict: str
    converged: bool
    inputs: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def _verdict(crit: Criteria, emp: EmpiricalBounds | None, collapse: float) -> str:
    if not crit.converged:
        return "inconclusive"
    if crit.A_candidate > 0:
        return "frame"
    if emp is not None and emp.A_emp <= collapse * emp.B_emp:
        return "not-frame"
    return "inconclusive"


def frame_verdict(
    psi: MotherWavelet,
    grid,
    band: FrequencyBand,
    box: BoxSpec | None = None,
    probe_signals=None,
    normalization: str = "L2",
    summand: str = "sqrt",
    n_radii: int = 48,
    n_dirs: int | None = None,
    rtol: float = 5e-3,
    collapse: float = 1e-3,
    eps: float = 1e-11,
    seed: int = 0,
) -> FrameReport:
    """Evaluate the Fourier criteria and, given probes, the empirical bounds.

    Verdict ``frame`` when the candidate lower bound is positive on a
    converged probe set; ``not-frame`` when it is not and the empirical lower
    bound has collapsed below ``collapse * B_emp``; ``inconclusive`` otherwise.
    """
    crit = criteria(psi, grid, band, normalization, n_radii, n_dirs, rtol, summand=summand, seed=seed)
    emp = None
    if probe_signals is not None:
        emp = empirical_bounds(psi, grid, probe_signals, box, normalization, eps)
    inputs = {
        "wavelet": {"name": psi.name, "params": [list(p) for p in psi.params]},
        "grid": grid.as_dict(),
        "band": [band.k_min, band.k_max],
        "normalization": normalization,
        "summand": summand,
        "probe_budget": {"n_radii": n_radii, "n_dirs": n_dirs, "rtol": rtol, "seed": seed},
        "box": None if box is None else {"side_length": list(box.side_length), "samples": list(box.samples)},
    }
    details = {
        "n_probes": crit.n_probes,
        "alias_shells": crit.shells,
        "last_ring_share": crit.last_ring_share,
        "grid_points": grid.size,
    }
    if emp is not None:
        details["empirical"] = asdict(emp)
        # meaningful only when the truncated lattice covers the probes' support
        details["sandwich_holds"] = bool(
            crit.A_candidate <= emp.A_emp and emp.B_emp <= crit.B_candidate
        )
    return FrameReport(
        s_val=crit.s,
        S_val=crit.S,
        E_val=crit.E,
        constant=crit.constant,
        A_candidate=crit.A_candidate,
        B_candidate=crit.B_candidate,
        A_emp=None if emp is None else emp.A_emp,
        B_emp=None if emp is None else emp.B_emp,
        verdict=_verdict(crit, emp, collapse),
        converged=crit.converged,
        inputs=inputs,
        details=details,
    )


def beta_sweep(
    psi: MotherWavelet,
    grid,
    band: FrequencyBand,
    betas,
    box: BoxSpec,
    probe_signals,
    normalization: str = "L2",
    summand: str = "sqrt",
    eps: float = 1e-10,
    **criteria_kw,
) -> list[dict]:
    """Candidate and empirical bounds for each isotropic translation step in ``betas``."""
    rows = []
    for beta in betas:
        g = grid.with_betas(*([beta] * grid.dim))
        crit = criteria(psi, g, band, normalization, summand=summand, **criteria_kw)
        emp = empirical_bounds(psi, g, probe_signals, box, normalization, eps)
        rows.append(
            {
                "beta": float(beta),
                "A_candidate": crit.A_candidate,
                "B_candidate": crit.B_candidate,
                "A_emp": emp.A_emp,
                "B_emp": emp.B_emp,
                "s": crit.s,
                "S": crit.S,
                "E": crit.E,
                "grid_points": g.size,
            }
        )
    return rows
