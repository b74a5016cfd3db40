"""Mother wavelets, admissibility, and dilated-rotated-translated atoms.

Fourier conventions are unitary: ``fhat(k) = (2 pi)^(-d/2) int exp(-i k.x) f(x) dx``.
An atom with dilation matrix ``A`` and translation ``b`` is

    psi_{A,b}(x) = c(A) psi(A^{-1} (x - b)),  psihat_{A,b}(k) = c(A) |det A| exp(-i k.b) psihat(A^T k)

with ``c(A) = |det A|^{-1/2}`` (L2 normalization, unitary on L2) or
``c(A) = |det A|^{-1}`` (L1 normalization, spectrum amplitude preserved).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _nufft
from .errors import DivergenceError, DomainError, InadmissibleError
from .fields import BoxSpec, SampledField
from .quaternion import DihedralSimilitude, rotation

__all__ = [
    "MotherWavelet",
    "Atom",
    "laplacian_of_gaussian",
    "morlet",
    "gaussian",
    "from_field",
    "by_name",
    "duflo_moore_norm",
    "atom_spectrum",
    "atom_space",
    "realize_atom",
    "atom_dft",
    "normalization_factor",
]

NORMALIZATIONS = ("L2", "L1")


@dataclass(frozen=True)
class MotherWavelet:
    """A mother wavelet given by its spectrum and, when known, its space form.

    ``space_radius`` bounds the region where ``|psi|`` exceeds about 1e-16 of
    its peak, ``spectral_radius`` the same for ``|psihat|``. Both functions
    take arrays of shape ``(..., dim)``.
    """

    name: str
    dim: int
    spectrum_fn: Callable = field(repr=False, compare=False)
    space_fn: Callable | None = field(default=None, repr=False, compare=False)
    space_radius: float = np.inf
    spectral_radius: float = np.inf
    params: tuple = ()

    def spectrum(self, k: ArrayLike) -> NDArray[np.complex128]:
        return np.asarray(self.spectrum_fn(np.asarray(k, dtype=float)), dtype=complex)

    def space(self, x: ArrayLike) -> NDArray[np.complex128]:
        if self.space_fn is None:
            raise DomainError(f"{self.name}: no space-domain form, realize atoms on a box instead")
        return np.asarray(self.space_fn(np.asarray(x, dtype=float)), dtype=complex)

    def scaled(self, c: complex) -> MotherWavelet:
        """The wavelet multiplied by a constant."""
        sp, fn = self.spectrum_fn, self.space_fn
        return MotherWavelet(
            f"{c}*{self.name}",
            self.dim,
            lambda k: c * sp(k),
            None if fn is None else (lambda x: c * fn(x)),
            self.space_radius,
            self.spectral_radius,
            self.params,
        )


def _sq(v):
    return np.sum(v * v, axis=-1)


def laplacian_of_gaussian(dim: int, width: float = 1.0) -> MotherWavelet:
    """Isotropic Mexican hat: ``psihat(k) = |w k|^2 exp(-|w k|^2 / 2)``.

    Space form ``w^-d (d - |x/w|^2) exp(-|x/w|^2 / 2)``.
    """

    def spectrum(k):
        r2 = _sq(k) * width**2
        return r2 * np.exp(-r2 / 2)

    def space(x):
        r2 = _sq(x) / width**2
        return (dim - r2) * np.exp(-r2 / 2) / width**dim

    return MotherWavelet(
        "log", dim, spectrum, space, 9.2 * width, 9.5 / width, (("width", width),)
    )


def morlet(dim: int, k0: ArrayLike | None = None, width: float = 1.0) -> MotherWavelet:
    """Directional Morlet wavelet with its DC term removed.

    ``psihat(k) = exp(-w^2 |k - k0|^2 / 2) - exp(-w^2 |k0|^2 / 2) exp(-w^2 |k|^2 / 2)``.
    """
    k0 = np.zeros(dim) if k0 is None else np.asarray(k0, dtype=float)
    if k0.shape != (dim,):
        raise DomainError(f"k0 must have {dim} components")
    dc = np.exp(-(width**2) * float(k0 @ k0) / 2)

    def spectrum(k):
        return np.exp(-(width**2) * _sq(k - k0) / 2) - dc * np.exp(-(width**2) * _sq(k) / 2)

    def space(x):
        env = np.exp(-_sq(x) / (2 * width**2)) / width**dim
        return (np.exp(1j * (x @ k0)) - dc) * env

    return MotherWavelet(
        "morlet",
        dim,
        spectrum,
        space,
        8.8 * width,
        float(np.linalg.norm(k0)) + 9.0 / width,
        (("k0", tuple(k0)), ("width", width)),
    )


def gaussian(dim: int, width: float = 1.0) -> MotherWavelet:
    """Gaussian ``exp(-|w k|^2 / 2)``; not admissible (nonzero mean)."""

    def spectrum(k):
        return np.exp(-_sq(k) * width**2 / 2)

    def space(x):
        return np.exp(-_sq(x) / (2 * width**2)) / width**dim

    return MotherWavelet("gaussian", dim, spectrum, space, 8.8 * width, 9.0 / width, (("width", width),))


def from_field(f: SampledField, name: str = "custom") -> MotherWavelet:
    """Mother wavelet from space samples on a box.

    The spectrum is the continuous transform of the sampled function (a
    trigonometric sum, exact at any wavevector) and the space form is the
    trigonometric interpolant of the samples.
    """
    box = f.box
    samples = f.samples.copy()
    spec = f.spectrum.copy()
    h = box.spacing
    L = np.asarray(box.side_length)
    c = (2 * np.pi) ** (-box.dim / 2) * box.cell_volume

    def spectrum(k):
        k = np.asarray(k, dtype=float)
        flat = k.reshape(-1, box.dim)
        # sample n sits at (n - N/2) h, matching finufft's centred mode order
        out = _nufft.type2(samples, flat * h, isign=-1, modeord=0)
        return (c * out).reshape(k.shape[:-1])

    def space(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, box.dim)
        out = _nufft.type2(spec, 2 * np.pi * flat / L, isign=1, modeord=1)
        return (out / np.sqrt(box.size)).reshape(x.shape[:-1])

    return MotherWavelet(name, box.dim, spectrum, space, float(np.max(L)), box.nyquist())


def by_name(name: str, dim: int, **params) -> MotherWavelet:
    """Look up a shipped wavelet (``log``, ``morlet``, ``gaussian``) or load ``file:<path>``."""
    if name in ("log", "laplacian_of_gaussian", "mexican_hat"):
        return laplacian_of_gaussian(dim, **params)
    if name == "morlet":
        return morlet(dim, **params)
    if name == "gaussian":
        return gaussian(dim, **params)
    if name.startswith("file:"):
        from .fields import read_field

        f = read_field(name[5:])
        if f.box.dim != dim:
            raise DomainError(f"wavelet file has dimension {f.box.dim}, expected {dim}")
        return from_field(f, name)
    raise DomainError(f"unknown mother wavelet {name!r}")


# -- admissibility -------------------------------------------------------------


def _weighted_sum(psi: MotherWavelet, k_max: float, dk: float) -> float:
    """Riemann sum of ``(2 pi)^d |psihat|^2 / |k|^d`` over a grid through 0, zero bin dropped."""
    d = psi.dim
    n = int(np.ceil(k_max / dk))
    ax = np.arange(-n, n + 1) * dk
    total = 0.0
    k = np.empty((len(ax),) * (d - 1) + (d,))
    k[..., 1:] = np.stack(np.meshgrid(*([ax] * (d - 1)), indexing="ij"), axis=-1)
    rest2 = _sq(k[..., 1:])
    for k0 in ax:
        k[..., 0] = k0
        r2 = rest2 + k0 * k0
        amp = np.abs(psi.spectrum(k)) ** 2
        if k0 == 0:
            r2 = np.where(r2 > 0, r2, np.inf)
        total += float(np.sum(amp / r2 ** (d / 2)))
    return total * (2 * np.pi) ** d * dk**d


def duflo_moore_norm(
    psi: MotherWavelet,
    k_max: float | None = None,
    dk: float | None = None,
    rtol: float = 1e-3,
    max_points: float = 1.5e8,
) -> float:
    """Admissibility constant ``(2 pi)^d int |psihat(k)|^2 / |k|^d dk``.

    The integral is a Riemann sum on a grid through the origin with the
    zero bin left out. The grid is halved until two successive sums agree
    to ``rtol``; sums that keep growing are reported as divergent.

    Raises
    ------
    InadmissibleError
        If ``psihat(0)`` does not vanish.
    DivergenceError
        If the refinement never settles within ``max_points`` grid points.
    """
    d = psi.dim
    zero = np.zeros((1, d))
    peak = _spectral_peak(psi)
    if abs(psi.spectrum(zero)[0]) > 1e-12 * max(peak, 1e-300):
        raise InadmissibleError("inadmissible: nonvanishing DC")
    if k_max is None:
        k_max = _integrand_radius(psi)
    if dk is None:
        dk = k_max / 24
    history = [_weighted_sum(psi, k_max, dk)]
    while True:
        dk /= 2
        if (2 * k_max / dk + 1) ** d > max_points:
            break
        history.append(_weighted_sum(psi, k_max, dk))
        prev, cur = history[-2], history[-1]
        if cur == 0 and prev == 0:
            return 0.0
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
    incs = np.abs(np.diff(history))
    if len(incs) >= 2 and incs[-1] > 0.5 * incs[-2]:
        raise DivergenceError(
            f"inadmissible: weighted spectrum sums keep growing under refinement {history}"
        )
    raise DivergenceError(f"weighted spectrum sums not refinement-stable within budget {history}")


def _integrand_radius(psi: MotherWavelet, rel: float = 1e-14) -> float:
    """Radius beyond which the radial admissibility density ``|psihat|^2 / r`` is negligible."""
    if not np.isfinite(psi.spectral_radius):
        raise DomainError("k_max required for wavelets without a spectral radius")
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((64, psi.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = np.linspace(0, psi.spectral_radius, 512)[1:]
    dens = np.max(np.abs(psi.spectrum(r[:, None, None] * dirs[None])) ** 2, axis=1) / r
    live = np.nonzero(dens > rel * dens.max())[0]
    return float(r[min(live[-1] + 1, len(r) - 1)]) if len(live) else float(psi.spectral_radius)


def _spectral_peak(psi: MotherWavelet) -> float:
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((64, psi.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = np.linspace(0, psi.spectral_radius if np.isfinite(psi.spectral_radius) else 10.0, 64)
    k = r[:, None, None] * dirs[None]
    return float(np.max(np.abs(psi.spectrum(k))))


# -- atoms -----------------------------------------------------------------------


def normalization_factor(det: float, normalization: str) -> float:
    """Amplitude factor of an atom with ``|det A| = det``."""
    if normalization == "L2":
        return det**-0.5
    if normalization == "L1":
        return 1.0 / det
    raise DomainError(f"normalization must be one of {NORMALIZATIONS}")


@dataclass(frozen=True)
class Atom:
    """``psi`` dilated/rotated by ``matrix`` and translated by ``translation``."""

    mother: MotherWavelet
    matrix: NDArray[np.float64] = field(repr=False)
    translation: NDArray[np.float64]
    normalization: str = "L2"

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.translation, dtype=float)
        d = self.mother.dim
        if A.shape != (d, d) or b.shape != (d,):
            raise DomainError(f"atom needs a {d}x{d} matrix and a {d}-vector")
        if abs(np.linalg.det(A)) == 0:
            raise DomainError("dilation part is singular")
        if self.normalization not in NORMALIZATIONS:
            raise DomainError(f"normalization must be one of {NORMALIZATIONS}")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "translation", b)

    @classmethod
    def planar(cls, mother, a: float, theta: float, b=(0.0, 0.0), normalization="L2") -> Atom:
        return cls(mother, a * rotation(theta), np.asarray(b, float), normalization)

    @classmethod
    def quaternionic(cls, mother, sim: DihedralSimilitude, b=(0.0,) * 4, normalization="L2") -> Atom:
        return cls(mother, sim.matrix(), np.asarray(b, float), normalization)

    @classmethod
    def at(cls, mother, point, normalization="L2") -> Atom:
        """Atom of a grid point (:class:`GridPoint2D` or :class:`GridPoint4D`)."""
        return cls(mother, point.matrix, np.asarray(point.b, float), normalization)

    @property
    def det(self) -> float:
        return float(abs(np.linalg.det(self.matrix)))

    @property
    def amplitude(self) -> float:
        return normalization_factor(self.det, self.normalization)

    @property
    def radius(self) -> float:
        """Radius around the translation outside which the atom is negligible."""
        return float(np.linalg.norm(self.matrix, 2)) * self.mother.space_radius


def atom_spectrum(atom: Atom, k: ArrayLike) -> NDArray[np.complex128]:
    """Continuous unitary Fourier transform of the atom at wavevectors ``k``."""
    k = np.asarray(k, dtype=float)
    scale = atom.amplitude * atom.det
    return scale * np.exp(-1j * (k @ atom.translation)) * atom.mother.spectrum(k @ atom.matrix)


def atom_space(atom: Atom, x: ArrayLike) -> NDArray[np.complex128]:
    """The atom at positions ``x`` of shape ``(..., dim)`` (no periodization)."""
    x = np.asarray(x, dtype=float)
    Ainv_T = np.linalg.inv(atom.matrix).T
    return atom.amplitude * atom.mother.space((x - atom.translation) @ Ainv_T)


def _image_shifts(atom: Atom, box: BoxSpec) -> np.ndarray:
    L = np.asarray(box.side_length)
    b = atom.translation
    R = atom.radius
    lo = np.ceil((-L / 2 - R - b) / L).astype(int)
    hi = np.floor((L / 2 + R - b) / L).astype(int)
    axes = [np.arange(a, c + 1) for a, c in zip(lo, hi)]
    p = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    centres = b + p * L
    # distance from each image centre to the box
    gap = np.maximum(np.abs(centres) - L / 2, 0.0)
    return p[np.linalg.norm(gap, axis=1) <= R]


def realize_atom(atom: Atom, box: BoxSpec) -> SampledField:
    """Sample the box-periodized atom.

    With a space form the periodic images are summed directly; otherwise the
    atom is the trigonometric interpolant of its sampled spectrum.
    """
    if atom.mother.space_fn is None or not np.isfinite(atom.radius):
        return SampledField(box, atom_dft(atom, box), domain="frequency").to_space()
    L = np.asarray(box.side_length)
    Ainv_T = np.linalg.inv(atom.matrix).T
    u0 = box.positions() @ Ainv_T
    axes = box.axes()
    R = atom.radius
    total = np.zeros(box.shape, dtype=complex)
    for p in _image_shifts(atom, box):
        c = atom.translation + p * L
        # only samples within the atom's radius of this image contribute
        block = tuple(
            slice(np.searchsorted(ax, ci - R), np.searchsorted(ax, ci + R, side="right"))
            for ax, ci in zip(axes, c)
        )
        total[block] += atom.mother.space(u0[block] - c @ Ainv_T)
    return SampledField(box, atom.amplitude * total)


def atom_dft(atom: Atom, box: BoxSpec) -> NDArray[np.complex128]:
    """DFT bins (FFT order) predicted by the closed-form atom spectrum."""
    return atom_spectrum(atom, box.wavevectors()) / box.spectral_scale
