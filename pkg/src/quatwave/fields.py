"""Sampled complex fields on periodic boxes and their quaternionic pairs.

Sample layout is centred: along an axis with ``N`` samples of spacing ``h``
the sample ``n`` sits at ``(n - N/2) h``, so index ``N/2`` is the origin.
Spectra are stored in FFT order with physical wavenumbers
``2 pi * fftfreq(N, h)``. The DFT is unitary with kernel ``exp(-i k.x)``
evaluated at the physical positions, so for a function decaying inside the
box, ``F[k] ~= fhat(k) / box.spectral_scale`` where ``fhat`` is the unitary
continuous Fourier transform ``(2 pi)^(-d/2) int exp(-i k.x) f(x) dx``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, ShapeError, UnsupportedSizeError
from .quaternion import Quaternion

__all__ = [
    "BoxSpec",
    "SampledField",
    "QuaternionField",
    "inner",
    "qinner",
    "right_scale",
    "rank_one_apply",
    "fft",
    "ifft",
    "write_field",
    "read_field",
    "write_field_csv",
    "read_field_csv",
    "random_field",
    "bandlimited_field",
]

FIELD_MAGIC = b"QWF1"


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class BoxSpec:
    """A periodic box ``prod [-l_i/2, l_i/2)`` sampled on a uniform grid."""

    dim: int
    side_length: tuple[float, ...]
    samples: tuple[int, ...]

    def __post_init__(self):
        side = tuple(float(s) for s in np.broadcast_to(self.side_length, (self.dim,)))
        samples = tuple(int(n) for n in np.broadcast_to(self.samples, (self.dim,)))
        object.__setattr__(self, "side_length", side)
        object.__setattr__(self, "samples", samples)
        if self.dim not in (2, 4):
            raise DomainError(f"box dimension must be 2 or 4, got {self.dim}")
        if any(s <= 0 or not np.isfinite(s) for s in side):
            raise DomainError("side lengths must be positive and finite")
        if not all(_is_pow2(n) for n in samples):
            raise UnsupportedSizeError(f"samples per axis must be powers of two, got {samples}")

    @classmethod
    def cube(cls, dim: int, side_length: float, samples: int) -> BoxSpec:
        return cls(dim, (side_length,) * dim, (samples,) * dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples

    @property
    def size(self) -> int:
        return int(np.prod(self.samples))

    @property
    def spacing(self) -> NDArray[np.float64]:
        return np.array(self.side_length) / np.array(self.samples)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_length))

    @property
    def spectral_scale(self) -> float:
        """Ratio between the continuous unitary transform and the unitary DFT."""
        return (2 * np.pi) ** (-self.dim / 2) * np.sqrt(self.cell_volume * self.volume)

    def axes(self) -> list[NDArray[np.float64]]:
        """Sample coordinates per axis in storage order."""
        return [(np.arange(n) - n // 2) * h for n, h in zip(self.samples, self.spacing)]

    def wavenumbers(self) -> list[NDArray[np.float64]]:
        """Physical wavenumbers per axis in FFT order."""
        return [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(self.samples, self.spacing)]

    def positions(self) -> NDArray[np.float64]:
        """Array of shape ``(*shape, dim)`` holding every sample position."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def wavevectors(self) -> NDArray[np.float64]:
        """Array of shape ``(*shape, dim)`` holding every DFT wavevector."""
        return np.stack(np.meshgrid(*self.wavenumbers(), indexing="ij"), axis=-1)

    def nyquist(self) -> float:
        """Smallest Nyquist wavenumber over the axes."""
        return float(np.min(np.pi / self.spacing))

    def refined(self, factor: int = 2) -> BoxSpec:
        return BoxSpec(self.dim, self.side_length, tuple(n * factor for n in self.samples))


@dataclass(frozen=True)
class SampledField:
    """Complex samples on a box, in space (centred layout) or frequency (FFT order)."""

    box: BoxSpec
    values: NDArray[np.complex128] = field(repr=False)
    domain: str = "space"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.box.shape:
            raise ShapeError(f"values of shape {values.shape} do not fit box {self.box.shape}")
        if self.domain not in ("space", "frequency"):
            raise DomainError(f"unknown domain {self.domain!r}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, box: BoxSpec, fn) -> SampledField:
        """Sample ``fn`` (vectorized over ``(..., dim)`` positions)."""
        return cls(box, fn(box.positions()))

    @classmethod
    def zeros(cls, box: BoxSpec) -> SampledField:
        return cls(box, np.zeros(box.shape, dtype=complex))

    @cached_property
    def spectrum(self) -> NDArray[np.complex128]:
        """Unitary DFT of the space samples (FFT order)."""
        if self.domain == "frequency":
            return self.values
        return _dft(self.values)

    @cached_property
    def samples(self) -> NDArray[np.complex128]:
        """Space-domain samples whatever the stored domain."""
        if self.domain == "space":
            return self.values
        return _idft(self.values)

    def to_space(self) -> SampledField:
        return self if self.domain == "space" else SampledField(self.box, self.samples)

    def conj(self) -> SampledField:
        """Pointwise complex conjugate in space."""
        return SampledField(self.box, np.conj(self.samples))

    def norm2(self) -> float:
        return float(np.vdot(self.values, self.values).real) * self.box.cell_volume

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def _check(self, other: SampledField):
        if other.box != self.box:
            raise ShapeError("fields live on different boxes")

    def __add__(self, other: SampledField) -> SampledField:
        self._check(other)
        return SampledField(self.box, self.samples + other.samples)

    def __sub__(self, other: SampledField) -> SampledField:
        self._check(other)
        return SampledField(self.box, self.samples - other.samples)

    def __neg__(self) -> SampledField:
        return SampledField(self.box, -self.samples)

    def __mul__(self, c) -> SampledField:
        if not np.isscalar(c):
            return NotImplemented
        return SampledField(self.box, self.values * c, self.domain)

    __rmul__ = __mul__


def _check_pow2(shape):
    if not all(_is_pow2(n) for n in shape):
        raise UnsupportedSizeError(f"FFT needs power-of-two sizes, got {shape}")


def _dft(values: NDArray) -> NDArray[np.complex128]:
    _check_pow2(values.shape)
    return np.fft.fftn(np.fft.ifftshift(values), norm="ortho")


def _idft(spec: NDArray) -> NDArray[np.complex128]:
    _check_pow2(spec.shape)
    return np.fft.fftshift(np.fft.ifftn(spec, norm="ortho"))


def fft(f: SampledField) -> SampledField:
    return SampledField(f.box, f.spectrum, domain="frequency")


def ifft(f: SampledField) -> SampledField:
    return SampledField(f.box, f.samples, domain="space")


def inner(f: SampledField, g: SampledField) -> complex:
    """``<f|g> = sum conj(f) g`` times the cell volume (antilinear in ``f``)."""
    f._check(g)
    if f.domain == g.domain:
        return complex(np.vdot(f.values, g.values)) * f.box.cell_volume
    return complex(np.vdot(f.samples, g.samples)) * f.box.cell_volume


@dataclass(frozen=True)
class QuaternionField:
    """The pointwise 2x2 matrix ``[[f1, -conj f2], [f2, conj f1]]`` stored as a pair."""

    f1: SampledField
    f2: SampledField

    def __post_init__(self):
        self.f1._check(self.f2)
        object.__setattr__(self, "f1", self.f1.to_space())
        object.__setattr__(self, "f2", self.f2.to_space())

    @classmethod
    def from_complex(cls, f: SampledField) -> QuaternionField:
        return cls(f, SampledField.zeros(f.box))

    @property
    def box(self) -> BoxSpec:
        return self.f1.box

    def norm2(self) -> float:
        """Scalar coefficient of the matrix norm ``||f1||^2 + ||f2||^2``."""
        return self.f1.norm2() + self.f2.norm2()

    def matrix_samples(self) -> NDArray[np.complex128]:
        """Array of shape ``(*shape, 2, 2)`` with the pointwise matrices."""
        a, b = self.f1.samples, self.f2.samples
        return np.stack(
            [np.stack([a, -np.conj(b)], -1), np.stack([b, np.conj(a)], -1)], -2
        )

    def __add__(self, other: QuaternionField) -> QuaternionField:
        return QuaternionField(self.f1 + other.f1, self.f2 + other.f2)

    def __sub__(self, other: QuaternionField) -> QuaternionField:
        return QuaternionField(self.f1 - other.f1, self.f2 - other.f2)


def qinner(F: QuaternionField, G: QuaternionField) -> Quaternion:
    """Quaternion-valued pairing ``(F|G) = int F(x)^dagger G(x) dx``.

    Its 2x2 view has first column ``(<f1|g1> + <f2|g2>, <conj g2|f1> - <conj g1|f2>)``.
    """
    F.f1._check(G.f1)
    v = F.box.cell_volume
    f1, f2 = F.f1.samples, F.f2.samples
    g1, g2 = G.f1.samples, G.f2.samples
    z1 = (np.vdot(f1, g1) + np.vdot(f2, g2)) * v
    # <conj g2|f1> = sum g2 f1
    z2 = (np.sum(g2 * f1) - np.sum(g1 * f2)) * v
    return Quaternion.from_complex(complex(z1), complex(z2))


def right_scale(F: QuaternionField, q: Quaternion) -> QuaternionField:
    """Pointwise right multiplication ``F(x) q``."""
    w1, w2 = q.z1, q.z2
    f1, f2 = F.f1.samples, F.f2.samples
    box = F.box
    return QuaternionField(
        SampledField(box, f1 * w1 - np.conj(f2) * w2),
        SampledField(box, f2 * w1 + np.conj(f1) * w2),
    )


def rank_one_apply(F: QuaternionField, G: QuaternionField, H: QuaternionField) -> QuaternionField:
    """Apply the rank-one operator ``|F)(G|`` to ``H``."""
    F.f1._check(H.f1)
    return right_scale(F, qinner(G, H))


# -- file formats --------------------------------------------------------------


def write_field(path, f: SampledField) -> None:
    """Binary little-endian dump: magic, dim, samples, side lengths, re/im pairs."""
    box = f.box
    samples = np.ascontiguousarray(f.samples)
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<q", box.dim))
        fh.write(np.asarray(box.samples, dtype="<i8").tobytes())
        fh.write(np.asarray(box.side_length, dtype="<f8").tobytes())
        fh.write(samples.astype("<c16").view("<f8").tobytes())


def read_field(path) -> SampledField:
    data = Path(path).read_bytes()
    if data[:4] != FIELD_MAGIC:
        raise DomainError(f"{path}: not a field file (bad magic)")
    (dim,) = struct.unpack_from("<q", data, 4)
    off = 12
    samples = np.frombuffer(data, dtype="<i8", count=dim, offset=off)
    off += 8 * dim
    side = np.frombuffer(data, dtype="<f8", count=dim, offset=off)
    off += 8 * dim
    box = BoxSpec(int(dim), tuple(side), tuple(int(n) for n in samples))
    flat = np.frombuffer(data, dtype="<f8", offset=off)
    if flat.size != 2 * box.size:
        raise ShapeError(f"{path}: expected {2 * box.size} floats, found {flat.size}")
    values = (flat[0::2] + 1j * flat[1::2]).reshape(box.shape)
    return SampledField(box, values)


def write_field_csv(path, f: SampledField) -> None:
    """2D fields only: one CSV row per first-axis index, one ``re,im`` cell per sample.

    The first line is a comment recording the box.
    """
    box = f.box
    if box.dim != 2:
        raise DomainError("CSV export is defined for 2D fields only")
    with open(path, "w", newline="") as fh:
        fh.write(
            "# box side_length={!r},{!r} samples={},{}\n".format(*box.side_length, *box.samples)
        )
        w = csv.writer(fh)
        for row in f.samples:
            w.writerow([f"{float(z.real)!r},{float(z.imag)!r}" for z in row])


def read_field_csv(path) -> SampledField:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# box"):
            raise DomainError(f"{path}: missing box header")
        parts = dict(p.split("=") for p in header[1:].split()[1:])
        side = tuple(float(s) for s in parts["side_length"].split(","))
        samples = tuple(int(s) for s in parts["samples"].split(","))
        rows = [[complex(*map(float, cell.split(","))) for cell in row] for row in csv.reader(fh)]
    return SampledField(BoxSpec(2, side, samples), np.array(rows, dtype=complex))


def random_field(box: BoxSpec, rng: np.random.Generator) -> SampledField:
    """White complex Gaussian samples; handy for tests and probes."""
    v = rng.standard_normal(box.shape) + 1j * rng.standard_normal(box.shape)
    return SampledField(box, v)


def bandlimited_field(box: BoxSpec, k_min: float, k_max: float, rng: np.random.Generator) -> SampledField:
    """Random field whose spectrum is supported on ``k_min <= |k| <= k_max``."""
    kk = np.linalg.norm(box.wavevectors(), axis=-1)
    mask = (kk >= k_min) & (kk <= k_max)
    spec = (rng.standard_normal(box.shape) + 1j * rng.standard_normal(box.shape)) * mask
    return SampledField(box, spec, domain="frequency").to_space()
