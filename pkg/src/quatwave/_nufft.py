"""Trigonometric sums at off-grid points, backed by finufft.

``type2``: ``out[p, j] = sum_n modes[p, n] exp(isign * i * n . x_j)``
``type1``: ``out[p, n] = sum_j weights[p, j] exp(isign * i * n . x_j)``

Mode indices ``n`` follow FFT order (``modeord=1``) or centred order
(``modeord=0``, ``n = -N/2 .. N/2 - 1``). finufft has no 4D transforms, so
4D sums are assembled from batched 3D transforms over the first axis.
A direct summation is available for small problems and as a cross-check.
"""

from __future__ import annotations

import numpy as np
import finufft

_THREADS = 0  # 0 lets finufft decide


def set_threads(n: int | None) -> None:
    global _THREADS
    _THREADS = int(n or 0)


def _opts():
    return {"nthreads": _THREADS} if _THREADS else {}


def mode_indices(n: int, modeord: int) -> np.ndarray:
    if modeord == 1:
        return np.fft.fftfreq(n, 1.0 / n)
    return np.arange(n) - n // 2


def _wrap(x):
    return np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi


def type2(modes, x, *, isign=1, modeord=1, eps=1e-13, method="nufft"):
    """Evaluate trigonometric polynomials at points ``x`` of shape ``(M, d)``.

    ``modes`` has shape ``(N_1, .., N_d)`` or ``(P, N_1, .., N_d)``.
    """
    x = _wrap(x)
    d = x.shape[1]
    modes = np.asarray(modes, dtype=complex)
    batched = modes.ndim == d + 1
    G = modes if batched else modes[None]
    if method == "direct" or x.shape[0] == 0:
        out = _direct_type2(G, x, isign, modeord)
    elif d in (1, 2, 3):
        fn = {1: finufft.nufft1d2, 2: finufft.nufft2d2, 3: finufft.nufft3d2}[d]
        coords = [np.ascontiguousarray(x[:, i]) for i in range(d)]
        out = fn(*coords, np.ascontiguousarray(G), eps=eps, isign=isign, modeord=modeord, **_opts())
        out = out.reshape(G.shape[0], -1)
    elif d == 4:
        P, N0 = G.shape[:2]
        rest = np.ascontiguousarray(G.reshape(P * N0, *G.shape[2:]))
        coords = [np.ascontiguousarray(x[:, i]) for i in range(1, 4)]
        part = finufft.nufft3d2(*coords, rest, eps=eps, isign=isign, modeord=modeord, **_opts())
        part = part.reshape(P, N0, -1)
        n0 = mode_indices(N0, modeord)
        phase = np.exp(isign * 1j * np.outer(n0, x[:, 0]))
        out = np.einsum("pnj,nj->pj", part, phase)
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out if batched else out[0]


def type1(weights, x, shape, *, isign=-1, modeord=1, eps=1e-13, method="nufft"):
    """Spread point weights (shape ``(M,)`` or ``(P, M)``) onto a mode grid of ``shape``."""
    x = _wrap(x)
    d = x.shape[1]
    w = np.asarray(weights, dtype=complex)
    batched = w.ndim == 2
    W = w if batched else w[None]
    P = W.shape[0]
    if method == "direct" or x.shape[0] == 0:
        out = _direct_type1(W, x, shape, isign, modeord)
    elif d in (1, 2, 3):
        fn = {1: finufft.nufft1d1, 2: finufft.nufft2d1, 3: finufft.nufft3d1}[d]
        coords = [np.ascontiguousarray(x[:, i]) for i in range(d)]
        out = fn(*coords, np.ascontiguousarray(W), n_modes=tuple(shape), eps=eps, isign=isign,
                 modeord=modeord, **_opts())
        out = out.reshape(P, *shape)
    elif d == 4:
        N0 = shape[0]
        n0 = mode_indices(N0, modeord)
        phase = np.exp(isign * 1j * np.outer(n0, x[:, 0]))
        Wn = (W[:, None, :] * phase[None]).reshape(P * N0, -1)
        coords = [np.ascontiguousarray(x[:, i]) for i in range(1, 4)]
        out = finufft.nufft3d1(*coords, np.ascontiguousarray(Wn), n_modes=tuple(shape[1:]), eps=eps,
                               isign=isign, modeord=modeord, **_opts())
        out = out.reshape(P, *shape)
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out if batched else out[0]


def _phase_matrix(x, shape, isign, modeord):
    # exp(isign i n.x) for all points (rows) and flattened modes (columns)
    grids = np.meshgrid(*[mode_indices(n, modeord) for n in shape], indexing="ij")
    n = np.stack([g.ravel() for g in grids], axis=-1)
    return np.exp(isign * 1j * (x @ n.T))


def _direct_type2(G, x, isign, modeord, chunk=2048):
    shape = G.shape[1:]
    flat = G.reshape(G.shape[0], -1)
    out = np.empty((G.shape[0], x.shape[0]), dtype=complex)
    for s in range(0, x.shape[0], chunk):
        E = _phase_matrix(x[s : s + chunk], shape, isign, modeord)
        out[:, s : s + chunk] = flat @ E.T
    return out


def _direct_type1(W, x, shape, isign, modeord, chunk=2048):
    out = np.zeros((W.shape[0], int(np.prod(shape))), dtype=complex)
    for s in range(0, x.shape[0], chunk):
        E = _phase_matrix(x[s : s + chunk], shape, isign, modeord)
        out += W[:, s : s + chunk] @ E
    return out.reshape(W.shape[0], *shape)
