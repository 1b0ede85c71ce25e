"""Pathwise evaluation of multiple integrals over the isonormal process on R^d.

With an orthonormal basis e_1..e_d and xi_j = X(e_j) i.i.d. N(0, 1),

    I_n(f)(xi) = sum_alpha count(alpha) f(alpha) prod_j He_{a_j}(xi_j),

where He_m are the monic probabilists' Hermite polynomials
(He_0 = 1, He_1 = x, He_{m+1} = x He_m - m He_{m-1}).  The classical
normalization H_m with I_n(h^{(x) n}) = n! H_n(X(h)) is H_m = He_m / m!.

The Malliavin derivative is the coordinate gradient; its j-th component is
n I_{n-1}(f(., e_j)).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import _kernels
from .errors import CapExceeded, DimensionMismatch
from .rng import RandomStream, sample_points
from .symtensor import SymKernel, count, profile
from .symtensor import slice as slice_kernel

HERMITE_CAP = 64


def hermite(m: int, x):
    """He_m(x) for scalar or array ``x``."""
    if m < 0:
        raise ValueError("Hermite order must be >= 0")
    if m > HERMITE_CAP:
        raise CapExceeded(f"Hermite order {m} exceeds cap {HERMITE_CAP}")
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel())
    out = _kernels.hermite_e(m, arr)
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


@dataclass(frozen=True)
class _Compiled:
    term_ptr: np.ndarray
    labels: np.ndarray
    powers: np.ndarray
    weights: np.ndarray
    max_power: int


@lru_cache(maxsize=4096)
def _compile(f: SymKernel) -> _Compiled:
    ptr = [0]
    labels, powers, weights = [], [], []
    max_power = 0
    for alpha, x in sorted(f.items()):
        for label, mult in profile(alpha):
            labels.append(label - 1)
            powers.append(mult)
            max_power = max(max_power, mult)
        ptr.append(len(labels))
        weights.append(count(alpha) * x)
    return _Compiled(
        np.asarray(ptr, dtype=np.int64),
        np.asarray(labels, dtype=np.int64),
        np.asarray(powers, dtype=np.int64),
        np.asarray(weights, dtype=np.float64),
        max_power,
    )


@lru_cache(maxsize=4096)
def _slices(f: SymKernel) -> tuple:
    return tuple(slice_kernel(f, j) for j in range(1, f.dim + 1))


def _as_points(f: SymKernel, xi) -> tuple[np.ndarray, bool]:
    arr = np.asarray(xi, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.ascontiguousarray(np.atleast_2d(arr))
    if arr.shape[1] != f.dim:
        raise DimensionMismatch(f"point has length {arr.shape[1]}, kernel dim is {f.dim}")
    return arr, single


def eval_integral(f: SymKernel, xi):
    """I_n(f) at one point (shape (d,)) or a batch (shape (N, d))."""
    if f.order > HERMITE_CAP:
        raise CapExceeded(f"order {f.order} exceeds cap {HERMITE_CAP}")
    pts, single = _as_points(f, xi)
    c = _compile(f)
    if len(c.weights) == 0:
        vals = np.zeros(pts.shape[0])
    else:
        vals = _kernels.eval_terms(c.term_ptr, c.labels, c.powers, c.weights, pts, c.max_power)
    return float(vals[0]) if single else vals


def malliavin_gradient(f: SymKernel, xi) -> np.ndarray:
    """DI_n(f): shape (d,) for one point, (N, d) for a batch."""
    if f.order == 0:
        raise ValueError("the derivative of a constant is not defined here (order 0)")
    pts, single = _as_points(f, xi)
    grad = np.empty_like(pts)
    for j, g in enumerate(_slices(f)):
        grad[:, j] = f.order * eval_integral(g, pts)
    return grad[0] if single else grad


def grad_norm_sq(f: SymKernel, xi):
    """||DI_n(f)||_H^2 pointwise."""
    grad = malliavin_gradient(f, xi)
    return float(grad @ grad) if grad.ndim == 1 else np.einsum("ij,ij->i", grad, grad)


def sample(dim: int, stream: RandomStream, index: int = 0) -> np.ndarray:
    """Gaussian point number ``index`` of the stream."""
    return sample_points(dim, 1, stream, index)[0]


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    samples: int

    def within(self, target: float, k: float = 4.0) -> bool:
        # the floor keeps deterministic functionals (stderr 0) from failing on rounding
        return abs(self.mean - target) <= k * self.stderr + 1e-12 * max(1.0, abs(target))


def estimate(values) -> MCEstimate:
    """Mean and standard error with exactly rounded (order-free) sums."""
    values = np.asarray(values, dtype=np.float64).ravel()
    n = values.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return MCEstimate(mean, math.sqrt(var / n), n)


def mc_values(
    functional: Callable[[np.ndarray], np.ndarray],
    n: int,
    stream: RandomStream,
    dim: int,
    chunk: int = 8192,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate ``functional`` on Gaussian points 0..n-1 of ``stream``.

    ``functional`` maps an (m, dim) array of points to m values.  Chunk
    boundaries never affect the draws, so the output does not depend on
    ``chunk`` or ``workers``.
    """
    starts = list(range(0, n, chunk))

    def run(start: int) -> np.ndarray:
        m = min(chunk, n - start)
        return np.asarray(functional(sample_points(dim, m, stream, start)))

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts)


def mc_mean(functional, n: int, stream: RandomStream, dim: int, chunk: int = 8192, workers: int = 1) -> MCEstimate:
    if n < 2:
        raise ValueError("need N >= 2")
    return estimate(mc_values(functional, n, stream, dim, chunk, workers))
