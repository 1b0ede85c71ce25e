"""Slow reference computations used to cross-check the sparse engine.

Dense tensors and explicit polynomials in the Gaussian coordinates; nothing
here shares code with the sparse or multiplication-formula paths.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
from numpy.polynomial import hermite_e as He

from .symtensor import BlockKernel, SymKernel


def to_dense(f: SymKernel) -> np.ndarray:
    out = np.zeros((f.dim,) * f.order)
    for alpha, x in f.items():
        for perm in set(itertools.permutations(alpha)):
            out[tuple(a - 1 for a in perm)] = x
    return out


def block_to_dense(t: BlockKernel) -> np.ndarray:
    out = np.zeros((t.dim,) * (t.p + t.q))
    for (u, v), x in t.items():
        for pu in set(itertools.permutations(u)):
            for pv in set(itertools.permutations(v)):
                out[tuple(a - 1 for a in pu + pv)] = x
    return out


def dense_contract(a: np.ndarray, b: np.ndarray, l: int) -> np.ndarray:
    """sum over the last l axes of both tensors, by explicit loops over the contracted labels."""
    n, m = a.ndim, b.ndim
    d = a.shape[0] if n else (b.shape[0] if m else 1)
    out = np.zeros((d,) * (n - l + m - l))
    for w in itertools.product(range(d), repeat=l):
        left = a[(Ellipsis,) + w] if l else a
        right = b[(Ellipsis,) + w] if l else b
        out += np.multiply.outer(left, right)
    return out


def dense_symmetrize(a: np.ndarray) -> np.ndarray:
    if a.ndim < 2:
        return a.copy()
    perms = list(itertools.permutations(range(a.ndim)))
    return sum(np.transpose(a, p) for p in perms) / len(perms)


def dense_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


def dense_slice(a: np.ndarray, j: int) -> np.ndarray:
    return a[..., j - 1]


# polynomial route -------------------------------------------------------

def _poly_mul(p: dict, q: dict) -> dict:
    out = defaultdict(float)
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            out[tuple(x + y for x, y in zip(e1, e2))] += c1 * c2
    return dict(out)


def _hermite_poly(dim: int, j: int, m: int) -> dict:
    coefs = He.herme2poly([0] * m + [1])
    out = {}
    for power, c in enumerate(coefs):
        if c:
            e = [0] * dim
            e[j] = power
            out[tuple(e)] = float(c)
    return out


def integral_poly(f: SymKernel) -> dict:
    """I_n(f) as a polynomial {exponent tuple: coefficient} in xi_1..xi_d."""
    out = defaultdict(float)
    zero = (0,) * f.dim
    for alpha, x in f.items():
        mult = math.factorial(len(alpha))
        term = {zero: 1.0}
        for label in set(alpha):
            a = alpha.count(label)
            mult //= math.factorial(a)
            term = _poly_mul(term, _hermite_poly(f.dim, label - 1, a))
        for e, c in term.items():
            out[e] += mult * x * c
    return dict(out)


def poly_add(p: dict, q: dict) -> dict:
    out = defaultdict(float, p)
    for e, c in q.items():
        out[e] += c
    return dict(out)


def poly_mul(p: dict, q: dict) -> dict:
    return _poly_mul(p, q)


def gaussian_expectation(p: dict) -> float:
    """E over i.i.d. standard normals: E[prod xi^a] = prod (a-1)!! for even a, else 0."""
    total = []
    for e, c in p.items():
        if any(a % 2 for a in e):
            continue
        total.append(c * math.prod(math.prod(range(a - 1, 0, -2)) for a in e))
    return math.fsum(total)


def poly_eval(p: dict, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    return math.fsum(c * float(np.prod(xi ** np.asarray(e))) for e, c in p.items())


def isserlis_moment(cov: np.ndarray, idx: tuple) -> float:
    """E[prod_k Y_{idx_k}] for a centered Gaussian vector with covariance ``cov``, by pairings."""
    idx = list(idx)
    if not idx:
        return 1.0
    if len(idx) % 2:
        return 0.0
    first, rest = idx[0], idx[1:]
    return math.fsum(
        cov[first, rest[i]] * isserlis_moment(cov, tuple(rest[:i] + rest[i + 1:]))
        for i in range(len(rest))
    )


def random_kernel(gen: np.random.Generator, dim: int, order: int, nnz: int | None = None) -> SymKernel:
    """Random sparse kernel with about ``nnz`` stored entries (all sorted indices if None)."""
    keys = list(itertools.combinations_with_replacement(range(1, dim + 1), order))
    if nnz is not None and nnz < len(keys):
        pick = gen.choice(len(keys), size=nnz, replace=False)
        keys = [keys[i] for i in sorted(pick)]
    return SymKernel(dim, order, {k: float(gen.normal()) for k in keys})


def poly_derivative(p: dict, j: int) -> dict:
    out = defaultdict(float)
    for e, c in p.items():
        if e[j]:
            e2 = list(e)
            e2[j] -= 1
            out[tuple(e2)] += c * e[j]
    return dict(out)
