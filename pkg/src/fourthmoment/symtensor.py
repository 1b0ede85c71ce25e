"""Sparse symmetric tensors over R^d.

A symmetric tensor of order n is stored by its sorted multi-indices only.
The stored value is the entry of the full tensor (it is the same for every
permutation of the index), so the full tensor has ``count(alpha)`` copies
of each stored value.  Labels are 1-based.

Contractions produce :class:`BlockKernel` objects, which are symmetric
within a left group of ``p`` slots and a right group of ``q`` slots but not
across the two groups.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import DimensionMismatch

ZERO_TOL = 1e-15

MultiIndex = tuple


@lru_cache(maxsize=None)
def count(alpha: MultiIndex) -> int:
    """Number of distinct permutations of ``alpha`` (n! / prod a_j!)."""
    out = math.factorial(len(alpha))
    for mult in Counter(alpha).values():
        out //= math.factorial(mult)
    return out


def multiplicities(alpha: MultiIndex) -> dict:
    return dict(Counter(alpha))


def merge(u: MultiIndex, v: MultiIndex) -> MultiIndex:
    return tuple(sorted(u + v))


@lru_cache(maxsize=200_000)
def submultisets(alpha: MultiIndex, size: int) -> tuple:
    """Distinct ways to split ``alpha`` into (w, rest) with ``len(w) == size``.

    Returns pairs ``(w, rest)`` of sorted tuples.
    """
    seen = {}
    for pos in itertools.combinations(range(len(alpha)), size):
        w = tuple(alpha[i] for i in pos)
        if w not in seen:
            chosen = set(pos)
            seen[w] = tuple(a for i, a in enumerate(alpha) if i not in chosen)
    return tuple(seen.items())


def _ways(gamma: MultiIndex, u: MultiIndex) -> int:
    """Position subsets of ``gamma`` of size len(u) whose labels form ``u``."""
    g = Counter(gamma)
    out = 1
    for label, a in Counter(u).items():
        out *= math.comb(g[label], a)
    return out


def _check_index(alpha, dim: int, order: int) -> MultiIndex:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != order:
        raise ValueError(f"index {alpha} has length {len(alpha)}, expected {order}")
    if any(a < 1 or a > dim for a in alpha):
        raise ValueError(f"index {alpha} has labels outside 1..{dim}")
    if any(alpha[i] > alpha[i + 1] for i in range(len(alpha) - 1)):
        raise ValueError(f"index {alpha} is not sorted non-decreasing")
    return alpha


def _prune(entries: dict) -> dict:
    return {k: v for k, v in entries.items() if abs(v) >= ZERO_TOL}


class SymKernel:
    """Symmetric tensor f in (R^dim)^{(.) order}, stored sparsely."""

    __slots__ = ("dim", "order", "_entries", "_hash")

    def __init__(self, dim: int, order: int, entries: Mapping | None = None, *, _trusted=False):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        if order < 0:
            raise ValueError("order must be >= 0")
        self.dim = int(dim)
        self.order = int(order)
        entries = dict(entries or {})
        if not _trusted:
            checked = {}
            for key, value in entries.items():
                key = _check_index(key, self.dim, self.order)
                if key in checked:
                    raise ValueError(f"duplicate index {key}")
                checked[key] = float(value)
            entries = checked
        self._entries = _prune(entries)
        self._hash = None

    # construction -----------------------------------------------------
    @classmethod
    def make(cls, dim: int, order: int, entries: Mapping | Iterable) -> "SymKernel":
        """Validated constructor; ``entries`` maps sorted indices to values."""
        if not isinstance(entries, Mapping):
            pairs = list(entries)
            keys = [tuple(k) for k, _ in pairs]
            if len(set(keys)) != len(keys):
                raise ValueError("duplicate multi-index in entries")
            entries = {tuple(k): v for k, v in pairs}
        return cls(dim, order, entries)

    @classmethod
    def scalar(cls, dim: int, value: float) -> "SymKernel":
        return cls(dim, 0, {(): float(value)}, _trusted=True)

    @classmethod
    def zero(cls, dim: int, order: int) -> "SymKernel":
        return cls(dim, order, {}, _trusted=True)

    @classmethod
    def basis_power(cls, dim: int, label: int, order: int, value: float = 1.0) -> "SymKernel":
        """``value * e_label^{(x) order}``."""
        return cls(dim, order, {(label,) * order: value})

    # access -----------------------------------------------------------
    @property
    def entries(self) -> Mapping:
        return MappingProxyType(self._entries)

    def __getitem__(self, alpha) -> float:
        return self._entries.get(tuple(sorted(alpha)), 0.0)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def value(self) -> float:
        """The constant of an order-0 kernel."""
        if self.order != 0:
            raise ValueError("value() is only defined for order 0")
        return self._entries.get((), 0.0)

    def is_zero(self) -> bool:
        return not self._entries

    # linear structure -------------------------------------------------
    def __add__(self, other: "SymKernel") -> "SymKernel":
        return add(self, other)

    def __sub__(self, other: "SymKernel") -> "SymKernel":
        return add(self, scale(other, -1.0))

    def __mul__(self, c: float) -> "SymKernel":
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self) -> "SymKernel":
        return scale(self, -1.0)

    def __truediv__(self, c: float) -> "SymKernel":
        return scale(self, 1.0 / c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymKernel):
            return NotImplemented
        return (self.dim, self.order, self._entries) == (other.dim, other.order, other._entries)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dim, self.order, frozenset(self._entries.items())))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v:.6g}" for k, v in sorted(self._entries.items())[:6])
        more = "" if len(self._entries) <= 6 else f", ... ({len(self._entries)} entries)"
        return f"SymKernel(dim={self.dim}, order={self.order}, {{{body}{more}}})"

    def norm_ambient(self) -> float:
        return math.sqrt(inner_ambient(self, self))

    def norm_modified(self) -> float:
        return norm_modified(self)


class BlockKernel:
    """Tensor symmetric in a left block of p slots and a right block of q slots."""

    __slots__ = ("dim", "p", "q", "_entries")

    def __init__(self, dim: int, p: int, q: int, entries: Mapping | None = None):
        self.dim = int(dim)
        self.p = int(p)
        self.q = int(q)
        self._entries = _prune(dict(entries or {}))

    @property
    def entries(self) -> Mapping:
        return MappingProxyType(self._entries)

    @property
    def order(self) -> int:
        return self.p + self.q

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, key) -> float:
        u, v = key
        return self._entries.get((tuple(sorted(u)), tuple(sorted(v))), 0.0)

    def items(self):
        return self._entries.items()

    def norm_ambient_sq(self) -> float:
        return math.fsum(count(u) * count(v) * x * x for (u, v), x in self._entries.items())

    def norm_ambient(self) -> float:
        return math.sqrt(self.norm_ambient_sq())

    def scalar(self) -> float:
        """Value of a fully contracted (0, 0) block."""
        if self.p or self.q:
            raise ValueError("scalar() needs p == q == 0")
        return self._entries.get(((), ()), 0.0)

    def to_sym(self) -> SymKernel:
        """Reinterpret a block with an empty side as a symmetric kernel."""
        if self.p and self.q:
            raise ValueError("to_sym() needs p == 0 or q == 0")
        side = 1 if self.p == 0 else 0
        return SymKernel(self.dim, self.order, {k[side]: x for k, x in self._entries.items()}, _trusted=True)

    def __repr__(self) -> str:
        return f"BlockKernel(dim={self.dim}, p={self.p}, q={self.q}, nnz={len(self._entries)})"


def _same_space(f, g) -> None:
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimension mismatch: {f.dim} vs {g.dim}")


def add(f: SymKernel, g: SymKernel) -> SymKernel:
    _same_space(f, g)
    if f.order != g.order:
        raise DimensionMismatch(f"order mismatch: {f.order} vs {g.order}")
    out = dict(f._entries)
    for k, v in g._entries.items():
        out[k] = out.get(k, 0.0) + v
    return SymKernel(f.dim, f.order, out, _trusted=True)


def scale(f: SymKernel, c: float) -> SymKernel:
    c = float(c)
    return SymKernel(f.dim, f.order, {k: c * v for k, v in f._entries.items()}, _trusted=True)


def inner_ambient(f: SymKernel, g: SymKernel) -> float:
    """<f, g> in H^{(x) n}: sum over sorted indices of count * f * g."""
    _same_space(f, g)
    if f.order != g.order:
        raise DimensionMismatch(f"order mismatch: {f.order} vs {g.order}")
    if len(g) < len(f):
        f, g = g, f
    ge = g._entries
    return math.fsum(count(k) * v * ge[k] for k, v in f._entries.items() if k in ge)


def inner_block(s: BlockKernel, t: BlockKernel) -> float:
    """Inner product of two block kernels with matching block shapes."""
    if s.dim != t.dim:
        raise DimensionMismatch(f"dimension mismatch: {s.dim} vs {t.dim}")
    if (s.p, s.q) != (t.p, t.q):
        raise DimensionMismatch(f"block shape mismatch: {(s.p, s.q)} vs {(t.p, t.q)}")
    if len(t) < len(s):
        s, t = t, s
    te = t._entries
    return math.fsum(count(u) * count(v) * x * te[(u, v)] for (u, v), x in s._entries.items() if (u, v) in te)


def norm_ambient(f: SymKernel) -> float:
    return math.sqrt(inner_ambient(f, f))


def norm_modified(f: SymKernel) -> float:
    """sqrt(n!) * ||f||; equals the L2 norm of I_n(f)."""
    return math.sqrt(math.factorial(f.order) * inner_ambient(f, f))


def _group_by_sub(f: SymKernel, l: int) -> dict:
    groups = defaultdict(list)
    for alpha, x in f._entries.items():
        for w, rest in submultisets(alpha, l):
            groups[w].append((rest, x))
    return groups


def contract(f: SymKernel, g: SymKernel, l: int) -> BlockKernel:
    """Contraction of ``l`` slots of f with ``l`` slots of g.

    Left block carries the n - l free slots of f, right block the m - l of g.
    """
    _same_space(f, g)
    if not 0 <= l <= min(f.order, g.order):
        raise ValueError(f"contraction order {l} outside 0..{min(f.order, g.order)}")
    fg = _group_by_sub(f, l)
    gg = _group_by_sub(g, l)
    out = defaultdict(float)
    for w, flist in fg.items():
        glist = gg.get(w)
        if not glist:
            continue
        cw = count(w)
        for u, x in flist:
            cx = cw * x
            for v, y in glist:
                out[(u, v)] += cx * y
    return BlockKernel(f.dim, f.order - l, g.order - l, out)


def symmetrize_block(t: BlockKernel) -> SymKernel:
    """Average of ``t`` over all permutations of its p + q slots."""
    denom = math.comb(t.p + t.q, t.p)
    out = defaultdict(float)
    for (u, v), x in t._entries.items():
        gamma = merge(u, v)
        out[gamma] += _ways(gamma, u) * x / denom
    return SymKernel(t.dim, t.p + t.q, out, _trusted=True)


def contract_sym(f: SymKernel, g: SymKernel, l: int) -> SymKernel:
    """Symmetrized contraction."""
    return symmetrize_block(contract(f, g, l))


def slice(f: SymKernel, j: int) -> SymKernel:  # noqa: A001 - mirrors the math name
    """Kernel of order n - 1 obtained by pinning one argument to e_j."""
    if f.order == 0:
        raise ValueError("cannot slice an order-0 kernel")
    if not 1 <= j <= f.dim:
        raise ValueError(f"label {j} outside 1..{f.dim}")
    out = {}
    for alpha, x in f._entries.items():
        if j in alpha:
            pos = alpha.index(j)
            out[alpha[:pos] + alpha[pos + 1:]] = x
    return SymKernel(f.dim, f.order - 1, out, _trusted=True)


def permute_labels(f: SymKernel, perm: Mapping[int, int]) -> SymKernel:
    """Relabel basis vectors; ``perm`` maps old label -> new label."""
    out = {}
    for alpha, x in f._entries.items():
        out[tuple(sorted(perm[a] for a in alpha))] = x
    return SymKernel(f.dim, f.order, out, _trusted=True)


def profile(alpha: MultiIndex) -> tuple:
    """Run-length form ((label, multiplicity), ...) of a sorted index."""
    return tuple((label, len(list(grp))) for label, grp in itertools.groupby(alpha))
