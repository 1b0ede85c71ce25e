"""Exact algebra of finite Wiener chaos expansions.

Products use the multiplication formula

    I_n(f) I_m(g) = sum_{r=0}^{n^m} r! C(n,r) C(m,r) I_{n+m-2r}(f ~(x)_r g),

so every moment of a finite expansion is a finite exact computation.
"""
from __future__ import annotations

import math
from functools import reduce
from typing import Mapping

import numpy as np

from .chaos_eval import eval_integral
from .errors import CapExceeded, DimensionMismatch
from .symtensor import SymKernel, add, contract, contract_sym, inner_ambient, norm_modified, scale
from .symtensor import slice as slice_kernel

ORDER_CAP = 64
SUPPORT_CAP = 1_000_000


class ChaosExpansion:
    """F = c_0 + sum_n I_n(g_n) with finitely many nonzero components."""

    __slots__ = ("dim", "_components")

    def __init__(self, dim: int, components: Mapping[int, SymKernel] | None = None):
        self.dim = int(dim)
        comps = {}
        for n, g in (components or {}).items():
            if g.dim != self.dim:
                raise DimensionMismatch(f"component {n} has dim {g.dim}, expected {self.dim}")
            if g.order != n:
                raise ValueError(f"component key {n} does not match kernel order {g.order}")
            if n > ORDER_CAP:
                raise CapExceeded(f"chaos order {n} exceeds cap {ORDER_CAP}")
            if not g.is_zero():
                comps[int(n)] = g
        self._components = dict(sorted(comps.items()))

    @classmethod
    def of(cls, *kernels: SymKernel) -> "ChaosExpansion":
        """Sum of I_n(f) over the given kernels (orders may repeat)."""
        if not kernels:
            raise ValueError("need at least one kernel")
        dim = kernels[0].dim
        comps: dict = {}
        for f in kernels:
            comps[f.order] = add(comps[f.order], f) if f.order in comps else f
        return cls(dim, comps)

    @classmethod
    def constant(cls, dim: int, c: float) -> "ChaosExpansion":
        return cls(dim, {0: SymKernel.scalar(dim, c)})

    @property
    def components(self) -> dict:
        return dict(self._components)

    def component(self, n: int) -> SymKernel:
        return self._components.get(n, SymKernel.zero(self.dim, n))

    def orders(self) -> list:
        return list(self._components)

    def max_order(self) -> int:
        return max(self._components, default=0)

    def support_size(self) -> int:
        return sum(len(g) for g in self._components.values())

    def __add__(self, other: "ChaosExpansion") -> "ChaosExpansion":
        if isinstance(other, (int, float)):
            other = ChaosExpansion.constant(self.dim, other)
        _check_dim(self, other)
        comps = dict(self._components)
        for n, g in other._components.items():
            comps[n] = add(comps[n], g) if n in comps else g
        return ChaosExpansion(self.dim, comps)

    __radd__ = __add__

    def __neg__(self) -> "ChaosExpansion":
        return self.scaled(-1.0)

    def __sub__(self, other: "ChaosExpansion") -> "ChaosExpansion":
        return self + (-other)

    def scaled(self, c: float) -> "ChaosExpansion":
        return ChaosExpansion(self.dim, {n: scale(g, c) for n, g in self._components.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scaled(other)
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self.scaled(other)
        return NotImplemented

    def __call__(self, xi):
        """Pathwise value at one point or a batch of points."""
        arr = np.asarray(xi, dtype=np.float64)
        total = np.zeros(1 if arr.ndim == 1 else arr.shape[0])
        for g in self._components.values():
            total = total + np.atleast_1d(eval_integral(g, arr))
        return float(total[0]) if arr.ndim == 1 else total

    def __repr__(self) -> str:
        parts = ", ".join(f"{n}: nnz={len(g)}" for n, g in self._components.items())
        return f"ChaosExpansion(dim={self.dim}, {{{parts}}})"


def _check_dim(F: ChaosExpansion, G: ChaosExpansion) -> None:
    if F.dim != G.dim:
        raise DimensionMismatch(f"dimension mismatch: {F.dim} vs {G.dim}")


def product_kernels(f: SymKernel, g: SymKernel) -> dict:
    """Chaos components of I_n(f) I_m(g), keyed by order."""
    n, m = f.order, g.order
    if n + m > ORDER_CAP:
        raise CapExceeded(f"product order {n + m} exceeds cap {ORDER_CAP}")
    # the r = 0 term can hold up to len(f) * len(g) entries; refuse before building it
    if len(f) * len(g) > SUPPORT_CAP:
        raise CapExceeded(f"product support bound {len(f) * len(g)} exceeds {SUPPORT_CAP}")
    out = {}
    for r in range(min(n, m) + 1):
        h = contract_sym(f, g, r)
        if h.is_zero():
            continue
        coef = math.factorial(r) * math.comb(n, r) * math.comb(m, r)
        out[n + m - 2 * r] = scale(h, coef)
    return out


def multiply(F: ChaosExpansion, G: ChaosExpansion) -> ChaosExpansion:
    _check_dim(F, G)
    if F.max_order() + G.max_order() > ORDER_CAP:
        raise CapExceeded(f"product order {F.max_order() + G.max_order()} exceeds cap {ORDER_CAP}")
    acc: dict = {}
    # sorted (n, m) traversal keeps floating-point assembly deterministic
    for n, f in F._components.items():
        for m, g in G._components.items():
            for q, h in product_kernels(f, g).items():
                acc[q] = add(acc[q], h) if q in acc else h
    out = ChaosExpansion(F.dim, acc)
    if out.support_size() > SUPPORT_CAP:
        raise CapExceeded(f"support size {out.support_size()} exceeds {SUPPORT_CAP}")
    return out


def expectation(F: ChaosExpansion) -> float:
    return F.component(0).value() if 0 in F._components else 0.0


def covariance(F: ChaosExpansion, G: ChaosExpansion) -> float:
    """Cov(F, G) = sum_{n>=1} n! <f_n, g_n>."""
    _check_dim(F, G)
    return math.fsum(
        math.factorial(n) * inner_ambient(f, G._components[n])
        for n, f in F._components.items()
        if n >= 1 and n in G._components
    )


def second_moment(F: ChaosExpansion) -> float:
    return covariance(F, F) + expectation(F) ** 2


def moment(F: ChaosExpansion, p: int) -> float:
    """E[F^p] for p in 1..4, by exact repeated multiplication."""
    if not 1 <= p <= 4:
        raise ValueError("moment order p must be in 1..4")
    if p * F.max_order() > ORDER_CAP:
        raise CapExceeded(f"p * max order = {p * F.max_order()} exceeds cap {ORDER_CAP}")
    if p == 1:
        return expectation(F)
    if p == 2:
        return second_moment(F)
    if p == 3:
        return covariance(multiply(F, F), F) + expectation(multiply(F, F)) * expectation(F)
    sq = multiply(F, F)
    return second_moment(sq)


def mixed_moment(factors) -> float:
    """E[prod F_i] over a short list of expansions."""
    factors = list(factors)
    if len(factors) == 1:
        return expectation(factors[0])
    if len(factors) == 2:
        return covariance(*factors) + expectation(factors[0]) * expectation(factors[1])
    head = reduce(multiply, factors[:-1])
    return covariance(head, factors[-1]) + expectation(head) * expectation(factors[-1])


def apply_L(F: ChaosExpansion) -> ChaosExpansion:
    """Ornstein-Uhlenbeck generator: multiplies the n-th chaos by -n."""
    return ChaosExpansion(F.dim, {n: scale(g, -n) for n, g in F._components.items() if n >= 1})


def gradient_expansion(F: ChaosExpansion) -> list:
    """Components D_j F = sum_n n I_{n-1}(g_n(., e_j)) as chaos expansions."""
    out = []
    for j in range(1, F.dim + 1):
        comps = {}
        for n, g in F._components.items():
            if n >= 1:
                s = slice_kernel(g, j)
                if not s.is_zero():
                    comps[n - 1] = scale(s, n)
        out.append(ChaosExpansion(F.dim, comps))
    return out


def gram_expansion(F: ChaosExpansion, G: ChaosExpansion) -> ChaosExpansion:
    """<DF, DG>_H as a chaos expansion."""
    _check_dim(F, G)
    total = ChaosExpansion(F.dim)
    for dF, dG in zip(gradient_expansion(F), gradient_expansion(G)):
        if dF.orders() and dG.orders():
            total = total + multiply(dF, dG)
    return total


def _order_check(f: SymKernel) -> None:
    if f.order < 1:
        raise ValueError("kernel order must be >= 1")


def gram_coef(n: int, m: int, r: int) -> float:
    """(n! m!)^2 / ((n-r)! (m-r)! (r-1)!)^2."""
    fact = math.factorial
    return (fact(n) * fact(m)) ** 2 / (fact(n - r) * fact(m - r) * fact(r - 1)) ** 2


def deriv_gram_second_moment(f: SymKernel, g: SymKernel) -> float:
    """E[<DI_n(f), DI_m(g)>_H^2] in closed form.

    sum_{r=1}^{n^m} (n! m!)^2 / ((n-r)! (m-r)! (r-1)!)^2 * ||f ~(x)_r g||^2_mod,
    where the modified norm carries the factor (n+m-2r)!.
    """
    _order_check(f)
    _order_check(g)
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimension mismatch: {f.dim} vs {g.dim}")
    n, m = f.order, g.order
    terms = []
    for r in range(1, min(n, m) + 1):
        h = contract_sym(f, g, r)
        terms.append(gram_coef(n, m, r) * norm_modified(h) ** 2)
    return math.fsum(terms)


def e_dnorm2(f: SymKernel) -> float:
    """E ||DF||^2 = n ||f||_mod^2."""
    _order_check(f)
    return f.order * norm_modified(f) ** 2


def e_dnorm4(f: SymKernel) -> float:
    """E ||DF||^4, the diagonal case of :func:`deriv_gram_second_moment`."""
    return deriv_gram_second_moment(f, f)


def var_dnorm2(f: SymKernel) -> float:
    return e_dnorm4(f) - e_dnorm2(f) ** 2


def dnorm_l2_gap(f: SymKernel) -> float:
    """E[(||DF||^2 - n)^2] = E||DF||^4 - 2n E||DF||^2 + n^2."""
    n = f.order
    return e_dnorm4(f) - 2 * n * e_dnorm2(f) + n * n


def contraction_norms(f: SymKernel) -> list:
    """Ambient norms of f (x)_l f for l = 1..n-1."""
    return [contract(f, f, l).norm_ambient() for l in range(1, f.order)]
