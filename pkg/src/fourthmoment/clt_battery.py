"""Diagnostics for the equivalent conditions of the fourth-moment theorem.

For a unit-variance sequence F_k = I_n(f_k) in a fixed chaos (n >= 2) the
following are equivalent:

    (i)   F_k -> N(0, 1) in law
    (ii)  E[F_k^4] -> 3
    (iii) ||f_k (x)_l f_k|| -> 0 for 1 <= l <= n - 1
    (iv)  ||DF_k||^2 -> n in L^2

The battery reports every metric for a given k.  It never decides that a
sequence converges; threshold flags only say whether the finite-k metric is
within ``eps`` of its limit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import stats

from . import chaos_algebra
from .chaos_algebra import (
    ChaosExpansion,
    contraction_norms,
    covariance,
    deriv_gram_second_moment,
    dnorm_l2_gap,
    e_dnorm2,
    e_dnorm4,
    moment,
    multiply,
    var_dnorm2,
)
from .chaos_eval import estimate, eval_integral, grad_norm_sq
from .errors import ConsistencyError, DimensionMismatch
from .rng import RandomStream, sample_points
from .symtensor import SymKernel, contract, inner_ambient, norm_modified

DEFAULT_EPS = 1e-2
KS_MIN_SAMPLES = 100


@dataclass(frozen=True)
class BatteryOptions:
    eps: float = DEFAULT_EPS
    mc_samples: int = 0
    t_grid: tuple = (0.5, 1.0, 2.0)
    seed: int = 0
    stream: int = 0
    ks_alpha: float = 0.01

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("threshold eps must be > 0")
        if self.mc_samples and self.mc_samples < KS_MIN_SAMPLES:
            raise ValueError(f"Monte Carlo block needs at least {KS_MIN_SAMPLES} samples")


@dataclass
class Diagnostics1D:
    k: int
    order: int
    second_moment: float
    fourth_moment: float
    contraction_norms: list
    e_dnorm2: float
    e_dnorm4: float
    var_dnorm2: float
    dnorm_l2_gap: float
    char_residual: float = math.nan
    char_stderr: float = math.nan
    ks_stat: float = math.nan
    ks_p: float = math.nan
    flags: dict = field(default_factory=dict)

    def max_contraction(self) -> float:
        return max(self.contraction_norms, default=0.0)


@dataclass
class VectorDiagnostics:
    k: int
    orders: tuple
    covariance: np.ndarray
    coordinates: list
    gram_offdiag: dict
    gram_bound_contraction: dict
    gram_bound_cs: dict
    sum_fourth: float
    vd_moments: dict
    flags: dict = field(default_factory=dict)


@dataclass
class GeneralDiagnostics:
    k: int
    n_trunc: int
    variances: dict
    tail_mass: float
    sigma_sq_partial: float
    e_dnorm2: dict
    var_dnorm2: dict
    dnorm2_bound: float


def _flags(d: Diagnostics1D, eps: float, alpha: float) -> dict:
    n = d.order
    flags = {
        "normalized": abs(d.second_moment - 1.0) < eps,
        "fourth_moment": abs(d.fourth_moment - 3.0) < eps,
        "contractions": d.max_contraction() < eps,
        "derivative_l2": d.dnorm_l2_gap < eps,
    }
    if not math.isnan(d.ks_p):
        flags["ks_normal"] = d.ks_p > alpha
    if n == 1:
        flags["contractions"] = True
    return flags


def diagnose_fixed_chaos(f: SymKernel, opts: BatteryOptions | None = None, k: int = 0) -> Diagnostics1D:
    """All fourth-moment CLT metrics for F = I_n(f)."""
    opts = opts or BatteryOptions()
    if f.order < 1:
        raise ValueError("diagnose_fixed_chaos needs order >= 1")
    F = ChaosExpansion.of(f)
    d = Diagnostics1D(
        k=k,
        order=f.order,
        second_moment=norm_modified(f) ** 2,
        fourth_moment=moment(F, 4),
        contraction_norms=contraction_norms(f),
        e_dnorm2=e_dnorm2(f),
        e_dnorm4=e_dnorm4(f),
        var_dnorm2=var_dnorm2(f),
        dnorm_l2_gap=dnorm_l2_gap(f),
    )
    if opts.mc_samples:
        stream = RandomStream(opts.seed, opts.stream).substream(k)
        table = char_identity_table(f, opts.t_grid, opts.mc_samples, stream)
        worst = max(table, key=lambda row: row[1])
        d.char_residual, d.char_stderr = worst[1], worst[2]
        samples = eval_integral(f, sample_points(f.dim, opts.mc_samples, stream.substream(1)))
        d.ks_stat, d.ks_p = ks_normality(samples, 1.0)
    d.flags = _flags(d, opts.eps, opts.ks_alpha)
    return d


def char_identity_table(f: SymKernel, t_grid, n_samples: int, stream: RandomStream) -> list:
    """Rows (t, residual, stderr) for E[F e^{itF}] = (it/n) E[e^{itF} ||DF||^2].

    Both sides use the same samples; ``stderr`` is the standard error of the
    per-sample difference.
    """
    if f.order < 1:
        raise ValueError("order must be >= 1")
    pts = sample_points(f.dim, n_samples, stream)
    F = eval_integral(f, pts)
    G = grad_norm_sq(f, pts)
    rows = []
    for t in t_grid:
        phase = np.exp(1j * t * F)
        diff = F * phase - (1j * t / f.order) * phase * G
        re, im = estimate(diff.real), estimate(diff.imag)
        resid = math.hypot(re.mean, im.mean)
        rows.append((float(t), resid, math.hypot(re.stderr, im.stderr)))
    return rows


def char_identity_residual(f: SymKernel, t_grid, n_samples: int, stream: RandomStream) -> float:
    """sup over ``t_grid`` of the Monte Carlo residual of the identity."""
    return max(r for _, r, _ in char_identity_table(f, t_grid, n_samples, stream))


def nongaussianity_guard(f: SymKernel, tol: float = 1e-9) -> bool:
    """Check Var ||DF||^2 > tol for a normalized kernel of order >= 2.

    A normalized element of a fixed chaos of order >= 2 is never Gaussian, so
    a vanishing variance can only come from a computational error.
    """
    if f.order < 2:
        raise ValueError("guard applies to chaos order >= 2")
    second = norm_modified(f) ** 2
    if abs(second - 1.0) > 1e-9:
        raise ValueError(f"kernel must be normalized (E F^2 = 1), got {second!r}")
    v = var_dnorm2(f)
    if not v > tol:
        raise ConsistencyError(f"Var ||DF||^2 = {v!r} <= {tol} for a normalized order-{f.order} kernel")
    return True


def enumerate_vd(d: int) -> list:
    """4-tuples (1-based) of the three index patterns used in the vector criterion.

    (a) i1 != i2 = i3 = i4; (b) i1 != i2 = i3 != i4, i4 != i1; (c) all distinct.
    """
    out = []
    for t in itertools.product(range(1, d + 1), repeat=4):
        i1, i2, i3, i4 = t
        a = i1 != i2 and i2 == i3 == i4
        b = i1 != i2 and i2 == i3 and i3 != i4 and i4 != i1
        c = len(set(t)) == 4
        if a or b or c:
            out.append(t)
    return out


def diagnose_vector(fs, opts: BatteryOptions | None = None, k: int = 0) -> VectorDiagnostics:
    """Metrics of the multidimensional theorem for F = (I_{n_1}(f^1), ..., I_{n_d}(f^d))."""
    opts = opts or BatteryOptions()
    fs = list(fs)
    d = len(fs)
    if d < 2:
        raise ValueError("vector diagnostics need d >= 2")
    dim = fs[0].dim
    if any(f.dim != dim for f in fs):
        raise DimensionMismatch("all kernels must share one ambient dimension")
    orders = tuple(f.order for f in fs)
    if any(n < 1 for n in orders):
        raise ValueError("all orders must be >= 1")
    if list(orders) != sorted(orders):
        raise ValueError("orders must be non-decreasing")

    cov = np.zeros((d, d))
    for i, j in itertools.product(range(d), repeat=2):
        if orders[i] == orders[j]:
            cov[i, j] = math.factorial(orders[i]) * inner_ambient(fs[i], fs[j])

    coords = [diagnose_fixed_chaos(f, BatteryOptions(eps=opts.eps), k=k) for f in fs]

    gram, bound_c, bound_cs = {}, {}, {}
    for i, j in itertools.combinations(range(d), 2):
        fi, fj = fs[i], fs[j]
        ni, nj = orders[i], orders[j]
        gram[(i + 1, j + 1)] = deriv_gram_second_moment(fi, fj)
        bc, bcs = [], []
        for r in range(1, min(ni, nj) + 1):
            w = chaos_algebra.gram_coef(ni, nj, r) * math.factorial(ni + nj - 2 * r)
            bc.append(w * contract(fi, fj, r).norm_ambient_sq())
            bcs.append(w * contract(fi, fi, ni - r).norm_ambient() * contract(fj, fj, nj - r).norm_ambient())
        bound_c[(i + 1, j + 1)] = math.fsum(bc)
        bound_cs[(i + 1, j + 1)] = math.fsum(bcs)

    comps = [ChaosExpansion.of(f) for f in fs]
    total = reduce(lambda a, b: a + b, comps)
    sum_fourth = moment(total, 4)

    pair_cache = {}

    def pair(a, b):
        key = (min(a, b), max(a, b))
        if key not in pair_cache:
            pair_cache[key] = multiply(comps[key[0] - 1], comps[key[1] - 1])
        return pair_cache[key]

    vd = {}
    for t in enumerate_vd(d):
        left, right = pair(t[0], t[1]), pair(t[2], t[3])
        vd[t] = covariance(left, right) + _mean(left) * _mean(right)

    out = VectorDiagnostics(k, orders, cov, coords, gram, bound_c, bound_cs, sum_fourth, vd)
    eps = opts.eps
    out.flags = {
        "covariance": bool(np.max(np.abs(cov - np.eye(d))) < eps),
        "coordinates_fourth": all(c.flags["fourth_moment"] for c in coords),
        "coordinates_derivative": all(c.flags["derivative_l2"] for c in coords),
        "gram_offdiag": max(gram.values(), default=0.0) < eps,
        "sum_fourth": abs(sum_fourth - 3 * d * d) < eps,
        "vd_moments": max((abs(v) for v in vd.values()), default=0.0) < eps,
    }
    return out


def _mean(F: ChaosExpansion) -> float:
    return F.component(0).value() if 0 in F.orders() else 0.0


def diagnose_general(Fs, n_trunc: int, opts: BatteryOptions | None = None) -> list:
    """Chaos-by-chaos metrics for centered square-integrable F_k (finite expansions)."""
    opts = opts or BatteryOptions()
    if n_trunc < 1:
        raise ValueError("n_trunc must be >= 1")
    out = []
    for k, F in enumerate(Fs, start=1):
        if abs(_mean(F)) > 0:
            raise ValueError(f"F_{k} is not centered (E F = {_mean(F)!r})")
        variances, e2, v2 = {}, {}, {}
        tail = []
        bound = []
        for n, g in F.components.items():
            var_n = norm_modified(g) ** 2
            bound.append(n * var_n)
            if n <= n_trunc:
                variances[n] = var_n
                e2[n] = e_dnorm2(g)
                v2[n] = var_dnorm2(g)
            else:
                tail.append(var_n)
        for n in range(1, n_trunc + 1):
            variances.setdefault(n, 0.0)
            e2.setdefault(n, 0.0)
            v2.setdefault(n, 0.0)
        out.append(
            GeneralDiagnostics(
                k=k,
                n_trunc=n_trunc,
                variances=dict(sorted(variances.items())),
                tail_mass=math.fsum(tail),
                sigma_sq_partial=math.fsum(variances.values()),
                e_dnorm2=dict(sorted(e2.items())),
                var_dnorm2=dict(sorted(v2.items())),
                dnorm2_bound=math.fsum(bound),
            )
        )
    return out


def ks_normality(samples, sigma: float = 1.0) -> tuple:
    """One-sample KS statistic and asymptotic p-value against N(0, sigma^2)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < KS_MIN_SAMPLES:
        raise ValueError(f"need at least {KS_MIN_SAMPLES} samples, got {x.size}")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    res = stats.kstest(x, "norm", args=(0.0, sigma), method="asymp")
    return float(res.statistic), float(res.pvalue)


# kernel families ---------------------------------------------------------

def tensor_sum_kernel(k: int, order: int, signs=None) -> SymKernel:
    """(k * n!)^{-1/2} sum_{i<=k} s_i e_i^{(x) n} over R^k; unit variance."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c = 1.0 / math.sqrt(k * math.factorial(order))
    signs = signs or [1.0] * k
    return SymKernel(k, order, {(i,) * order: c * signs[i - 1] for i in range(1, k + 1)})


def alternating_pair(k: int, order: int) -> tuple:
    """Two unit-variance kernels that are orthogonal for even k and share support."""
    if k % 2:
        raise ValueError("alternating pair needs even k")
    plus = tensor_sum_kernel(k, order)
    alt = tensor_sum_kernel(k, order, signs=[(-1.0) ** (i + 1) for i in range(1, k + 1)])
    return plus, alt


def fixed_kernel(order: int, dim: int = 1) -> SymKernel:
    """Normalized e_1^{(x) n}: a unit-variance element that never becomes Gaussian."""
    return SymKernel.basis_power(dim, 1, order, 1.0 / math.sqrt(math.factorial(order)))
