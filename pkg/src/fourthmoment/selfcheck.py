"""Invariant suite behind ``fourthmoment selfcheck``.

Every check is deterministic for a given seed and returns ``(ok, detail)``.
The report lists one line per check in registration order.
"""
from __future__ import annotations

import contextlib
import itertools
import math
from typing import Callable

import numpy as np

from . import _oracles as O
from . import chaos_algebra as CA
from . import chaos_eval as CE
from . import clt_battery as CB
from . import fbm_lab as FB
from . import io as kio
from . import symtensor as ST
from .rng import RandomStream, sample_points

CHECKS: list = []


def check(name: str):
    def deco(fn: Callable):
        CHECKS.append((name, fn))
        return fn

    return deco


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _random_pairs(seed: int, count: int, dmax=4, nmax=3):
    gen = np.random.default_rng(seed)
    for _ in range(count):
        d = int(gen.integers(1, dmax + 1))
        n, m = (int(v) for v in gen.integers(1, nmax + 1, size=2))
        yield O.random_kernel(gen, d, n, int(gen.integers(1, 7))), O.random_kernel(gen, d, m, int(gen.integers(1, 7)))


# symtensor ---------------------------------------------------------------

@check("symtensor.dense_oracle")
def _dense(seed):
    worst = 0.0
    for f, g in _random_pairs(seed, 40):
        A, B = O.to_dense(f), O.to_dense(g)
        for l in range(min(f.order, g.order) + 1):
            C = ST.contract(f, g, l)
            D = O.dense_contract(A, B, l)
            worst = max(worst, float(np.max(np.abs(O.block_to_dense(C) - D), initial=0.0)))
            S = ST.symmetrize_block(C)
            worst = max(worst, float(np.max(np.abs(O.to_dense(S) - O.dense_symmetrize(D)), initial=0.0)))
        worst = max(worst, _rel(ST.inner_ambient(f, f), O.dense_inner(A, A)))
    return worst < 1e-10, f"max deviation {worst:.3e}"


@check("symtensor.contraction_identity")
def _a23(seed):
    worst = 0.0
    for f, g in _random_pairs(seed + 1, 30):
        n, m = f.order, g.order
        for r in range(1, min(n, m) + 1):
            lhs = ST.contract(f, g, r).norm_ambient_sq()
            rhs = ST.inner_block(ST.contract(f, f, n - r), ST.contract(g, g, m - r))
            worst = max(worst, _rel(lhs, rhs))
    return worst < 1e-10, f"max relative deviation {worst:.3e}"


@check("symtensor.cauchy_schwarz")
def _a5(seed):
    ok = True
    for f, g in _random_pairs(seed + 2, 30):
        n, m = f.order, g.order
        for r in range(1, min(n, m) + 1):
            lhs = ST.contract(f, g, r).norm_ambient_sq()
            rhs = ST.contract(f, f, n - r).norm_ambient() * ST.contract(g, g, m - r).norm_ambient()
            ok &= lhs <= rhs * (1 + 1e-12) + 1e-15
    return ok, "all instances bounded" if ok else "bound violated"


@check("symtensor.symmetrization_contracts")
def _symnorm(seed):
    ok = True
    for f, g in _random_pairs(seed + 3, 30):
        for l in range(min(f.order, g.order) + 1):
            t = ST.contract(f, g, l)
            ok &= ST.symmetrize_block(t).norm_ambient() <= t.norm_ambient() * (1 + 1e-12) + 1e-15
    return ok, "norm never increases" if ok else "norm increased"


@check("symtensor.label_permutation")
def _perm(seed):
    gen = np.random.default_rng(seed + 4)
    worst = 0.0
    for f, g in _random_pairs(seed + 4, 20):
        perm = dict(zip(range(1, f.dim + 1), (int(v) + 1 for v in gen.permutation(f.dim))))
        fp, gp = ST.permute_labels(f, perm), ST.permute_labels(g, perm)
        for l in range(min(f.order, g.order) + 1):
            worst = max(worst, _rel(ST.contract(f, g, l).norm_ambient(), ST.contract(fp, gp, l).norm_ambient()))
    return worst < 1e-12, f"max relative deviation {worst:.3e}"


# chaos_eval --------------------------------------------------------------

@check("chaos_eval.isometry")
def _isometry(seed):
    gen = np.random.default_rng(seed + 5)
    dim = 3
    fs = [O.random_kernel(gen, dim, n, 4) for n in (1, 2, 2, 3)]
    pts = sample_points(dim, 40_000, RandomStream(seed, 5))
    vals = [CE.eval_integral(f, pts) for f in fs]
    bad = []
    for (i, f), (j, g) in itertools.combinations_with_replacement(enumerate(fs), 2):
        est = CE.estimate(vals[i] * vals[j])
        target = math.factorial(f.order) * ST.inner_ambient(f, g) if f.order == g.order else 0.0
        if not est.within(target, 4.0):
            bad.append((i, j))
    return not bad, f"pairs outside 4 stderr: {bad}"


@check("chaos_eval.gradient_fd")
def _fd(seed):
    gen = np.random.default_rng(seed + 6)
    worst = 0.0
    for _ in range(20):
        d, n = int(gen.integers(1, 5)), int(gen.integers(1, 5))
        f = O.random_kernel(gen, d, n, 5)
        x = gen.normal(size=d)
        g = CE.malliavin_gradient(f, x)
        h = 1e-5
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            fd = (CE.eval_integral(f, x + e) - CE.eval_integral(f, x - e)) / (2 * h)
            worst = max(worst, abs(fd - g[j]) / max(1.0, abs(g[j])))
    return worst < 1e-6, f"max relative deviation {worst:.3e}"


@check("chaos_eval.mean_grad_norm")
def _mean_grad_mc(seed):
    gen = np.random.default_rng(seed + 7)
    bad = []
    for i in range(4):
        f = O.random_kernel(gen, 3, 1 + i % 3, 4)
        est = CE.mc_mean(lambda p: CE.grad_norm_sq(f, p), 40_000, RandomStream(seed, 70 + i), 3)
        target = f.order * ST.norm_modified(f) ** 2
        if not est.within(target, 4.0):
            bad.append(i)
    return not bad, f"kernels outside 4 stderr: {bad}"


@check("chaos_eval.determinism")
def _det(seed):
    f = ST.SymKernel.make(2, 2, {(1, 2): 1.0, (2, 2): 0.5})
    s = RandomStream(seed, 8)
    a = CE.mc_values(lambda p: CE.eval_integral(f, p), 10_000, s, 2, chunk=10_000, workers=1)
    b = CE.mc_values(lambda p: CE.eval_integral(f, p), 10_000, s, 2, chunk=999, workers=4)
    return bool(np.array_equal(a, b)), "chunk/worker split changes nothing" if np.array_equal(a, b) else "streams differ"


# chaos_algebra -----------------------------------------------------------

@check("chaos_algebra.pathwise_product")
def _pathwise(seed):
    gen = np.random.default_rng(seed + 9)
    worst = 0.0
    for f, g in _random_pairs(seed + 9, 20):
        F = CA.ChaosExpansion.of(f) + float(gen.normal())
        G = CA.ChaosExpansion.of(g)
        P = CA.multiply(F, G)
        pts = gen.normal(size=(50, f.dim))
        lhs, rhs = P(pts), F(pts) * G(pts)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)))))
    return worst < 1e-9, f"max relative deviation {worst:.3e}"


@check("chaos_algebra.fourth_moment_polynomial")
def _m4(seed):
    gen = np.random.default_rng(seed + 10)
    worst = 0.0
    for _ in range(10):
        d, n = int(gen.integers(1, 4)), int(gen.integers(1, 3))
        f = O.random_kernel(gen, d, n)
        p = O.integral_poly(f)
        p2 = O.poly_mul(p, p)
        exact = O.gaussian_expectation(O.poly_mul(p2, p2))
        worst = max(worst, _rel(CA.moment(CA.ChaosExpansion.of(f), 4), exact))
    return worst < 1e-9, f"max relative deviation {worst:.3e}"


def _gram_poly(f, g) -> float:
    pf, pg = O.integral_poly(f), O.integral_poly(g)
    gram: dict = {}
    for j in range(f.dim):
        gram = O.poly_add(gram, O.poly_mul(O.poly_derivative(pf, j), O.poly_derivative(pg, j)))
    return O.gaussian_expectation(O.poly_mul(gram, gram))


@check("chaos_algebra.gram_moment_vs_algebra")
def _gram_moment(seed):
    worst = 0.0
    for f, g in _random_pairs(seed + 11, 12, dmax=3):
        closed = CA.deriv_gram_second_moment(f, g)
        gram = CA.gram_expansion(CA.ChaosExpansion.of(f), CA.ChaosExpansion.of(g))
        worst = max(worst, _rel(closed, CA.second_moment(gram)))
    return worst < 1e-9, f"max relative deviation {worst:.3e}"


@check("chaos_algebra.gram_moment_vs_polynomial")
def _gram_moment_poly(seed):
    worst = 0.0
    for f, g in _random_pairs(seed + 12, 8, dmax=2):
        worst = max(worst, _rel(CA.deriv_gram_second_moment(f, g), _gram_poly(f, g)))
    return worst < 1e-9, f"max relative deviation {worst:.3e}"


@check("chaos_algebra.mean_grad_norm_exact")
def _mean_grad_exact(seed):
    gen = np.random.default_rng(seed + 13)
    worst = 0.0
    for _ in range(20):
        f = O.random_kernel(gen, 3, int(gen.integers(1, 4)), 5)
        gram = CA.gram_expansion(CA.ChaosExpansion.of(f), CA.ChaosExpansion.of(f))
        worst = max(worst, _rel(CA.e_dnorm2(f), CA.expectation(gram)))
    return worst < 1e-10, f"max relative deviation {worst:.3e}"


@check("chaos_algebra.dnorm_gap_identity")
def _dnorm_gap(seed):
    gen = np.random.default_rng(seed + 14)
    worst = 0.0
    for _ in range(10):
        f = O.random_kernel(gen, 3, int(gen.integers(2, 4)), 5)
        f = f / ST.norm_modified(f)
        n = f.order
        gram = CA.gram_expansion(CA.ChaosExpansion.of(f), CA.ChaosExpansion.of(f))
        centered = gram - n
        direct = CA.second_moment(centered)
        worst = max(worst, _rel(direct, CA.dnorm_l2_gap(f)), _rel(direct, CA.var_dnorm2(f)))
    return worst < 1e-9, f"max relative deviation {worst:.3e}"


# clt_battery -------------------------------------------------------------

@check("clt_battery.positive_control")
def _pos(seed):
    worst = 0.0
    for k in range(1, 17):
        d = CB.diagnose_fixed_chaos(CB.tensor_sum_kernel(k, 2))
        worst = max(
            worst,
            abs(d.second_moment - 1.0),
            abs(d.fourth_moment - (3 + 12 / k)),
            abs(d.contraction_norms[0] ** 2 - 1 / (4 * k)),
            abs(d.var_dnorm2 - 8 / k),
        )
    return worst < 1e-12, f"max deviation {worst:.3e}"


@check("clt_battery.char_identity")
def _char(seed):
    bad = []
    kernels = [
        ST.SymKernel.basis_power(1, 1, 1),
        CB.fixed_kernel(2),
        CB.tensor_sum_kernel(3, 2),
        CB.fixed_kernel(3),
    ]
    for i, f in enumerate(kernels):
        rows = CB.char_identity_table(f, (0.5, 1.0, 2.0), 20_000, RandomStream(seed, 150 + i))
        bad += [(i, t) for t, r, s in rows if r > 5 * s]
    return not bad, f"(kernel, t) outside 5 stderr: {bad}"


@check("clt_battery.gram_bound_chain")
def _gram_bounds(seed):
    gen = np.random.default_rng(seed + 16)
    ok = True
    for _ in range(8):
        fs = sorted((O.random_kernel(gen, 3, int(gen.integers(1, 4)), 4) for _ in range(2)), key=lambda f: f.order)
        v = CB.diagnose_vector(fs)
        g, bc, bcs = v.gram_offdiag[(1, 2)], v.gram_bound_contraction[(1, 2)], v.gram_bound_cs[(1, 2)]
        ok &= g <= bc * (1 + 1e-12) + 1e-12 and bc <= bcs * (1 + 1e-12) + 1e-12
    return ok, "gram <= contraction bound <= Cauchy-Schwarz bound" if ok else "bound chain broken"


@check("clt_battery.vd_enumeration")
def _vd(seed):
    sizes = tuple(len(CB.enumerate_vd(d)) for d in (1, 2, 3, 4))
    return sizes == (0, 2, 12, 60), f"sizes {sizes}"


# fbm_lab -----------------------------------------------------------------

@check("fbm_lab.parseval")
def _parseval(seed):
    bad = [k for k in range(1, 22, 2) if FB.hermite_power_decomp(k).parseval() != FB.double_factorial(2 * k - 1)]
    return not bad, f"kappa failing: {bad}"


@check("fbm_lab.mehler")
def _mehler(seed):
    bad = []
    s = RandomStream(seed, 17)
    for i, rho in enumerate((-0.5, 0.0, 0.7)):
        z = s.substream(i).normals(2 * 100_000).reshape(-1, 2)
        x = z[:, 0]
        y = rho * x + math.sqrt(1 - rho * rho) * z[:, 1]
        est = CE.estimate(x**3 * y**3)
        if not est.within(FB.pair_power_moment(3, rho), 4.0):
            bad.append(rho)
    return not bad, f"rho outside 4 stderr: {bad}"


@check("fbm_lab.convention_reconciliation")
def _conv(seed):
    worst = 0.0
    for h in (0.1, 0.25, 0.35, 0.45):
        for kappa in (1, 3, 5):
            c = FB.limit_constants(h, kappa)
            worst = max(worst, abs(c.c_sq_twosided - c.c_sq_direct_twosided), abs(c.c_sq_onesided - c.c_sq_direct_onesided))
    return worst < 1e-8, f"max deviation {worst:.3e}"


@check("fbm_lab.variance_bridge")
def _bridge(seed):
    c = FB.limit_constants(0.35, 3)
    gaps = []
    for n in (256, 1024, 4096, 16384):
        v = math.fsum(FB.finite_n_variance(FB.FbmConfig(0.35, 3, n, paths=1)).values())
        gaps.append(abs(v - c.c_sq_twosided))
    shrinking = all(a > b for a, b in zip(gaps, gaps[1:]))
    cfg = FB.FbmConfig(0.35, 3, 256, paths=2000, seed=seed)
    z = FB.power_variation(FB.simulate_paths(cfg), cfg, 1.0)
    var, se = FB._var_estimate(z)
    exact = math.fsum(FB.finite_n_variance(cfg).values())
    ok = shrinking and abs(var - exact) <= 4 * se and abs(var - c.c_sq_twosided) < abs(var - c.c_sq_onesided)
    return ok, f"|Var - c2| by n: {[round(g, 4) for g in gaps]}; MC n=256: {var:.4f} +- {se:.4f} vs exact {exact:.4f}"


@check("fbm_lab.step2_bound")
def _step2(seed):
    c = FB.limit_constants(0.35, 3)
    d = c.decomp
    lags = np.arange(1, 20_000)
    rho = np.abs(FB.increment_corr(lags, 0.35))
    bound = math.fsum(b * b * math.factorial(m) * (1 + 2 * math.fsum(rho**m)) for m, b in d.coeffs.items())
    maxima = []
    for n in (256, 512, 1024):
        cfg = FB.FbmConfig(0.35, 3, n, paths=1)
        maxima.append(max(r for *_, r in _exact_step2(cfg)))
    return max(maxima) <= bound, f"max ratio by n {[round(m, 4) for m in maxima]}, bound {bound:.4f}"


def _exact_step2(cfg):
    rows = []
    for level in range(1, 5):
        h = cfg.horizon / 2**level
        for i in range(2**level):
            s, t = i * h, (i + 1) * h
            w = FB._grid_index(cfg, t) - FB._grid_index(cfg, s)
            rows.append((s, t, math.fsum(FB._window_var(cfg, w).values()) / (t - s)))
    return rows


# cli -----------------------------------------------------------------------

@check("cli.kernel_roundtrip")
def _roundtrip(seed):
    gen = np.random.default_rng(seed + 18)
    ok = True
    for _ in range(10):
        f = O.random_kernel(gen, int(gen.integers(1, 5)), int(gen.integers(0, 4)), 5)
        ok &= kio.loads_kernel(kio.dumps_kernel(f)) == f
    return ok, "identity" if ok else "round trip changed a kernel"


# mutations -----------------------------------------------------------------

def _gram_factorial_off_by_one(n, m, r):
    fact = math.factorial
    return (fact(n) * fact(m)) ** 2 / (fact(n - r) * fact(m - r) * fact(r)) ** 2


MUTATIONS = {"gram-factorial": (CA, "gram_coef", _gram_factorial_off_by_one)}


@contextlib.contextmanager
def injected(name: str | None):
    if not name:
        yield
        return
    if name not in MUTATIONS:
        raise ValueError(f"unknown mutation {name!r}; known: {sorted(MUTATIONS)}")
    module, attr, replacement = MUTATIONS[name]
    original = getattr(module, attr)
    setattr(module, attr, replacement)
    try:
        yield
    finally:
        setattr(module, attr, original)


def run(seed: int = 20240607, inject: str | None = None, only=None) -> tuple:
    """Run every registered check; returns (all_ok, report_lines)."""
    lines, all_ok = [], True
    with injected(inject):
        for name, fn in CHECKS:
            if only and not any(name.startswith(o) for o in only):
                continue
            try:
                ok, detail = fn(seed)
            except Exception as exc:  # a crashing check is a failed check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            all_ok &= bool(ok)
            lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok, lines
