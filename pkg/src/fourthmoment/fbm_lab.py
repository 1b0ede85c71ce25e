"""Power variations of fractional Brownian motion.

Unit increments X_j = B_j - B_{j-1} of an fBm with Hurst index H form a
stationary Gaussian sequence with correlation

    rho(j) = (|j+1|^{2H} - 2|j|^{2H} + |j-1|^{2H}) / 2.

By self-similarity the normalized odd power variation on the 1/n grid is

    Z_t = n^{kappa H - 1/2} sum_{j<=[nt]} (B_{j/n} - B_{(j-1)/n})^kappa
        = n^{-1/2} sum_{j<=[nt]} X_j^kappa   (in law, jointly in t),

and B_t = n^{-H} sum_{j<=[nt]} X_j on the same sample.  x^kappa expands in
odd Hermite polynomials, x^kappa = sum_m b_m He_m(x), and Mehler's formula
gives E[X^kappa Y^kappa] = sum_m b_m^2 m! rho^m for a unit pair with
correlation rho.  The limit variance per unit time is

    two-sided:  c^2 = E[X^{2 kappa}] + 2 sum_{j>=1} E[(X_1 X_{1+j})^kappa]
    one-sided:  c^2 = sum_{j>=0} E[(X_1 X_{1+j})^kappa]

Only the two-sided value matches the variance of Z_1 as n grows; both are
reported.  The first chaos (m = 1) contributes b_1^2 n^{2H-1} to Var(Z_1),
which vanishes only at the slow rate n^{2H-1}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .chaos_eval import estimate, hermite
from .clt_battery import ks_normality
from .rng import RandomStream

KAPPA_CAP = 21
CHOLESKY_BUDGET = 8192
PATH_BLOCK = 64


@dataclass(frozen=True)
class FbmConfig:
    hurst: float
    kappa: int = 3
    n: int = 1024
    horizon: float = 1.0
    paths: int = 4000
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst <= 0.5:
            raise ValueError(f"Hurst index must satisfy 0 < H <= 1/2, got {self.hurst}")
        _check_kappa(self.kappa)
        if self.n < 1:
            raise ValueError("grid size n must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon T must be > 0")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")

    @property
    def steps(self) -> int:
        """N = ceil(n T) increments."""
        return math.ceil(self.n * self.horizon - 1e-9)

    @property
    def theorem_regime(self) -> bool:
        return self.hurst < 0.5

    def random_stream(self) -> RandomStream:
        return RandomStream(self.seed, self.stream)


def _check_kappa(kappa: int) -> None:
    if kappa < 1 or kappa % 2 == 0:
        raise ValueError(f"kappa must be an odd positive integer, got {kappa}")
    if kappa > KAPPA_CAP:
        raise ValueError(f"kappa {kappa} exceeds cap {KAPPA_CAP}")


def fbm_cov(t: float, s: float, hurst: float) -> float:
    """E[B_t B_s]."""
    if t < 0 or s < 0:
        raise ValueError("times must be >= 0")
    h2 = 2.0 * hurst
    return 0.5 * (t**h2 + s**h2 - abs(t - s) ** h2)


def increment_corr(j, hurst: float):
    """rho(j) for integer lag(s) ``j``; scalar in, scalar out."""
    arr = np.abs(np.asarray(j, dtype=np.float64))
    h2 = 2.0 * hurst
    out = np.empty_like(arr)
    small = arr < 2
    a = arr[small]
    out[small] = 0.5 * ((a + 1) ** h2 - 2 * a**h2 + np.abs(a - 1) ** h2)
    big = arr[~small]
    # the two expm1 terms cancel to first order; this form loses ~j*eps instead of j^2*eps
    out[~small] = 0.5 * big**h2 * (np.expm1(h2 * np.log1p(1 / big)) + np.expm1(h2 * np.log1p(-1 / big)))
    if np.ndim(j) == 0:
        return float(out)
    return out


@lru_cache(maxsize=8)
def _cholesky(hurst: float, size: int) -> np.ndarray:
    if size > CHOLESKY_BUDGET:
        raise ValueError(f"{size} increments exceed the dense Cholesky budget {CHOLESKY_BUDGET}")
    rho = increment_corr(np.arange(size), hurst)
    idx = np.arange(size)
    corr = rho[np.abs(idx[:, None] - idx[None, :])]
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"correlation matrix is not positive definite (H={hurst}, N={size})") from exc
    chol.setflags(write=False)
    return chol


@dataclass(frozen=True)
class IncrementPath:
    x: np.ndarray
    path_id: int = 0


def simulate_paths(cfg: FbmConfig, stream: RandomStream | None = None, first: int = 0, count: int | None = None) -> np.ndarray:
    """Increments of paths ``first .. first + count - 1``, shape (count, N).

    Path p uses draws p*N .. (p+1)*N - 1 of the stream, so any path can be
    regenerated on its own.
    """
    stream = stream or cfg.random_stream()
    count = cfg.paths if count is None else count
    size = cfg.steps
    chol = _cholesky(cfg.hurst, size)
    # BLAS results depend on the operand shape, so paths are always produced in
    # the same aligned blocks; a path then has identical bits however it is requested
    lo = first // PATH_BLOCK * PATH_BLOCK
    hi = -(-(first + count) // PATH_BLOCK) * PATH_BLOCK
    out = np.empty((count, size))
    for b in range(lo, hi, PATH_BLOCK):
        z = stream.normals(PATH_BLOCK * size, b * size).reshape(PATH_BLOCK, size)
        x = z @ chol.T
        a0, a1 = max(b, first), min(b + PATH_BLOCK, first + count)
        out[a0 - first:a1 - first] = x[a0 - b:a1 - b]
    return out


def simulate_increments(cfg: FbmConfig, stream: RandomStream | None = None, path_id: int = 0) -> IncrementPath:
    return IncrementPath(simulate_paths(cfg, stream, first=path_id, count=1)[0], path_id)


def _grid_index(cfg: FbmConfig, t: float) -> int:
    if not 0.0 <= t <= cfg.horizon + 1e-12:
        raise ValueError(f"t={t} outside [0, {cfg.horizon}]")
    return min(math.floor(cfg.n * t + 1e-9), cfg.steps)


def power_variation(x, cfg: FbmConfig, t: float):
    """Z_t = n^{-1/2} sum_{j<=[nt]} x_j^kappa for one path or a batch of rows."""
    arr = np.asarray(x.x if isinstance(x, IncrementPath) else x, dtype=np.float64)
    k = _grid_index(cfg, t)
    vals = np.sum(arr[..., :k] ** cfg.kappa, axis=-1) / math.sqrt(cfg.n)
    return float(vals) if np.ndim(vals) == 0 else vals


def fbm_level(x, cfg: FbmConfig, t: float):
    """B_t = n^{-H} sum_{j<=[nt]} x_j on the same sample."""
    arr = np.asarray(x.x if isinstance(x, IncrementPath) else x, dtype=np.float64)
    k = _grid_index(cfg, t)
    vals = np.sum(arr[..., :k], axis=-1) * cfg.n ** (-cfg.hurst)
    return float(vals) if np.ndim(vals) == 0 else vals


@dataclass(frozen=True)
class HermitePowerDecomp:
    kappa: int
    coeffs: dict  # m -> b_m with x^kappa = sum b_m He_m(x)

    def normalized_coeffs(self) -> dict:
        """c_m = m! b_m, the coefficients against H_m = He_m / m!."""
        return {m: math.factorial(m) * b for m, b in self.coeffs.items()}

    def parseval(self) -> int:
        return sum(b * b * math.factorial(m) for m, b in self.coeffs.items())

    def __getitem__(self, m: int) -> int:
        return self.coeffs.get(m, 0)


def hermite_power_decomp(kappa: int) -> HermitePowerDecomp:
    """Integer coefficients of x^kappa in the He basis (x He_m = He_{m+1} + m He_{m-1})."""
    _check_kappa(kappa)
    coeffs = {0: 1}
    for _ in range(kappa):
        nxt: dict = {}
        for m, b in coeffs.items():
            nxt[m + 1] = nxt.get(m + 1, 0) + b
            if m:
                nxt[m - 1] = nxt.get(m - 1, 0) + m * b
        coeffs = {m: b for m, b in nxt.items() if b}
    return HermitePowerDecomp(kappa, dict(sorted(coeffs.items())))


def double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def pair_power_moment(kappa: int, rho: float) -> float:
    """E[X^kappa Y^kappa] for a standard Gaussian pair with correlation rho."""
    d = hermite_power_decomp(kappa)
    return math.fsum(b * b * math.factorial(m) * rho**m for m, b in d.coeffs.items())


def lag_tail_bound(hurst: float, m: int, lag: int) -> float:
    """Upper bound on sum_{j>lag} |rho(j)|^m from |rho(j)| <= H(1-2H)(j-1)^{2H-2}."""
    if lag < 1:
        return math.inf
    beta = m * (2.0 - 2.0 * hurst)
    if beta <= 1.0:
        return math.inf
    amp = (hurst * (1.0 - 2.0 * hurst)) ** m
    return amp * (lag**-beta + lag ** (1.0 - beta) / (beta - 1.0))


def _truncation_lag(hurst: float, m: int, tol: float) -> int:
    hi = 1
    while lag_tail_bound(hurst, m, hi) >= tol:
        hi *= 2
        if hi > 1 << 40:
            raise ValueError("tail bound does not reach the tolerance")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lag_tail_bound(hurst, m, mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


def rho_power_sum(hurst: float, m: int, tol: float = 1e-10) -> tuple:
    """(sum_{j>=1} rho(j)^m, truncation lag, tail bound).

    m = 1 telescopes exactly to -1/2 for H < 1/2; H = 1/2 gives 0 for every m.
    """
    if hurst == 0.5:
        return 0.0, 0, 0.0
    if m == 1:
        return -0.5, 0, 0.0
    lag = _truncation_lag(hurst, m, tol)
    rho = increment_corr(np.arange(1, lag + 1), hurst)
    return math.fsum(rho**m), lag, lag_tail_bound(hurst, m, lag)


@dataclass
class LimitConstants:
    hurst: float
    kappa: int
    decomp: HermitePowerDecomp
    lag_sums: dict
    truncation: dict
    tail_bound: dict
    sigma_sq: dict  # two-sided, per chaos
    sigma_sq_onesided: dict
    c_sq_twosided: float
    c_sq_onesided: float
    c_sq_direct_twosided: float = math.nan
    c_sq_direct_onesided: float = math.nan
    tolerance: float = 1e-10

    @property
    def c_sq_gap(self) -> float:
        return self.c_sq_onesided - self.c_sq_twosided


def limit_constants(cfg_or_hurst, kappa: int | None = None, tol: float = 1e-10) -> LimitConstants:
    """Per-chaos limit variances and c^2 under both summation conventions."""
    if isinstance(cfg_or_hurst, FbmConfig):
        hurst, kappa = cfg_or_hurst.hurst, cfg_or_hurst.kappa
    else:
        hurst = float(cfg_or_hurst)
    if not 0.0 < hurst <= 0.5:
        raise ValueError(f"limit constants need 0 < H <= 1/2 (got {hurst}); the rho-series diverge otherwise")
    decomp = hermite_power_decomp(kappa)
    sums, lags, tails, two, one = {}, {}, {}, {}, {}
    for m, b in decomp.coeffs.items():
        s, lag, tail = rho_power_sum(hurst, m, tol)
        w = b * b * math.factorial(m)
        sums[m], lags[m], tails[m] = s, lag, tail
        two[m] = w * (1.0 + 2.0 * s)
        one[m] = w * (1.0 + s)
    out = LimitConstants(
        hurst, kappa, decomp, sums, lags, tails, two, one,
        math.fsum(two.values()), math.fsum(one.values()), tolerance=tol,
    )
    out.c_sq_direct_twosided, out.c_sq_direct_onesided = _direct_c_sq(hurst, kappa, lags, tol)
    return out


def _direct_c_sq(hurst: float, kappa: int, lags: dict, tol: float) -> tuple:
    """c^2 summed lag by lag from the Gaussian pairing count of E[(X_1 X_{1+j})^kappa]."""
    lag = max([v for v in lags.values()] + [1])
    if hurst == 0.5:
        lag = 0
    rho = increment_corr(np.arange(1, lag + 1), hurst) if lag else np.zeros(0)
    pair = []
    for r in rho:
        # choose p cross-pairs between the X's and Y's; the rest pair within
        pair.append(math.fsum(
            math.comb(kappa, p) ** 2 * math.factorial(p) * double_factorial(kappa - p - 1) ** 2 * r**p
            for p in range(kappa % 2, kappa + 1, 2)
        ))
    head = math.fsum(pair)
    b1 = hermite_power_decomp(kappa)[1]
    # the first chaos converges too slowly to truncate; add its exact remainder
    rem1 = 0.0 if hurst == 0.5 else b1 * b1 * (-0.5 - math.fsum(rho))
    top = double_factorial(2 * kappa - 1)
    return top + 2.0 * (head + rem1), top + head + rem1


def finite_n_variance(cfg: FbmConfig, t: float | None = None) -> dict:
    """Exact Var(Z_t) at grid size n, split by chaos: (1/n) b^2 m! sum_{i,j<=[nt]} rho(i-j)^m."""
    t = cfg.horizon if t is None else t
    return _window_var(cfg, _grid_index(cfg, t))


def finite_n_cov_level(cfg: FbmConfig, t: float | None = None) -> float:
    """Exact Cov(B_t, Z_t) at grid size n: b_1 n^{-H-1/2} [nt]^{2H}."""
    t = cfg.horizon if t is None else t
    w = _grid_index(cfg, t)
    b1 = hermite_power_decomp(cfg.kappa)[1]
    return b1 * cfg.n ** (-cfg.hurst - 0.5) * w ** (2 * cfg.hurst)


def ergodic_derivative_stat(x, m: int, a: float, b: float, cfg: FbmConfig, max_lag: int | None = None):
    """||D J_m Y||^2 = (c_m^2 / n) sum_{i,j in ([na],[nb]]} H_{m-1}(X_i) H_{m-1}(X_j) rho(j-i).

    With H_m = He_m / m! and c_m = m! b_m this is
    (m b_m)^2 / n * sum_{i,j} He_{m-1}(X_i) He_{m-1}(X_j) rho(j-i).
    Lags are cut at ``max_lag`` (default: the truncation lag of the m-th series,
    or the whole window for m = 1).
    """
    if not 1 <= m <= cfg.kappa:
        raise ValueError(f"m must be in 1..{cfg.kappa}")
    if not 0.0 <= a < b <= cfg.horizon + 1e-12:
        raise ValueError("need 0 <= a < b <= T")
    arr = np.asarray(x.x if isinstance(x, IncrementPath) else x, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    lo, hi = _grid_index(cfg, a), _grid_index(cfg, b)
    window = np.ascontiguousarray(arr[:, lo:hi])
    width = window.shape[1]
    bm = hermite_power_decomp(cfg.kappa)[m]
    if bm == 0 or width == 0:
        vals = np.zeros(arr.shape[0])
    else:
        if max_lag is None:
            max_lag = width - 1 if (m == 1 or cfg.hurst == 0.5) else rho_power_sum(cfg.hurst, m)[1]
        max_lag = min(max_lag, width - 1)
        rho = np.ascontiguousarray(increment_corr(np.arange(max_lag + 1), cfg.hurst))
        v = np.ascontiguousarray(hermite(m - 1, window))
        vals = (m * bm) ** 2 / cfg.n * _kernels.banded_quadform(v, rho)
    return float(vals[0]) if single else vals


@dataclass
class JointResult:
    config: FbmConfig
    level: np.ndarray  # B_T per path
    power_variation: np.ndarray  # Z_T per path
    constants: LimitConstants
    summary: dict = field(default_factory=dict)


def _corr(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.corrcoef(u, v)[0, 1])


def _var_estimate(z: np.ndarray) -> tuple:
    c = z - z.mean()
    var = float(np.mean(c**2) * len(z) / (len(z) - 1))
    m4 = float(np.mean(c**4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / len(z))


def _lag1_estimate(x: np.ndarray):
    per_path = np.einsum("ij,ij->i", x[:, :-1], x[:, 1:]) / (x.shape[1] - 1)
    return estimate(per_path) if len(per_path) > 1 else None


def step2_table(x: np.ndarray, cfg: FbmConfig, levels: int = 4) -> list:
    """Rows (s, t, E|Z_t - Z_s|^2 / (t - s), exact value) over dyadic intervals."""
    rows = []
    for level in range(1, levels + 1):
        h = cfg.horizon / 2**level
        for i in range(2**level):
            s, t = i * h, (i + 1) * h
            dz = power_variation(x, cfg, t) - power_variation(x, cfg, s)
            w = _grid_index(cfg, t) - _grid_index(cfg, s)
            exact = math.fsum(_window_var(cfg, w).values()) / (t - s)
            rows.append((s, t, float(np.mean(dz**2)) / (t - s), exact))
    return rows


def _window_var(cfg: FbmConfig, w: int) -> dict:
    lags = np.arange(max(w, 1))
    rho = increment_corr(lags, cfg.hurst)
    mult = np.where(lags == 0, w, 2 * (w - lags)).astype(np.float64)
    return {
        m: b * b * math.factorial(m) * math.fsum(mult * rho**m) / cfg.n
        for m, b in hermite_power_decomp(cfg.kappa).coeffs.items()
    }


def joint_experiment(cfg: FbmConfig, ergodic_paths: int = 500, ergodic_window: tuple = (0.0, None)) -> JointResult:
    """Simulate (B_T, Z_T) on every path and collect the summary tests."""
    x = simulate_paths(cfg)
    T = cfg.horizon
    level = fbm_level(x, cfg, T)
    z = power_variation(x, cfg, T)
    consts = limit_constants(cfg)
    M = cfg.paths
    out = JointResult(cfg, level, z, consts)
    s = out.summary

    half = T / 2
    b_half = fbm_level(x, cfg, half)
    s["level_variances"] = {
        "var_B_T": (float(np.var(level, ddof=1)), fbm_cov(T, T, cfg.hurst)),
        "var_B_half": (float(np.var(b_half, ddof=1)), fbm_cov(half, half, cfg.hurst)),
        "cov_B_half_B_T": (float(np.cov(b_half, level)[0, 1]), fbm_cov(half, T, cfg.hurst)),
    }
    lag1 = _lag1_estimate(x)
    if lag1 is not None:
        s["rho1"] = {"estimate": lag1.mean, "stderr": lag1.stderr, "target": increment_corr(1, cfg.hurst)}

    var_z, var_z_se = _var_estimate(z) if M > 1 else (math.nan, math.nan)
    fin = finite_n_variance(cfg, T)
    s["variance"] = {
        "var_Z_T": var_z,
        "stderr": var_z_se,
        "c_sq_twosided_T": consts.c_sq_twosided * T,
        "c_sq_onesided_T": consts.c_sq_onesided * T,
        "c_sq_gap": consts.c_sq_gap,
        "rel_err_twosided": var_z / (consts.c_sq_twosided * T) - 1.0 if consts.c_sq_twosided else math.nan,
        "finite_n_exact": math.fsum(fin.values()),
        "finite_n_by_chaos": fin,
    }
    bound = 4.0 / math.sqrt(M)
    if M > 2:
        c_lvl = _corr(level, z)
        c_sq = _corr(level**2, z**2)
        s["independence"] = {
            "corr_B_Z": c_lvl,
            "corr_B2_Z2": c_sq,
            "bound": bound,
            "corr_B_Z_ok": abs(c_lvl) < bound,
            "corr_B2_Z2_ok": abs(c_sq) < bound,
            "finite_n_corr_B_Z": finite_n_cov_level(cfg, T) / math.sqrt(fbm_cov(T, T, cfg.hurst) * math.fsum(fin.values())),
        }
    if consts.c_sq_twosided > 1e-12 and M >= 100:
        stat, p = ks_normality(z / math.sqrt(consts.c_sq_twosided * T), 1.0)
        s["ks"] = {"stat": stat, "p": p}

    a, b = ergodic_window
    b = T if b is None else b
    sub = x[: min(ergodic_paths, M)]
    erg = {}
    for m in sorted(consts.decomp.coeffs):
        vals = ergodic_derivative_stat(sub, m, a, b, cfg)
        e = estimate(vals) if len(vals) > 1 else None
        erg[m] = {
            "mean": float(np.mean(vals)),
            "stderr": e.stderr if e else math.nan,
            "target_twosided": (b - a) * m * consts.sigma_sq[m],
            "target_onesided": (b - a) * m * consts.sigma_sq_onesided[m],
        }
    s["ergodic"] = erg
    s["step2"] = step2_table(x, cfg)
    s["step2_max_ratio"] = max(r[2] for r in s["step2"])
    return out
