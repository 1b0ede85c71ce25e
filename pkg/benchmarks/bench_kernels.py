"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-repeat wall time per call for each kernel and backend, the
speedup, and the max relative difference between the two results.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fourthmoment import _kernels, _oracles
from fourthmoment import fbm_lab as FB
from fourthmoment.chaos_eval import _compile
from fourthmoment.rng import RandomStream, sample_points


def cases():
    gen = np.random.default_rng(0)
    f = _oracles.random_kernel(gen, 4, 4)  # all 35 sorted indices
    c = _compile(f)
    xi = np.ascontiguousarray(sample_points(4, 100_000, RandomStream(0, 0)))
    yield "eval_terms (d=4, n=4, 1e5 points)", "eval_terms", (c.term_ptr, c.labels, c.powers, c.weights, xi, c.max_power)

    v = np.ascontiguousarray(gen.normal(size=(500, 1024)))
    rho = np.ascontiguousarray(FB.increment_corr(np.arange(191), 0.35) ** 3)
    yield "banded_quadform (500 x 1024, lag 190)", "banded_quadform", (v, rho)

    x = np.ascontiguousarray(gen.normal(size=1_000_000))
    yield "hermite_e (m=12, 1e6 points)", "hermite_e", (12, x)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if _kernels.BACKEND != "cython":
        print("compiled extension not available; only the fallback can be timed")
    print(f"{'kernel':40s} {'fallback':>11s} {'compiled':>11s} {'speedup':>8s} {'max rel diff':>13s}")
    for label, name, call_args in cases():
        fb = getattr(_kernels._fallback, name)
        t_fb = min(timeit.repeat(lambda: fb(*call_args), number=1, repeat=args.repeat))
        if _kernels.BACKEND == "cython":
            core = getattr(_kernels, name)
            t_c = min(timeit.repeat(lambda: core(*call_args), number=1, repeat=args.repeat))
            a, b = np.asarray(core(*call_args)), np.asarray(fb(*call_args))
            diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
            print(f"{label:40s} {t_fb * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_fb / t_c:7.1f}x {diff:13.1e}")
        else:
            print(f"{label:40s} {t_fb * 1e3:9.2f}ms {'-':>11s} {'-':>8s} {'-':>13s}")


if __name__ == "__main__":
    main()
