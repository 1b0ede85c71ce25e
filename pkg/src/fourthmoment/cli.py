"""Command-line front end.

Exit codes:

    0  success
    1  selfcheck failure
    2  kernel file could not be parsed (message carries the line number)
    3  a size cap was exceeded (chaos order, support, Cholesky budget)
    4  invalid battery or experiment configuration
    5  Hurst index outside the theorem's range H < 1/2
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import chaos_algebra as CA
from . import clt_battery as CB
from . import fbm_lab as FB
from . import io as kio
from . import selfcheck
from .chaos_eval import estimate, eval_integral, grad_norm_sq
from .errors import CapExceeded
from .rng import RandomStream, sample_points

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_CAP, EXIT_CONFIG, EXIT_HURST = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _merge_config(args, section: str, keys: tuple) -> dict:
    """Flags override TOML values; TOML keys may sit at top level or under [section]."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            raw = kio.read_config(args.config)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_CONFIG) from exc
        cfg.update({k: v for k, v in raw.items() if not isinstance(v, dict)})
        cfg.update(raw.get(section, {}))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    unknown = set(cfg) - set(keys)
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}", EXIT_CONFIG)
    return cfg


# moments -------------------------------------------------------------------

def cmd_moments(args) -> int:
    try:
        f = kio.read_kernel(args.kernel)
    except OSError as exc:
        raise CliError(f"cannot read {args.kernel}: {exc}", EXIT_PARSE) from exc
    if f.order < 1:
        raise CliError("moments needs a kernel of order >= 1", EXIT_CONFIG)
    if args.mc is not None and args.mc < 2:
        raise CliError("--mc needs at least 2 samples", EXIT_CONFIG)
    F = CA.ChaosExpansion.of(f)
    rows = [
        {"quantity": "second_moment", "exact": CA.second_moment(F)},
        {"quantity": "fourth_moment", "exact": CA.moment(F, 4)},
    ]
    for l, c in enumerate(CA.contraction_norms(f), start=1):
        rows.append({"quantity": f"contraction_sq_l{l}", "exact": c * c})
    rows += [
        {"quantity": "e_dnorm2", "exact": CA.e_dnorm2(f)},
        {"quantity": "e_dnorm4", "exact": CA.e_dnorm4(f)},
        {"quantity": "var_dnorm2", "exact": CA.var_dnorm2(f)},
        {"quantity": "dnorm_l2_gap", "exact": CA.dnorm_l2_gap(f)},
    ]
    if args.mc:
        pts = sample_points(f.dim, args.mc, RandomStream(args.seed, 0))
        vals = eval_integral(f, pts)
        dn = grad_norm_sq(f, pts)
        mc = {
            "second_moment": estimate(vals**2),
            "fourth_moment": estimate(vals**4),
            "e_dnorm2": estimate(dn),
            "e_dnorm4": estimate(dn**2),
            "dnorm_l2_gap": estimate((dn - f.order) ** 2),
        }
        for row in rows:
            e = mc.get(row["quantity"])
            if e is not None:
                row["mc"], row["mc_stderr"] = e.mean, e.stderr
    meta = {"seed": args.seed, "kernel": args.kernel, "config_hash": kio.config_hash({"kernel": kio.kernel_to_obj(f), "mc": args.mc, "seed": args.seed})}
    notes = ["exact: chaos algebra; mc/mc_stderr: Monte Carlo mean and standard error (empty without --mc)"]
    with _output(args.out) as fh:
        kio.write_csv(fh, ["quantity", "exact", "mc", "mc_stderr"], rows, meta, notes)
    return EXIT_OK


# battery -------------------------------------------------------------------

BATTERY_KEYS = ("family", "order", "kmin", "kmax", "kernel", "mc", "seed", "threshold", "vector")


def _battery_config(args) -> dict:
    cfg = _merge_config(args, "battery", BATTERY_KEYS)
    cfg.setdefault("kmin", 1)
    cfg.setdefault("seed", 0)
    cfg.setdefault("threshold", CB.DEFAULT_EPS)
    cfg.setdefault("mc", 0)
    cfg.setdefault("vector", False)
    family = cfg.get("family")
    if family not in ("tensor-sum", "fixed", "file"):
        raise CliError(f"--family must be one of tensor-sum, fixed, file (got {family!r})", EXIT_CONFIG)
    if not cfg["threshold"] > 0:
        raise CliError(f"threshold eps must be > 0 (got {cfg['threshold']})", EXIT_CONFIG)
    if cfg["mc"] and cfg["mc"] < CB.KS_MIN_SAMPLES:
        raise CliError(f"--mc needs at least {CB.KS_MIN_SAMPLES} samples", EXIT_CONFIG)
    if family == "file":
        if not cfg.get("kernel"):
            raise CliError("--family file needs --kernel PATH (a sequence file)", EXIT_CONFIG)
    else:
        order = cfg.get("order")
        if order is None:
            raise CliError(f"--family {family} needs --order", EXIT_CONFIG)
        if order < 2:
            raise CliError("the fixed-chaos theorem requires order n >= 2", EXIT_CONFIG)
        if cfg.get("kmax") is None:
            raise CliError(f"--family {family} needs --kmax", EXIT_CONFIG)
    if cfg["kmin"] < 1 or (cfg.get("kmax") is not None and cfg["kmax"] < cfg["kmin"]):
        raise CliError("k range must satisfy 1 <= kmin <= kmax", EXIT_CONFIG)
    return cfg


def _battery_items(cfg) -> list:
    """(k, kernel or kernel list) pairs in increasing k."""
    family, vector = cfg["family"], cfg["vector"]
    if family == "file":
        try:
            seq = kio.read_sequence(cfg["kernel"])
        except OSError as exc:
            raise CliError(f"cannot read {cfg['kernel']}: {exc}", EXIT_PARSE) from exc
        kmax = min(cfg.get("kmax") or len(seq), len(seq))
        items = [(k, seq[k - 1]) for k in range(cfg["kmin"], kmax + 1)]
        if any(isinstance(it, list) != vector for _, it in items):
            raise CliError("sequence elements must be kernel lists exactly when --vector is given", EXIT_CONFIG)
        return items
    ks = range(cfg["kmin"], cfg["kmax"] + 1)
    if family == "tensor-sum":
        if vector:
            return [(k, list(CB.alternating_pair(k, cfg["order"]))) for k in ks if k % 2 == 0]
        return [(k, CB.tensor_sum_kernel(k, cfg["order"])) for k in ks]
    if vector:
        raise CliError("--vector is available for the tensor-sum and file families", EXIT_CONFIG)
    f = CB.fixed_kernel(cfg["order"])
    return [(k, f) for k in ks]


def _row_1d(d: CB.Diagnostics1D, max_order: int) -> dict:
    row = {
        "k": d.k,
        "order": d.order,
        "second_moment": d.second_moment,
        "fourth_moment": d.fourth_moment,
        "e_dnorm2": d.e_dnorm2,
        "e_dnorm4": d.e_dnorm4,
        "var_dnorm2": d.var_dnorm2,
        "dnorm_l2_gap": d.dnorm_l2_gap,
        "char_residual": d.char_residual,
        "char_stderr": d.char_stderr,
        "ks_stat": d.ks_stat,
        "ks_p": d.ks_p,
    }
    for l in range(1, max_order):
        row[f"contraction_sq_l{l}"] = d.contraction_norms[l - 1] ** 2 if l <= len(d.contraction_norms) else ""
    for name, value in d.flags.items():
        row[f"flag_{name}"] = value
    return {k: ("" if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()}


def _row_vector(v: CB.VectorDiagnostics) -> dict:
    d = len(v.orders)
    row = {
        "k": v.k,
        "orders": "/".join(map(str, v.orders)),
        "cov_max_dev": float(np.max(np.abs(v.covariance - np.eye(d)))),
        "sum_fourth": v.sum_fourth,
        "sum_fourth_target": 3 * d * d,
        "vd_max_abs": max((abs(x) for x in v.vd_moments.values()), default=0.0),
        "coord_fourth_max_dev": max(abs(c.fourth_moment - 3) for c in v.coordinates),
        "coord_var_dnorm2_max": max(c.var_dnorm2 for c in v.coordinates),
    }
    for (i, j), g in v.gram_offdiag.items():
        row[f"gram_offdiag_{i}_{j}"] = g
        row[f"gram_bound_contraction_{i}_{j}"] = v.gram_bound_contraction[(i, j)]
        row[f"gram_bound_cs_{i}_{j}"] = v.gram_bound_cs[(i, j)]
    for name, value in v.flags.items():
        row[f"flag_{name}"] = value
    return row


def cmd_battery(args) -> int:
    cfg = _battery_config(args)
    items = _battery_items(cfg)
    opts = CB.BatteryOptions(eps=cfg["threshold"], mc_samples=cfg["mc"], seed=cfg["seed"])
    if cfg["vector"]:
        rows = [_row_vector(CB.diagnose_vector(fs, opts, k)) for k, fs in items]
        notes = [
            "gram_offdiag_i_j: E<DF_i,DF_j>^2; bounds: contraction-norm and Cauchy-Schwarz forms",
            "sum_fourth: E[(sum_i F_i)^4], target 3 d^2; vd_max_abs: largest |E[F_i F_j F_k F_l]| over the V_d index set",
        ]
    else:
        diags = [CB.diagnose_fixed_chaos(f, opts, k) for k, f in items]
        max_order = max((d.order for d in diags), default=1)
        rows = [_row_1d(d, max_order) for d in diags]
        notes = [
            "contraction_sq_l: squared norm ||f (x)_l f||^2; dnorm_l2_gap: E[(||DF||^2 - n)^2]",
            "char_residual/char_stderr: worst |E[F e^{itF}] - (it/n) E[e^{itF}||DF||^2]| over t; ks_*: KS test vs N(0,1)",
            f"flag_*: metric within eps = {cfg['threshold']!r} of its Gaussian limit (not a convergence claim)",
        ]
    columns = list(dict.fromkeys(c for r in rows for c in r)) if rows else ["k"]
    meta = {"seed": cfg["seed"], "family": cfg["family"], "config_hash": kio.config_hash(cfg)}
    with _output(args.out) as fh:
        kio.write_csv(fh, columns, rows, meta, notes)
    return EXIT_OK


# fbm -----------------------------------------------------------------------

FBM_KEYS = ("hurst", "kappa", "n", "paths", "horizon", "seed", "ergodic_paths")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) else x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_fbm(args) -> int:
    cfg = _merge_config(args, "fbm", FBM_KEYS)
    hurst = cfg.get("hurst", 0.35)
    if not (isinstance(hurst, (int, float)) and 0 < hurst < 0.5):
        raise CliError(f"the power-variation theorem requires 0 < H < 1/2 (got H = {hurst})", EXIT_HURST)
    ergodic_paths = cfg.pop("ergodic_paths", 500)
    try:
        fc = FB.FbmConfig(
            hurst=float(hurst),
            kappa=int(cfg.get("kappa", 3)),
            n=int(cfg.get("n", 1024)),
            horizon=float(cfg.get("horizon", 1.0)),
            paths=int(cfg.get("paths", 4000)),
            seed=int(cfg.get("seed", 0)),
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    if fc.steps > FB.CHOLESKY_BUDGET:
        raise CliError(f"N = {fc.steps} increments exceed the Cholesky budget {FB.CHOLESKY_BUDGET}", EXIT_CAP)
    if ergodic_paths < 1:
        raise CliError("ergodic_paths must be >= 1", EXIT_CONFIG)
    res = FB.joint_experiment(fc, ergodic_paths=ergodic_paths)
    c = res.constants
    summary = {
        "tool": f"fourthmoment {__version__}",
        "config": {**fc.__dict__, "ergodic_paths": ergodic_paths},
        "config_hash": kio.config_hash({**fc.__dict__, "ergodic_paths": ergodic_paths}),
        "constants": {
            "c_sq_twosided": c.c_sq_twosided,
            "c_sq_onesided": c.c_sq_onesided,
            "c_sq_difference": c.c_sq_gap,
            "sigma_sq_twosided": c.sigma_sq,
            "sigma_sq_onesided": c.sigma_sq_onesided,
            "hermite_coeffs": c.decomp.coeffs,
            "truncation_lag": c.truncation,
            "tail_bound": c.tail_bound,
        },
        **res.summary,
    }
    summary["step2"] = [dict(zip(("s", "t", "mc_ratio", "exact_ratio"), r)) for r in res.summary["step2"]]
    text = json.dumps(_jsonable(summary), indent=1, sort_keys=False) + "\n"
    if args.out:
        rows = [{"path": i, "B_T": float(b), "Z_T": float(z)} for i, (b, z) in enumerate(zip(res.level, res.power_variation))]
        meta = {"seed": fc.seed, "config_hash": summary["config_hash"]}
        with _output(args.out) as fh:
            kio.write_csv(fh, ["path", "B_T", "Z_T"], rows, meta, ["per-path fBm level B_T and power variation Z_T"])
        summary_path = args.summary or str(Path(args.out).with_suffix(".json"))
        Path(summary_path).write_text(text)
    elif args.summary:
        Path(args.summary).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# selfcheck -----------------------------------------------------------------

def cmd_selfcheck(args) -> int:
    try:
        ok, lines = selfcheck.run(seed=args.seed, inject=args.inject)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    report = "\n".join(lines) + "\n"
    failed = [l.split(":")[0][5:] for l in lines if l.startswith("FAIL")]
    report += f"{'OK' if ok else 'FAILED'}: {len(lines) - len(failed)}/{len(lines)} checks passed\n"
    if failed:
        report += "failed: " + ", ".join(failed) + "\n"
    with _output(args.out) as fh:
        fh.write(report)
    return EXIT_OK if ok else EXIT_CHECK


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fourthmoment", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fourthmoment {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("moments", help="exact moments and derivative norms of I_n(f)")
    m.add_argument("--kernel", required=True, help="kernel file (JSON)")
    m.add_argument("--mc", type=int, help="add Monte Carlo cross-checks with N samples")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", help="CSV output path (default stdout)")
    m.set_defaults(func=cmd_moments)

    b = sub.add_parser("battery", help="fourth-moment theorem diagnostics over a kernel family")
    b.add_argument("--config", help="TOML config; flags override its values")
    b.add_argument("--family", choices=("tensor-sum", "fixed", "file"))
    b.add_argument("--order", type=int)
    b.add_argument("--kmin", type=int)
    b.add_argument("--kmax", type=int)
    b.add_argument("--kernel", help="sequence file for --family file")
    b.add_argument("--mc", type=int, help="Monte Carlo samples for the characteristic identity and KS test")
    b.add_argument("--seed", type=int)
    b.add_argument("--threshold", type=float, help="flag level eps (default 1e-2)")
    b.add_argument("--vector", action="store_true", default=None, help="multidimensional diagnostics")
    b.add_argument("--out")
    b.set_defaults(func=cmd_battery)

    f = sub.add_parser("fbm", help="fBm power-variation experiment")
    f.add_argument("--config")
    f.add_argument("--hurst", type=float)
    f.add_argument("--kappa", type=int)
    f.add_argument("--n", type=int)
    f.add_argument("--paths", type=int)
    f.add_argument("--horizon", type=float)
    f.add_argument("--seed", type=int)
    f.add_argument("--ergodic-paths", dest="ergodic_paths", type=int)
    f.add_argument("--out", help="per-path CSV; the summary JSON goes next to it")
    f.add_argument("--summary", help="summary JSON path")
    f.set_defaults(func=cmd_fbm)

    s = sub.add_parser("selfcheck", help="run the invariant suite")
    s.add_argument("--seed", type=int, default=20240607)
    s.add_argument("--inject", help="deliberately break a formula (mutation check), e.g. gram-factorial")
    s.add_argument("--out")
    s.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except kio.KernelFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
