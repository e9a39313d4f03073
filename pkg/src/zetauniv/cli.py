"""Command-line entry point: ``zetauniv <command> --config <path> [options]``.

Exit status is 0 when every asserted budget or criterion of the command
passes, 1 when the run completed but something failed, and 2 on an error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import euler, laplace, scan, verify
from .config import COMMANDS, RunConfig, parse_config
from .errors import ZetaUnivError
from .kernel import KernelTable, inverse_kernel
from .output import ResultSink, emit_results
from .regions import CompactRegion, TargetFunction
from .zeta import ZetaConfig

log = logging.getLogger("zetauniv")
ENV_OUT = "ZETAUNIV_OUT"


@dataclass
class RunResult:
    passed: bool
    results: dict
    records: list = field(default_factory=list)
    table: tuple = ((), [])
    plot: tuple = ((), [])


# ---------------------------------------------------------------------------
# builders


def build_region(cfg: RunConfig) -> CompactRegion:
    r = cfg["region"]
    shape = r["shape"]
    if shape == "segment":
        return CompactRegion.segment(r["a"], r["b"], r["n"])
    if shape == "disk":
        return CompactRegion.disk(r["center"], r["radius"], r["n"], r["rings"])
    if shape == "rectangle":
        return CompactRegion.rectangle(r["x0"], r["x1"], r["y0"], r["y1"], r["n"])
    return CompactRegion.polygon(list(r["vertices"]), r["n"])


def build_kernel(cfg: RunConfig) -> KernelTable:
    k = cfg["kernel"]
    if k["kind"] == "csv":
        return KernelTable.from_csv(k["path"])
    if k["kind"] == "inverse":
        return KernelTable.from_function(inverse_kernel, k["A"], k["B"], k["points"])
    value = complex(k["value"])
    return KernelTable.from_function(lambda x: value / x, k["A"], k["B"], k["points"])


def build_target(cfg: RunConfig, kernel: KernelTable | None = None) -> TargetFunction:
    t = cfg["target"]
    if t["kind"] == "zero":
        return TargetFunction.zero()
    if t["kind"] == "polynomial":
        return TargetFunction.polynomial(t["coefficients"])
    if kernel is None:
        kernel = build_kernel(cfg)
    return TargetFunction.laplace_form(kernel, t["constant"])


def zeta_config(cfg: RunConfig) -> ZetaConfig:
    lim = cfg["limits"]
    return ZetaConfig(height_budget=lim["height_budget"], nthreads=lim["threads"])


def _c(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# commands


def _construct(cfg: RunConfig, extra_checks: bool) -> RunResult:
    c = cfg["construct"]
    lim = cfg["limits"]
    K = build_region(cfg)
    kt = build_kernel(cfg)
    gt = euler.smooth_kernel(kt, cfg.get("kernel", "smoothing_width"), K, c["epsilon"])
    f = build_target(cfg, gt)
    ts = euler.choose_thresholds(c["delta"], kt.A, kt.B, c["C"], c["epsilon"], K,
                                 max_primes=lim["max_primes"], pmax=c["pmax"])
    log.info("thresholds: %s", ts.as_dict())
    rules = ("apdef", "recursive") if c["rule"] == "both" else (c["rule"],)
    zs = K.scaled(ts.delta)
    results = {"thresholds": {k: (_c(v) if isinstance(v, complex) else v)
                              for k, v in ts.as_dict().items()},
               "budget": c["epsilon"] / 7, "smoothing_slack": gt.smoothing_slack}
    records, rows, plot_cols = [], [], {}
    passed = True
    finals = {}
    for rule in rules:
        if rule == "apdef":
            table, ker = euler.assign_coefficients(ts, gt, max_primes=lim["max_primes"]), gt
        else:
            table, ker = euler.assign_coefficients_recursive(ts, kt, max_primes=lim["max_primes"]), kt
        log.info("scanning primes below %.6g for rule %s", ts.P3, rule)
        sums = euler.scan_table(table, ker, zs, lambda_grid=c["lambda_grid"],
                                thr_s=list(c["check_points"]))
        lip = None if c["lipschitz"] < 0 else c["lipschitz"]
        rep = verify.budget_report(table, ker, ts, f, K, sums=sums, lipschitz=lip)
        fin = verify.final_supnorm(table, f, K, ts, c["tail_tol"], sums=sums)
        prof = euler.lambda_profile(table, ker, ts, c["lambda_grid"], sums=sums)
        finals[rule] = fin
        res = {"slacks": rep.slacks, "passes": rep.passes, "final_supnorm": fin,
               "tail_radius": rep.tail_radius, "triangle_bound": rep.triangle_bound,
               "triangle_ok": rep.triangle_ok, "lipschitz": rep.lipschitz,
               "lipschitz_source": rep.details["lipschitz_source"],
               "continuity_margin": rep.continuity_margin,
               "lambda_sup": prof.sup_abs, "C1_estimate": prof.fitted_C1,
               "prime_counts": rep.details["prime_counts"], "pass": rep.passed}
        ok = rep.passed
        if extra_checks:
            resid = {}
            for s in c["check_points"]:
                resid[f"{s.real:g}{s.imag:+g}j"] = verify.partial_integration_check(
                    table, ker, ts, s, sums=sums)
            res["partial_integration"] = resid
            res["partial_integration_ok"] = max(resid.values(), default=0.0) < 10 * c["quad_tol"]
            if c["sample_checks"]:
                p, n, ph = euler.sample_entries(table, c["sample_checks"], cfg.get("run", "seed"))
                again = euler.recompute_phases(table, p, n)
                known = ~np.isnan(again)
                diff = np.abs(np.angle(np.exp(1j * (ph[known] - again[known]))))
                res["sampled_entries"] = int(len(p))
                res["region_rule_max_diff"] = float(diff.max()) if len(diff) else 0.0
                res["unimodular_max_dev"] = float(np.max(np.abs(np.abs(np.exp(1j * ph)) - 1))) if len(ph) else 0.0
                res["region_rule_ok"] = res["region_rule_max_diff"] < 1e-12
            ok = ok and res["partial_integration_ok"] and res.get("region_rule_ok", True)
        results[rule] = res
        passed = passed and ok
        h = sums.h_values()
        fs = f(K.samples)
        for s, hv, fv in zip(K.samples, h, fs):
            records.append({"rule": rule, "s": _c(s), "h": _c(hv), "f": _c(fv),
                            "residual": abs(hv - fv)})
        for row in rep.rows():
            rows.append([rule, row["entry"], row["slack"], row["budget"], row["pass"]])
        plot_cols[rule] = (prof.xs, np.abs(prof.values))
    if len(finals) == 2:
        gap = abs(finals["apdef"] - finals["recursive"])
        results["rule_gap"] = gap
        results["rule_gap_ok"] = gap < 2 * c["epsilon"]
        passed = passed and results["rule_gap_ok"]
    if extra_checks:
        el = verify.elementary_inequalities(1000, cfg.get("run", "seed"))
        results["elementary"] = el
        results["elementary_ok"] = el["log_ratio"] <= 1 and el["exp_ratio"] < 1
        passed = passed and results["elementary_ok"]
        sc = cfg["scan"]
        if 0 < sc["epsilon"] < 1 and sc["C"] != 0:
            sb = verify.constant_shift_budget(f, K, sc["C"], sc["epsilon"])
            results["constant_shift"] = {"C0": sb.C0, "C_ok": sb.C_ok, "ab1_slack": sb.ab1_slack,
                                         "ab1_budget": sb.ab1_budget, "chain": sb.chain_factor}
    results["pass"] = passed
    header = ["x"] + [f"abs_lambda_{r}" for r in plot_cols]
    xs = next(iter(plot_cols.values()))[0]
    plot_rows = [[x] + [plot_cols[r][1][i] for r in plot_cols] for i, x in enumerate(xs)]
    return RunResult(passed, results, records,
                     (["rule", "entry", "slack", "budget", "pass"], rows), (header, plot_rows))


def _density_result(cfg, est: scan.DensityEstimate, extra: dict) -> RunResult:
    mode = cfg.get("output", "records")
    stride = cfg.get("output", "plot_stride")
    hits = est.hits
    records = []
    if mode != "none":
        for t, e, h in zip(est.t.tolist(), est.sup_errors.tolist(), hits.tolist()):
            if mode == "all" or h:
                records.append({"t": t, "sup_error": e, "hit": h})
    results = dict(est.summary())
    results.update(extra)
    passed = est.hit_fraction > 0
    results["pass"] = passed
    runs = [[a, b] for a, b in est.hit_runs]
    plot = [[t, e] for t, e in zip(est.t[::stride].tolist(), est.sup_errors[::stride].tolist())]
    return RunResult(passed, results, records, (["t_start", "t_end"], runs), (["t", "sup_error"], plot))


def _scan2(cfg):
    sc = cfg["scan"]
    K = build_region(cfg)
    f = build_target(cfg)
    est = scan.scan_theorem2(f, K, sc["delta"], sc["epsilon"], sc["T"], sc["step"], zeta_config(cfg))
    return _density_result(cfg, est, {"delta": sc["delta"]})


def _scan1(cfg):
    sc = cfg["scan"]
    K = build_region(cfg)
    f = build_target(cfg)
    extra = {"delta": sc["delta"], "C": _c(sc["C"])}
    if 0 < sc["epsilon"] < 1:
        sb = verify.constant_shift_budget(f, K, sc["C"], sc["epsilon"])
        extra.update({"C0": sb.C0, "C_ok": sb.C_ok, "ab1_slack": sb.ab1_slack,
                      "ab1_budget": sb.ab1_budget})
    est = scan.scan_theorem1(f, K, sc["delta"], sc["C"], sc["epsilon"], sc["T"], sc["step"],
                             zeta_config(cfg))
    return _density_result(cfg, est, extra)


def _extremal(cfg):
    sc = cfg["scan"]
    rec = scan.extremal_window_scan(sc["delta_window"], sc["T"], sc["step"], zeta_config(cfg))
    stride = cfg.get("output", "plot_stride")
    summary = rec.summary()
    plot = [[t, m] for t, m in zip(rec.window_starts[::stride].tolist(), rec.window_max[::stride].tolist())]
    return RunResult(rec.passed, dict(summary, **{"pass": rec.passed}), [summary],
                     (list(summary.keys()), [list(summary.values())]), (["t", "window_max"], plot))


def _laplace_demo(cfg):
    lp = cfg["laplace"]
    K = build_region(cfg)
    if lp["mode"] == "fit":
        f = build_target(cfg)
        approx = laplace.laplace_approximation(f, K, lp["epsilon"], lp["max_degree"], points=lp["points"])
        z = K.samples
        vals = laplace.forward_laplace(approx.truncation.table, z, quad_tol=math.inf)
        fs = f(z)
        records = [{"s": _c(s), "f": _c(a), "approx": _c(b), "error": abs(a - b)}
                   for s, a, b in zip(z, fs, vals)]
        results = {"degree": approx.fit.degree, "eps1": approx.mollified.eps1,
                   "slack_fit": approx.slack_fit, "slack_mollify": approx.slack_mollify,
                   "slack_truncate": approx.slack_truncate, "total_error": approx.total_error,
                   "A": approx.truncation.A, "B": approx.truncation.B, "pass": approx.passed}
        kt = approx.truncation.table
        plot = [[x, abs(g)] for x, g in zip(kt.xs.tolist(), kt.samples.tolist())]
        return RunResult(approx.passed, results, records,
                         (["quantity", "value"], [[k, v] for k, v in results.items()]), (["x", "abs_g"], plot))
    t = cfg["target"]
    coeffs = list(t["coefficients"]) if t["kind"] == "polynomial" else [1.0]
    n = None if lp["order"] < 0 else lp["order"]
    G = laplace.mollify(coeffs, lp["eps1"], K, n=n)
    xs = np.linspace(lp["x_lo"], lp["x_hi"], lp["samples"])
    g = laplace.inverse_laplace(G, 0.0, xs, lp["quad_tol"])
    trunc = laplace.truncate_support(G, K, lp["truncate_tol"], points=lp["points"])
    results = {"order": G.n, "degree": G.degree, "eps1": G.eps1, "A": trunc.A, "B": trunc.B,
               "truncation_error": trunc.error, "table_points": trunc.table.n}
    passed = trunc.error < lp["truncate_tol"]
    if G.degree == 0:
        c0 = complex(G.poly[0])
        exact = c0 * xs ** (G.n - 1) * np.exp(-xs / G.eps1) / (G.eps1 ** G.n * math.factorial(G.n - 1))
        err = float(np.max(np.abs(g - exact)))
        results["closed_form_error"] = err
        results["closed_form_ok"] = err < 1e-6
        passed = passed and err < 1e-6
    results["pass"] = passed
    records = [{"x": x, "g": _c(v)} for x, v in zip(xs.tolist(), g.tolist())]
    plot = [[x, abs(v)] for x, v in zip(xs.tolist(), g.tolist())]
    return RunResult(passed, results, records,
                     (["quantity", "value"], [[k, v] for k, v in results.items()]), (["x", "abs_g"], plot))


def run_pipeline(cfg: RunConfig) -> RunResult:
    cmd = cfg.command
    if cmd == "construct":
        return _construct(cfg, extra_checks=False)
    if cmd == "verify":
        return _construct(cfg, extra_checks=True)
    if cmd == "scan-theorem1":
        return _scan1(cfg)
    if cmd == "scan-theorem2":
        return _scan2(cfg)
    if cmd == "scan-extremal":
        return _extremal(cfg)
    return _laplace_demo(cfg)


def output_dir(cfg: RunConfig, flag: str | None) -> Path:
    if flag:
        return Path(flag)
    if cfg.get("output", "dir"):
        return Path(cfg.get("output", "dir"))
    return Path(os.environ.get(ENV_OUT, "zetauniv-out"))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="zetauniv", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", default=None, help=f"output directory (default: config, then ${ENV_OUT})")
    ap.add_argument("--max-primes", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config.read_text(encoding="utf-8"), command=args.command)
        if args.max_primes is not None:
            cfg = cfg.replace("limits", max_primes=args.max_primes)
        if args.threads is not None:
            cfg = cfg.replace("limits", threads=args.threads)
        out = output_dir(cfg, args.out)
        res = run_pipeline(cfg)
        sink = ResultSink(out)
        emit_results(sink, cfg.emit(), res.results, res.records, res.table, res.plot)
    except ZetaUnivError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: [cli_report] {e}", file=sys.stderr)
        return 2
    print(f"{args.command}: {'PASS' if res.passed else 'FAIL'} -> {sink.summary_path}")
    return 0 if res.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
