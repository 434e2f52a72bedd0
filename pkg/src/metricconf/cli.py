"""Command-line interface.

Every command resolves its options into a plain ``config`` dict, embeds it in
the JSON report, and computes the report from that dict alone, so
``metricconf replay report.json`` reproduces a report byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from pathlib import Path

from . import __version__
from .ci import CI_METHODS, confidence_interval
from .correl import Coefficient, CorrelationSpec, Level, correlation
from .hypo import TEST_METHODS, TIE_POLICIES, TIE_TOL, bonferroni_reject, run_test
from .report import PLOT_KINDS, dumps, emit_plot_data, load_report
from .scores import POLICIES, ScoreError, build_score_set, load_scores
from .sim import SyntheticWorld, coverage_simulation, generate_world, power_simulation

SEED_ENV = "METRICCONF_SEED"
LEVELS = [lv.value for lv in Level]
COEFS = [c.value for c in Coefficient]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# --- data loading --------------------------------------------------------------

def _file_digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(cfg: dict, metrics: list[str]):
    try:
        records = load_scores(cfg["scores"], cfg["format"])
    except OSError as exc:
        raise DataError(f"cannot read {cfg['scores']}: {exc}") from None
    known = {r.metric_name for r in records}
    unknown = [m for m in metrics if m not in known]
    if cfg["truth"] not in known:
        raise UsageError(f"ground-truth metric {cfg['truth']!r} not found in {cfg['scores']}")
    if unknown:
        raise UsageError(f"unknown metric(s): {', '.join(unknown)}; available: {', '.join(sorted(known))}")
    return build_score_set(records, metrics, cfg["missing"])


def _metric_list(cfg: dict) -> list[str]:
    if cfg.get("metrics"):
        return list(cfg["metrics"])
    records = load_scores(cfg["scores"], cfg["format"])
    names = []
    for r in records:
        if r.metric_name != cfg["truth"] and r.metric_name not in names:
            names.append(r.metric_name)
    return sorted(names)


def _pair_from_config(cfg: dict):
    """(X, Z) for the sim commands: a scored metric vs truth, or a synthetic world."""
    if cfg.get("synthetic"):
        X, Z = generate_world(SyntheticWorld(**cfg["synthetic"]))
        return X, Z
    ss = _load(cfg, [cfg["metric"], cfg["truth"]])
    return ss[cfg["metric"]], ss[cfg["truth"]]


def _header(command: str, cfg: dict) -> dict:
    return {"tool": "metricconf", "version": __version__, "command": command, "config": cfg}


# --- commands ------------------------------------------------------------------

def cmd_corr(cfg: dict, workers: int = 1) -> dict:
    metrics = _metric_list(cfg)
    ss = _load(cfg, metrics + [cfg["truth"]])
    Z = ss[cfg["truth"]]
    rows = []
    for m in metrics:
        for level in cfg["levels"]:
            for coef in cfg["coefficients"]:
                res = correlation(ss[m], Z, CorrelationSpec(level, coef))
                rows.append({"metric": m, "level": level, "coefficient": coef,
                             "value": res.value, "skipped_inputs": res.skipped_inputs})
    out = _header("corr", cfg)
    out["shape"] = {"systems": len(ss.systems), "inputs": len(ss.inputs)}
    out["correlations"] = rows
    return out


def cmd_ci(cfg: dict, workers: int = 1) -> dict:
    metrics = _metric_list(cfg)
    ss = _load(cfg, metrics + [cfg["truth"]])
    Z = ss[cfg["truth"]]
    rows = []
    for m in metrics:
        for level in cfg["levels"]:
            spec = CorrelationSpec(level, cfg["coefficient"])
            row = {"metric": m, "level": level, "coefficient": spec.coefficient.value}
            try:
                ci = confidence_interval(ss[m], Z, cfg["ci_method"], spec, cfg["alpha"],
                                         cfg["resamples"], cfg["seed"], workers)
            except ValueError as exc:
                row.update(point=None, lower=None, upper=None, error=str(exc))
            else:
                row.update(point=ci.point, lower=ci.lower, upper=ci.upper, method=ci.method,
                           alpha=ci.alpha, resamples=ci.resamples, seed=ci.seed,
                           degenerate_resamples=ci.degenerate_resamples)
            rows.append(row)
    out = _header("ci", cfg)
    out["shape"] = {"systems": len(ss.systems), "inputs": len(ss.inputs)}
    out["intervals"] = rows
    return out


def _test_row(res) -> dict:
    return {
        "p_value": res.p_value, "delta": res.delta, "method": res.method,
        "resamples": res.resamples, "seed": res.seed, "tie_policy": res.tie_policy,
        "degenerate_resamples": res.degenerate_resamples, "experimental": res.experimental,
    }


def cmd_test(cfg: dict, workers: int = 1) -> dict:
    ss = _load(cfg, list(dict.fromkeys([cfg["x"], cfg["y"], cfg["truth"]])))
    spec = CorrelationSpec(cfg["level"], cfg["coefficient"])
    try:
        res = run_test(ss[cfg["x"]], ss[cfg["y"]], ss[cfg["truth"]], cfg["test"], spec,
                       cfg["resamples"], cfg["seed"], cfg["tie_policy"], cfg["boot_method"], workers)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    warnings = []
    if res.tie_policy == "strict" and abs(res.delta) <= TIE_TOL:
        warnings.append(
            "observed delta is 0: under the strict tie policy resamples equal to the observed "
            "delta never count, so p can be 0 without any evidence; rerun with --tie-policy inclusive"
        )
    if res.experimental:
        warnings.append("Williams' test on averaged summary-level correlations is experimental")
    out = _header("test", cfg)
    out["test"] = {"x": cfg["x"], "y": cfg["y"], "level": spec.level.value,
                   "coefficient": spec.coefficient.value, **_test_row(res),
                   "significant": res.p_value < cfg["alpha"]}
    out["warnings"] = warnings
    return out


def cmd_compare(cfg: dict, workers: int = 1) -> dict:
    metrics = _metric_list(cfg)
    if len(metrics) < 2:
        raise UsageError("compare needs at least two metrics besides the ground truth")
    ss = _load(cfg, metrics + [cfg["truth"]])
    Z = ss[cfg["truth"]]
    K = len(metrics)
    flat_p, where, errors = [], [], []
    tables = {}
    for level in cfg["levels"]:
        spec = CorrelationSpec(level, cfg["coefficient"])
        p = [[None] * K for _ in range(K)]
        delta = [[None] * K for _ in range(K)]
        for i, mx in enumerate(metrics):
            for j, my in enumerate(metrics):
                if i == j:
                    continue
                try:
                    res = run_test(ss[mx], ss[my], Z, cfg["test"], spec, cfg["resamples"],
                                   cfg["seed"], cfg["tie_policy"], cfg["boot_method"], workers)
                except ValueError as exc:
                    errors.append({"level": level, "x": mx, "y": my, "error": str(exc)})
                    continue
                p[i][j], delta[i][j] = res.p_value, res.delta
                flat_p.append(res.p_value)
                where.append((level, i, j))
        tables[level] = {"p_values": p, "delta": delta}

    if cfg["correct_by"] == "metric":
        key = lambda w: (w[0], w[1])   # noqa: E731  one family per (level, row metric)
    else:
        key = lambda w: w[0]           # noqa: E731  one family per (dataset, level)
    families: dict = {}
    for idx, w in enumerate(where):
        families.setdefault(key(w), []).append(idx)
    groups = list(families.values())
    flags = bonferroni_reject(flat_p, cfg["alpha"], groups)
    sizes = {i: len(g) for g in groups for i in g}

    for level, tab in tables.items():
        tab["raw_significant"] = [[None] * K for _ in range(K)]
        tab["corrected_significant"] = [[None] * K for _ in range(K)]
        tab["family_size"] = [[None] * K for _ in range(K)]
    for idx, (level, i, j) in enumerate(where):
        tab = tables[level]
        tab["raw_significant"][i][j], tab["corrected_significant"][i][j] = flags[idx]
        tab["family_size"][i][j] = sizes[idx]

    out = _header("compare", cfg)
    out["pairwise"] = {"dataset": Path(cfg["scores"]).stem, "metrics": metrics,
                       "test": cfg["test"], "alpha": cfg["alpha"],
                       "correct_by": cfg["correct_by"], "levels": tables, "errors": errors}
    return out


def cmd_sim_coverage(cfg: dict, workers: int = 1) -> dict:
    X, Z = _pair_from_config(cfg)
    reports = []
    for level in cfg["levels"]:
        spec = CorrelationSpec(level, cfg["coefficient"])
        for method in cfg["ci_methods"]:
            try:
                rep = coverage_simulation(X, Z, method, spec, cfg["trials"], cfg["alpha"],
                                          cfg["resamples"], cfg["seed"], workers, cfg["max_retries"])
            except RuntimeError as exc:
                raise DataError(str(exc)) from None
            reports.append({
                "ci_method": method, "level": level, "coefficient": spec.coefficient.value,
                "trials": rep.trials, "contained": rep.contained, "proportion": rep.proportion,
                "retries": rep.retries,
                "records": [[r.lower, r.upper, r.held_out] for r in rep.records],
            })
    out = _header("sim-coverage", cfg)
    out["coverage"] = reports
    return out


def cmd_sim_power(cfg: dict, workers: int = 1) -> dict:
    X, Z = _pair_from_config(cfg)
    curves = []
    for level in cfg["levels"]:
        spec = CorrelationSpec(level, cfg["coefficient"])
        try:
            res = power_simulation(X, Z, cfg["k_percent"], cfg["tests"], spec, cfg["trials"],
                                   cfg["alpha"], cfg["resamples"], cfg["seed"], workers, cfg["tie_policy"])
        except ValueError as exc:
            raise DataError(str(exc)) from None
        for c in res:
            curves.append({"test": c.test, "level": c.level, "coefficient": c.coefficient,
                           "trials": c.trials, "k_percent": c.k_percent,
                           "rejections": c.rejections, "power": c.power})
    out = _header("sim-power", cfg)
    out["power"] = curves
    return out


COMMANDS = {
    "corr": cmd_corr, "ci": cmd_ci, "test": cmd_test, "compare": cmd_compare,
    "sim-coverage": cmd_sim_coverage, "sim-power": cmd_sim_power,
}


# --- argument parsing ------------------------------------------------------------

def _data_args(p, *, need_truth=True):
    p.add_argument("--scores", help="JSONL or CSV score file")
    p.add_argument("--format", choices=["jsonl", "csv"], help="score file format (default: by extension)")
    p.add_argument("--truth", required=need_truth, help="ground-truth metric name (e.g. human scores)")
    p.add_argument("--missing", choices=POLICIES, default="strict", help="missing-cell policy")


def _run_args(p, *, resamples=1000):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--resamples", type=int, default=resamples)
    p.add_argument("--seed", type=int, help=f"random seed (default: ${SEED_ENV}, else 0)")


def _out_args(p):
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (results do not depend on it)")


def _world_args(p):
    g = p.add_argument_group("synthetic world (instead of --scores)")
    g.add_argument("--synthetic", action="store_true")
    g.add_argument("--n-systems", type=int, default=20)
    g.add_argument("--n-inputs", type=int, default=40)
    g.add_argument("--system-sd", type=float, default=1.0)
    g.add_argument("--input-sd", type=float, default=1.0)
    g.add_argument("--noise-sd", type=float, default=2.0)
    g.add_argument("--lam", type=float, default=0.6)
    g.add_argument("--world-seed", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metricconf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"metricconf {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("corr", help="system/summary correlations of each metric with the truth")
    _data_args(p)
    p.add_argument("--metrics", nargs="+")
    p.add_argument("--level", action="append", choices=LEVELS)
    p.add_argument("--coef", action="append", choices=COEFS)
    _out_args(p)

    p = sub.add_parser("ci", help="confidence intervals per metric")
    _data_args(p)
    p.add_argument("--metrics", nargs="+")
    p.add_argument("--level", action="append", choices=LEVELS)
    p.add_argument("--coef", choices=COEFS, default="pearson")
    p.add_argument("--ci-method", choices=CI_METHODS, default="boot-both")
    _run_args(p)
    _out_args(p)
    p.add_argument("--forest", help="also write forest-plot CSV here")
    p.add_argument("--svg", help="also write a static SVG forest plot here")

    for name, help_ in (("test", "test whether metric X correlates better with the truth than Y"),
                        ("compare", "pairwise tests between all metrics with Bonferroni correction")):
        p = sub.add_parser(name, help=help_)
        _data_args(p)
        if name == "test":
            p.add_argument("--x", required=True)
            p.add_argument("--y", required=True)
            p.add_argument("--level", choices=LEVELS, default="sys")
        else:
            p.add_argument("--metrics", nargs="+")
            p.add_argument("--level", action="append", choices=LEVELS)
            p.add_argument("--correct-by", choices=["metric", "dataset-level"], default="metric")
            p.add_argument("--pairwise", help="also write pairwise p-value CSV here")
        p.add_argument("--coef", choices=COEFS, default="pearson")
        p.add_argument("--test", choices=TEST_METHODS, default="perm-both")
        p.add_argument("--tie-policy", choices=TIE_POLICIES, default="strict")
        p.add_argument("--boot-method", choices=[m for m in CI_METHODS if m != "fisher"],
                       default="boot-both", help="resampling scheme for --test paired-boot")
        _run_args(p)
        _out_args(p)

    p = sub.add_parser("sim-coverage", help="held-out coverage of CI methods")
    _data_args(p, need_truth=False)
    p.add_argument("--metric")
    p.add_argument("--ci-method", action="append", choices=CI_METHODS)
    p.add_argument("--level", action="append", choices=LEVELS)
    p.add_argument("--coef", choices=COEFS, default="pearson")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-retries", type=int, default=10)
    _run_args(p)
    _world_args(p)
    _out_args(p)

    p = sub.add_parser("sim-power", help="power of tests against degraded copies of a metric")
    _data_args(p, need_truth=False)
    p.add_argument("--metric")
    p.add_argument("--test", action="append", choices=TEST_METHODS)
    p.add_argument("--k-percent", default="0,25,50,75,100",
                   help="comma-separated degradation levels (percent of the metric kept)")
    p.add_argument("--level", action="append", choices=LEVELS)
    p.add_argument("--coef", choices=COEFS, default="pearson")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="inclusive")
    _run_args(p, resamples=500)
    _world_args(p)
    _out_args(p)
    p.add_argument("--power-curve", help="also write power-curve CSV here")

    p = sub.add_parser("plot", help="write plot data from a saved report")
    p.add_argument("report")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="forest only: also write an SVG")

    p = sub.add_parser("replay", help="recompute a report from its embedded config")
    p.add_argument("report")
    _out_args(p)
    return parser


def _resolve_seed(seed):
    if seed is not None:
        value = seed
    elif os.environ.get(SEED_ENV, "").strip():
        try:
            value = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer") from None
    else:
        value = 0
    if not 0 <= value < 2 ** 64:
        raise UsageError("seed must be an unsigned 64-bit integer")
    return value


def resolve_config(args) -> dict:
    """Turn parsed arguments into the explicit config that gets embedded in the report."""
    cmd = args.cmd
    cfg: dict = {}
    if cmd in ("sim-coverage", "sim-power") and args.synthetic:
        if args.scores:
            raise UsageError("--synthetic and --scores are mutually exclusive")
        cfg["synthetic"] = {
            "n_systems": args.n_systems, "n_inputs": args.n_inputs, "system_sd": args.system_sd,
            "input_sd": args.input_sd, "noise_sd": args.noise_sd, "lam": args.lam,
            "seed": args.world_seed,
        }
        try:
            SyntheticWorld(**cfg["synthetic"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        if not args.scores:
            raise UsageError("--scores is required" + (" (or --synthetic)" if cmd.startswith("sim") else ""))
        fmt = args.format or ("csv" if args.scores.lower().endswith(".csv") else "jsonl")
        cfg.update(scores=args.scores, scores_sha256=None, format=fmt, truth=args.truth,
                   missing=args.missing)
        if cmd.startswith("sim"):
            if not args.truth or not args.metric:
                raise UsageError("--truth and --metric are required with --scores")
            if args.metric == args.truth:
                raise UsageError("--metric and --truth must differ")
            cfg["metric"] = args.metric

    if hasattr(args, "metrics"):
        if args.metrics and args.truth in args.metrics:
            raise UsageError("the ground-truth metric cannot also be listed in --metrics")
        cfg["metrics"] = args.metrics
    if cmd == "corr":
        cfg["levels"] = args.level or LEVELS
        cfg["coefficients"] = args.coef or COEFS
        return cfg

    cfg.update(alpha=args.alpha, resamples=args.resamples, seed=_resolve_seed(args.seed))
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must be in (0, 1)")
    if args.resamples < 100:
        raise UsageError("--resamples must be at least 100")
    cfg["coefficient"] = args.coef
    if cmd == "ci":
        cfg["levels"] = args.level or LEVELS
        cfg["ci_method"] = args.ci_method
    elif cmd in ("test", "compare"):
        cfg.update(test=args.test, tie_policy=args.tie_policy, boot_method=args.boot_method)
        if cmd == "test":
            cfg.update(x=args.x, y=args.y, level=args.level)
            if args.truth in (args.x, args.y):
                raise UsageError("--x/--y must differ from --truth")
        else:
            cfg.update(levels=args.level or LEVELS, correct_by=args.correct_by)
    elif cmd == "sim-coverage":
        cfg.update(levels=args.level or LEVELS, ci_methods=args.ci_method or list(CI_METHODS),
                   trials=args.trials, max_retries=args.max_retries)
        if args.trials < 1:
            raise UsageError("--trials must be positive")
    elif cmd == "sim-power":
        try:
            levels = [float(v) for v in args.k_percent.split(",") if v.strip()]
        except ValueError:
            raise UsageError("--k-percent must be comma-separated numbers") from None
        if not levels or any(not 0 <= v <= 100 for v in levels):
            raise UsageError("--k-percent levels must lie in [0, 100]")
        cfg.update(levels=args.level or LEVELS, tests=args.test or ["perm-both", "paired-boot", "williams"],
                   k_percent=levels, trials=args.trials, tie_policy=args.tie_policy)
        if args.trials < 1:
            raise UsageError("--trials must be positive")
    return cfg


def run(cmd: str, cfg: dict, workers: int = 1) -> dict:
    if cfg.get("scores"):
        try:
            cfg["scores_sha256"] = _file_digest(cfg["scores"])
        except OSError as exc:
            raise DataError(f"cannot read {cfg['scores']}: {exc}") from None
    return COMMANDS[cmd](cfg, workers)


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _print_summary(report: dict) -> None:
    """Short human-readable digest on stderr (stdout may carry the JSON)."""
    for w in report.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    if "correlations" in report:
        for r in report["correlations"]:
            v = "undefined" if r["value"] is None or (isinstance(r["value"], float) and math.isnan(r["value"])) \
                else f"{r['value']:+.4f}"
            print(f"{r['metric']:<24} {r['level']:<4} {r['coefficient']:<9} {v}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.cmd == "plot":
            report = load_report(args.report)
            try:
                emit_plot_data(report, args.kind, args.out, args.svg)
            except KeyError as exc:
                raise UsageError(exc.args[0]) from None
            return 0
        if args.cmd == "replay":
            old = load_report(args.report)
            cmd, cfg = old["command"], old["config"]
            if cmd not in COMMANDS:
                raise UsageError(f"report command {cmd!r} cannot be replayed")
            recorded = cfg.get("scores_sha256")
            report = run(cmd, cfg, args.workers)
            if recorded and report["config"]["scores_sha256"] != recorded:
                raise DataError(f"{cfg['scores']} has changed since the report was written")
            _emit(dumps(report), args.out)
            return 0

        if args.workers < 1:
            raise UsageError("--workers must be positive")
        cfg = resolve_config(args)
        report = run(args.cmd, cfg, args.workers)
        _emit(dumps(report), args.out)
        _print_summary(report)
        if args.cmd == "ci" and (args.forest or args.svg):
            forest = args.forest or str(Path(args.svg).with_suffix(".csv"))
            emit_plot_data(report, "forest", forest, args.svg)
        if args.cmd == "compare" and args.pairwise:
            emit_plot_data(report, "pairwise", args.pairwise)
        if args.cmd == "sim-power" and args.power_curve:
            emit_plot_data(report, "power-curve", args.power_curve)
        return 0
    except UsageError as exc:
        print(f"metricconf: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ScoreError, ValueError, OSError) as exc:
        print(f"metricconf: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
