"""Command-line front end: ``run``, ``verify`` and ``bounds``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 run-time failure, 4 assumption violation.
"""

import argparse
import datetime
import json
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bound_comparison, corollary1_bound, theorem1_bound
from .bench import ExperimentConfig, run_experiment
from .errors import AssumptionViolated, ConditionFailed, ConfigError, OnlineNewtonError
from .oracles import RegularityConstants
from .verification import SUITES, run_suites

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ASSUMPTION = 4

REGRET_COLUMNS = ("t", "onm_regret_mean", "onm_regret_stderr", "ogd_regret_mean", "ogd_regret_stderr")
TRAJECTORY_COLUMNS = ("t", "replication", "target_x", "target_y", "onm_x", "onm_y", "ogd_x", "ogd_y")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by itself; route it through main() instead
    def error(self, message):
        raise _UsageError(message)


# -- configuration -----------------------------------------------------------------

def bundled_configs():
    """Names of the configurations shipped with the package."""
    folder = resources.files("online_newton") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_config_data(source):
    """Parse a JSON config given as a path or a bundled name (e.g. ``experiment_a``)."""
    path = Path(source)
    try:
        if path.is_file():
            text = path.read_text(encoding="utf-8")
        elif source in bundled_configs():
            text = (resources.files("online_newton") / "configs" / f"{source}.json").read_text(encoding="utf-8")
        else:
            raise ConfigError(f"no config file or bundled config named {source!r} "
                              f"(bundled: {', '.join(bundled_configs())})")
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_experiment(source, seed=None, replications=None):
    config = ExperimentConfig.from_dict(load_config_data(source))
    if seed is not None:
        config = config.with_overrides(master_seed=seed)
    if replications is not None:
        config = config.with_overrides(replications=replications)
    if config.sensors.n != 2:
        raise ConfigError("the localization benchmark is planar: sensors need 2 coordinates")
    return config


# -- serialization -------------------------------------------------------------------

def _fmt(x):
    return "%.17g" % x


def _csv(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    """Plain JSON types with non-finite floats spelled as strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def _json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def regret_csv(report):
    T1 = report.config.T + 1  # rounds 0..T
    cols = {}
    for name in ("ONM", "OGD"):
        if name in report.config.algorithms:
            cols[name] = report.mean_curve(name)
        else:
            cols[name] = (np.full(T1, np.nan), np.full(T1, np.nan))
    rows = []
    for t in range(T1):
        rows.append([str(t), _fmt(cols["ONM"][0][t]), _fmt(cols["ONM"][1][t]),
                     _fmt(cols["OGD"][0][t]), _fmt(cols["OGD"][1][t])])
    return _csv(REGRET_COLUMNS, rows)


def trajectory_csv(report):
    rows = []
    for r in report.complete[: report.config.trajectory_replications]:
        decisions = {name: r.decisions.get(name) for name in ("ONM", "OGD")}
        for t in range(len(r.target_path)):
            row = [str(t), str(r.index), _fmt(r.target_path[t][0]), _fmt(r.target_path[t][1])]
            for name in ("ONM", "OGD"):
                d = decisions[name]
                row += [_fmt(d[t][0]), _fmt(d[t][1])] if d is not None else ["nan", "nan"]
            rows.append(row)
    return _csv(TRAJECTORY_COLUMNS, rows)


def checklist_summary(report):
    """Per-assumption pass counts over the replications that evaluated bounds."""
    counts = {}
    evaluated = 0
    for r in report.complete:
        if r.theorem1 is None:
            continue
        evaluated += 1
        for key, ok in r.theorem1.checklist.items():
            counts[key] = counts.get(key, 0) + int(bool(ok))
    return {
        "evaluated": evaluated,
        "passed": counts,
        "all_passed": evaluated > 0 and all(v == evaluated for v in counts.values()),
    }


def run_summary(report, source):
    summary = report.summary()
    summary["assumption_checklist"] = checklist_summary(report)
    summary["manifest"] = {
        "config_source": str(source),
        "config": report.config.to_dict(),
        "master_seed": report.config.master_seed,
        "tool_version": __version__,
    }
    return summary


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (datetime.datetime.fromtimestamp(int(epoch), datetime.timezone.utc) if epoch
            else datetime.datetime.now(datetime.timezone.utc))
    return when.replace(microsecond=0).isoformat()


def _write_outputs(out, files):
    """Write every file or none: stage in a temporary directory, then move."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out, prefix=".staging-") as stage:
        for name, text in files.items():
            with open(Path(stage) / name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for name in files:
            os.replace(Path(stage) / name, out / name)


# -- commands ------------------------------------------------------------------------

def cmd_run(args):
    config = load_experiment(args.config, args.seed, args.replications)
    report = run_experiment(config, threads=args.threads)
    if not report.complete:
        first = report.partial[0] if report.partial else None
        raise OnlineNewtonError("all replications failed" + (f"; first error: {first.error}" if first else ""))
    summary = run_summary(report, args.config)
    manifest = dict(summary["manifest"], timestamp=_timestamp(), output_directory=str(Path(args.out).resolve()))
    files = {
        "regret.csv": regret_csv(report),
        "trajectory.csv": trajectory_csv(report),
        "summary.json": _json(summary),
        "manifest.json": _json(manifest),
    }
    _write_outputs(args.out, files)
    algos = summary["algorithms"]
    print(f"{config.name}: {len(report.complete)}/{len(report.replications)} replications complete, "
          f"T={config.T}")
    for name, stats in algos.items():
        print(f"  {name}: final regret mean {stats['final_regret_mean']:.6g} "
              f"(stderr {stats['final_regret_stderr']:.3g}), "
              f"final distance mean {stats['final_distance_mean']:.3g}")
    print(f"  outputs written to {args.out}")
    return EXIT_OK


def cmd_verify(args):
    names = list(args.suites) or ["all"]
    seed = args.seed
    options = {}
    if args.config:
        data = load_config_data(args.config)
        if not isinstance(data, dict) or set(data) - {"suites", "seed", "options"}:
            raise ConfigError("verify config takes the keys 'suites', 'seed' and 'options'")
        if not args.suites:
            names = list(data.get("suites", names))
        if seed is None:
            seed = data.get("seed")
        options = data.get("options", {})
    bad = [n for n in names if n != "all" and n not in SUITES]
    if bad:
        raise ConfigError(f"unknown suites {bad}; choose from {sorted(SUITES)} or 'all'")
    try:
        results = run_suites(tuple(names), seed=0 if seed is None else seed, options=options)
    except TypeError as exc:
        raise ConfigError(f"bad suite options: {exc}") from exc
    for r in results:
        print(r.line())
        if r.suite == "lemma4" and "grid" in r.details:
            for row in r.details["grid"]:
                print(f"    4cv={row['four_cv']:<5} c={row['c']:<4} x_lower={row['x_lower']:.12g} "
                      f"x_upper={row['x_upper']:.12g} iterations<={row['max_iterations']}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    if args.out:
        _write_outputs(args.out, {"verify.json": _json([r.as_dict() for r in results])})
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


_EXPLICIT = ("h", "L", "ell", "beta", "gamma", "v_bar", "V_bar", "e0", "eT", "V_T")


def cmd_bounds(args):
    explicit = {k: getattr(args, k) for k in _EXPLICIT if getattr(args, k) is not None}
    if args.config and explicit:
        raise ConfigError("give either --config or explicit constants, not both")
    if args.config:
        reports = _bounds_from_config(args)
    else:
        missing = [k for k in ("h", "L", "ell", "beta") if k not in explicit]
        if missing:
            raise ConfigError(f"missing constants: {', '.join('--' + m for m in missing)}")
        try:
            k = RegularityConstants(h=explicit["h"], L=explicit["L"], beta=explicit["beta"],
                                    ell=explicit["ell"], v_bar=explicit.get("v_bar", 0.0),
                                    V_bar=explicit.get("V_bar", explicit.get("V_T", 0.0)),
                                    gamma=explicit.get("gamma"))
        except ValueError as exc:
            raise AssumptionViolated([_name_assumption(str(exc))]) from exc
        V_T = explicit.get("V_T", k.V_bar)
        reports = [_bounds_report(k, V_T, explicit.get("e0", 0.0), explicit.get("eT", 0.0))]
    if args.json:
        print(_json(reports if args.config else reports[0]), end="")
    else:
        for rep in reports:
            _print_bounds(rep)
    return EXIT_OK


def _name_assumption(message):
    for key, label in (("h ", "assumption 1"), ("beta", "assumption 2"), ("L ", "assumption 2"),
                       ("gamma", "assumption 3"), ("ell", "assumption 5")):
        if message.startswith(key.strip()):
            return f"{label}: {message}"
    return message


def _bounds_report(k, V_T, e0, eT, extra=None):
    th = theorem1_bound(k, V_T, e0, eT)
    rep = {
        "constants": {"h": k.h, "L": k.L, "beta": k.beta, "ell": k.ell, "gamma": k.gamma,
                      "v_bar": k.v_bar, "V_bar": k.V_bar},
        "inputs": {"V_T": V_T, "e0": e0, "eT": eT},
        "theorem1": {"bound": th.bound, "delta": th.delta, "factor": th.factor},
        "checklist": dict(th.checklist),
        "assumptions_hold": th.assumptions_hold,
    }
    try:
        co = corollary1_bound(k, e0)
        rep["corollary1"] = {"bound": co.bound, "E_lower": co.E_lower, "E_upper": co.E_upper,
                             "checklist": co.checklist}
        rep["comparison"] = bound_comparison(k, V_T, e0, eT).as_dict()
    except ConditionFailed as exc:
        rep["corollary1"] = {"error": str(exc)}
    if extra:
        rep.update(extra)
    return rep


def _bounds_from_config(args):
    config = load_experiment(args.config, args.seed, args.replications or 1)
    report = run_experiment(config, threads=args.threads)
    out = []
    for r in report.replications:
        if r.constants is None:
            raise OnlineNewtonError(f"replication {r.index}: bounds unavailable ({r.error or r.bounds_error})")
        led = r.ledgers["ONM"]
        out.append(_bounds_report(r.constants, led.V_T, led.e0, led.eT,
                                  {"replication": r.index, "realized_regret": led.regret,
                                   "estimation": r.constants.meta}))
    return out


def _print_bounds(rep):
    head = f"replication {rep['replication']}: " if "replication" in rep else ""
    k = rep["constants"]
    print(f"{head}h={k['h']:.6g} L={k['L']:.6g} beta={k['beta']:.6g} ell={k['ell']:.6g} "
          f"gamma={k['gamma']:.6g} v_bar={k['v_bar']:.6g} V_bar={k['V_bar']:.6g}")
    th = rep["theorem1"]
    print(f"  theorem1 bound = {th['bound']:.12g} (delta={th['delta']:.6g}, factor={th['factor']:.6g})")
    for key, ok in rep["checklist"].items():
        print(f"    [{'ok' if ok else 'FAIL'}] {key}")
    co = rep["corollary1"]
    if "error" in co:
        print(f"  corollary1 not evaluable: {co['error']}")
    else:
        print(f"  corollary1 bound = {co['bound']:.12g} (E_lower={co['E_lower']:.6g}, "
              f"E_upper={co['E_upper']:.6g})")
        cmp_ = rep["comparison"]
        ybar = "none" if cmp_["ybar"] is None else f"{cmp_['ybar']:.6g}"
        print(f"  smaller bound: {cmp_['smaller']}; tightness holds on "
              f"{100 * cmp_['tightness_fraction']:.0f}% of the y grid; ybar={ybar}")
    if "realized_regret" in rep:
        print(f"  realized ONM regret = {rep['realized_regret']:.12g}")


# -- entry point ---------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="online-newton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required,
                       help="JSON config path or bundled name (" + ", ".join(bundled_configs()) + ")")
        p.add_argument("--seed", type=_u64, help="master seed override (unsigned 64-bit)")
        p.add_argument("--replications", type=_positive_int, help="replication count override")
        p.add_argument("--threads", type=_non_negative_int, default=1,
                       help="worker processes (0 = one per CPU)")

    run = sub.add_parser("run", help="run a localization experiment and write CSV/JSON outputs")
    common(run, config_required=True)
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the randomized property suites")
    ver.add_argument("suites", nargs="*",
                     help=f"suites to run: {', '.join(SUITES)} or all (default)")
    ver.add_argument("--config", help="JSON with optional 'suites', 'seed' and per-suite 'options'")
    ver.add_argument("--seed", type=_u64)
    ver.add_argument("--out", help="also write verify.json into this directory")
    ver.set_defaults(func=cmd_verify)

    bnd = sub.add_parser("bounds", help="evaluate the regret bounds")
    common(bnd)
    for name in _EXPLICIT:
        bnd.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    bnd.add_argument("--json", action="store_true", help="print the report as JSON instead of text")
    bnd.set_defaults(func=cmd_bounds)
    return parser


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"online-newton: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"online-newton: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolated as exc:
        print(f"online-newton: assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (OnlineNewtonError, ArithmeticError, OSError) as exc:
        print(f"online-newton: run-time failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
