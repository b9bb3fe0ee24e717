"""Command-line front end.

Subcommands:

* ``test``      run the per-level tests and both combined procedures on a CSV
* ``estimate``  per-level descriptive estimates (cure rate, endpoint density, ...)
* ``simulate``  Monte Carlo rejection rates over simulation cases

Exit codes: 0 success, 2 configuration or data error, 3 unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bootstrap import BootstrapConfig
from .exceptions import ConfigError, CureFollowUpError
from .monotone import (
    BANDWIDTH_CAP,
    BOOT_BANDWIDTH_EXPONENT,
    STAT_BANDWIDTH_EXPONENT,
    fit_level,
    majorant_of,
)
from .procedures import TestConfig, TestReport, run_tests
from .simulation import CaseSpec, make_setting, results_to_csv, run_grid
from .survival import SurvivalDataset, partition, summarize

logger = logging.getLogger("curefollowup")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
DEFAULT_SEED = 20240101


class ParseError(CureFollowUpError):
    """Input file could not be read as the expected CSV/JSON."""


class _Parser(argparse.ArgumentParser):
    # argparse already exits with 2 on bad flags; keep that, but route through our handler
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


@dataclass(frozen=True)
class RunManifest:
    command: str
    params: dict
    input_sha256: str | None
    version: str = __version__

    def to_dict(self):
        return {"command": self.command, "params": self.params,
                "input_sha256": self.input_sha256, "version": self.version}


# ---------------------------------------------------------------- input


def _split_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _float_list(text, name):
    try:
        return [float(v) for v in _split_list(text)]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers") from None


def read_dataset(path, time_col, event_col, covariate_cols):
    """Load a CSV into a SurvivalDataset. Returns (dataset, sha256 of the file bytes)."""
    try:
        raw = Path(path).read_bytes()
        text = raw.decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        rows = list(csv.DictReader(io.StringIO(text)))
    except csv.Error as exc:
        raise ParseError(f"malformed CSV {path}: {exc}") from None
    if not rows:
        raise ParseError(f"{path} has no data rows")
    header = set(rows[0])
    missing = [c for c in [time_col, event_col, *covariate_cols] if c not in header]
    if missing:
        raise ConfigError(f"columns not found in {path}: {', '.join(missing)}")
    time, event, cov = [], [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            t = float(row[time_col])
            e = float(row[event_col])
        except (TypeError, ValueError):
            raise ParseError(f"{path}:{lineno}: time/event value is not a number") from None
        if e not in (0.0, 1.0):
            raise ConfigError(f"{path}:{lineno}: event must be 0 or 1, got {row[event_col]!r}")
        time.append(t)
        event.append(int(e))
        cov.append([row[c] if row[c] is not None else "" for c in covariate_cols])
    if not covariate_cols:
        cov = [["all"] for _ in rows]
    ds = SurvivalDataset.from_covariates(time, event, cov)
    return ds, hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------- output


def dumps(obj):
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _write(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def plot_data_csv(dataset: SurvivalDataset, a_x):
    """Long-format KME and LCM curves per level (columns level,label,curve,t,value)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "label", "curve", "t", "value"])
    groups = partition(dataset)
    for lev in sorted(groups):
        idx = groups[lev]
        fit = fit_level(dataset.time[idx], dataset.event[idx], a_x)
        lab = dataset.labels[lev]
        w.writerow([lev, lab, "kme", repr(0.0), repr(0.0)])
        for t, v in zip(fit.F_hat.jump_times, fit.F_hat.values):
            w.writerow([lev, lab, "kme", repr(float(t)), repr(float(v))])
        w.writerow([lev, lab, "kme", repr(fit.y_max), repr(fit.F_at_ymax)])
        maj = majorant_of(fit.F_hat, a_x, fit.y_max)
        for t, v in zip(maj.knots, maj.knot_values):
            w.writerow([lev, lab, "lcm", repr(float(t)), repr(float(v))])
    return buf.getvalue()


def report_document(report: TestReport, manifest: RunManifest):
    return {"manifest": manifest.to_dict(), "report": report.to_dict()}


def parse_report_document(text):
    """Inverse of the ``test`` output: (TestReport, manifest dict)."""
    doc = json.loads(text)
    return TestReport.from_dict(doc["report"]), doc["manifest"]


# ---------------------------------------------------------------- commands


def _bandwidth_rule():
    return {"stat_exponent": STAT_BANDWIDTH_EXPONENT, "boot_exponent": BOOT_BANDWIDTH_EXPONENT,
            "cap": BANDWIDTH_CAP}


def cmd_test(args):
    covs = _split_list(args.covariate_cols)
    dataset, digest = read_dataset(args.input, args.time_col, args.event_col, covs)
    config = TestConfig(
        epsilon=args.epsilon, tau=args.tau, alpha=args.alpha, gamma=args.gamma, a_x=args.ax,
        bootstrap=BootstrapConfig(args.bootstrap, args.seed, args.grid_size),
    )
    report = run_tests(dataset, config, workers=args.workers)
    manifest = RunManifest("test", {
        "time_col": args.time_col, "event_col": args.event_col, "covariate_cols": covs,
        "epsilon": args.epsilon, "tau": args.tau, "alpha": args.alpha, "gamma": args.gamma,
        "a_x": args.ax, "n_bootstrap": args.bootstrap, "seed": args.seed,
        "grid_size": args.grid_size, "bandwidth_rule": _bandwidth_rule(),
    }, digest)
    _write(dumps(report_document(report, manifest)), args.out)
    if args.plot_data:
        Path(args.plot_data).write_text(plot_data_csv(dataset, args.ax), encoding="utf-8")
    sel = report.levels[report.method2_selected_level]
    logger.info("method 1: reject=%s p=%.4f; method 2 (level %s): reject=%s p=%.4f",
                report.method1_reject, report.method1_p, sel.label,
                report.method2_reject, report.method2_p)
    return EXIT_OK


ESTIMATE_FIELDS = ["level", "label", "n_x", "rho_hat", "y_max", "y_max_uncensored",
                   "censoring_rate", "cure_rate_hat", "f_hat_ymax", "bandwidth"]


def estimate_rows(dataset: SurvivalDataset, a_x=0.0):
    groups = partition(dataset)
    rows = []
    for lev in sorted(groups):
        idx = groups[lev]
        t, e = dataset.time[idx], dataset.event[idx]
        summ = summarize(t, e)
        fit = fit_level(t, e, a_x)
        rows.append({
            "level": int(lev),
            "label": dataset.labels[lev],
            "n_x": summ.n_x,
            "rho_hat": summ.n_x / dataset.n,
            "y_max": summ.y_max,
            "y_max_uncensored": summ.y_max_uncensored,
            "censoring_rate": float(1.0 - e.mean()),
            "cure_rate_hat": summ.cure_rate_hat,
            "f_hat_ymax": fit.f_hat,
            "bandwidth": fit.bandwidths.b_x,
        })
    return rows


def cmd_estimate(args):
    covs = _split_list(args.covariate_cols)
    dataset, digest = read_dataset(args.input, args.time_col, args.event_col, covs)
    rows = estimate_rows(dataset, args.ax)
    fmt = args.format
    if fmt is None:
        fmt = "csv" if args.out and args.out.endswith(".csv") else "json"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ESTIMATE_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        manifest = RunManifest("estimate", {
            "time_col": args.time_col, "event_col": args.event_col, "covariate_cols": covs,
            "a_x": args.ax, "bandwidth_rule": _bandwidth_rule(),
        }, digest)
        text = dumps({"manifest": manifest.to_dict(), "levels": rows})
    _write(text, args.out)
    return EXIT_OK


def _case_from(entry, defaults):
    get = lambda k: entry.get(k, defaults.get(k))  # noqa: E731
    setting = get("setting")
    if setting is None:
        raise ConfigError("each case needs a setting")
    p = get("p")
    if isinstance(p, str):
        p = _float_list(p, "p")
    elif isinstance(p, (int, float)):
        p = [float(p), float(p)]
    spec = make_setting(int(setting), rho=float(get("rho")), p=p, delta_g=get("deltaG"))
    qs = get("tau_quantiles")
    if isinstance(qs, str):
        qs = _float_list(qs, "tau_quantiles")
    if qs is None:
        raise ConfigError("tau quantile levels are required")
    qs = tuple(float(q) for q in qs)
    if len(qs) == 1 and spec.n_levels > 1:
        qs = qs * spec.n_levels
    return CaseSpec(spec, qs, int(get("n")))


def load_cases(args):
    defaults = {"setting": args.setting, "rho": args.rho, "p": args.p, "deltaG": args.deltaG,
                "tau_quantiles": args.tau_quantiles, "n": args.n}
    if args.cases:
        try:
            entries = json.loads(Path(args.cases).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read cases file {args.cases}: {exc}") from None
        if isinstance(entries, dict):
            entries = entries.get("cases", [])
        if not isinstance(entries, list) or not entries:
            raise ConfigError("cases file must hold a non-empty list of case objects")
        return [_case_from(e, defaults) for e in entries]
    return [_case_from({}, defaults)]


def cmd_simulate(args):
    if args.seed is None:
        raise ConfigError("simulate requires --seed")
    cases = load_cases(args)
    levels = None
    if args.levels:
        levels = [int(v) for v in _split_list(args.levels)]
        for case in cases:
            if any(not 0 <= lev < case.spec.n_levels for lev in levels):
                raise ConfigError(f"--levels out of range for setting {case.spec.setting}")
    # tau is set per case; this placeholder only carries the other parameters
    config = TestConfig(epsilon=args.epsilon, tau=1.0, alpha=args.alpha, gamma=args.gamma,
                        bootstrap=BootstrapConfig(args.bootstrap, args.seed, args.grid_size))
    results = run_grid(cases, args.reps, config, args.seed, workers=args.workers,
                       test_levels=levels)
    _write(results_to_csv(results), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_data_args(p):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--time-col", required=True)
    p.add_argument("--event-col", required=True, help="1 = event observed, 0 = censored")
    p.add_argument("--covariate-cols", default="",
                   help="comma-separated categorical columns; levels are their cross-product")
    p.add_argument("--ax", type=float, default=0.0,
                   help="start of the region where the density is nonincreasing (default 0)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser():
    parser = _Parser(prog="curefollowup", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test sufficient follow-up on a dataset")
    _add_data_args(t)
    t.add_argument("--epsilon", type=float, default=0.01)
    t.add_argument("--tau", type=float, required=True,
                   help="time beyond which events are practically impossible")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--gamma", type=float, default=0.025)
    t.add_argument("--bootstrap", type=int, default=1000)
    t.add_argument("--seed", type=int, default=DEFAULT_SEED)
    t.add_argument("--grid-size", type=int, default=512)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--plot-data", default=None, help="write KME/LCM curves to this CSV")
    t.set_defaults(func=cmd_test)

    e = sub.add_parser("estimate", help="per-level descriptive estimates")
    _add_data_args(e)
    e.add_argument("--format", choices=["json", "csv"], default=None)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="Monte Carlo rejection rates")
    s.add_argument("--setting", type=int)
    s.add_argument("--rho", type=float, default=0.5)
    s.add_argument("--p", default=None, help="uncure probabilities per level, e.g. 0.6,0.6")
    s.add_argument("--deltaG", type=float, default=None)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--bootstrap", type=int, default=500)
    s.add_argument("--tau-quantiles", default=None,
                   help="quantile level of tau_G per covariate level, e.g. 0.95,0.99")
    s.add_argument("--cases", default=None, help="JSON list of case objects")
    s.add_argument("--levels", default=None,
                   help="only test these level ids (combined methods are then omitted)")
    s.add_argument("--epsilon", type=float, default=0.01)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--gamma", type=float, default=0.025)
    s.add_argument("--grid-size", type=int, default=512)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)
    return parser


def _configure_logging(level):
    # progress goes to stderr only; stdout may carry the report
    for h in list(logger.handlers):
        logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _configure_logging(logging.INFO if args.verbose or args.command == "simulate"
                       else logging.WARNING)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (CureFollowUpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _entry():  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    _entry()
