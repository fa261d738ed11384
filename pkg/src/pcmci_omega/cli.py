"""Command line driver: simulate, discover, evaluate and benchmark.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (METRICS, PRESETS, TRIAL_COLUMNS, BenchmarkConfig, plot_table,
                        run_benchmark, summarize)
from .ci_tests import OracleCI
from .exceptions import (InsufficientDataError, PanelFormatError, SpecValidationError,
                         UnstableSpecError)
from .metrics import (adjacency_metrics, edge_array_from_json, edge_array_to_json, evaluate_graph,
                      lcm_align)
from .omega import check_discover_args, discover
from .panel import DISCRETE, CONTINUOUS, PeriodicGraph, read_panel_csv, write_panel_csv
from .pcmci import run_pcmci
from .simulate import ScmSpec, simulate, true_edge_array

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DATA_ERRORS = (PanelFormatError, InsufficientDataError, SpecValidationError, UnstableSpecError,
               json.JSONDecodeError)

logger = logging.getLogger("pcmci_omega")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# file helpers ----------------------------------------------------------------

def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _csv_text(rows, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n",
                            extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in columns})
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, float):
        return "nan" if not np.isfinite(value) else repr(round(value, 12))
    return value


def _manifest(command, config, outputs) -> dict:
    return {"command": command, "version": __version__, "config": config,
            "outputs": sorted(str(o) for o in outputs)}


def _load_spec(path) -> ScmSpec:
    with open(path) as fh:
        return ScmSpec.from_dict(json.load(fh))


# argument parsing --------------------------------------------------------------

def _alpha(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _density(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return value


def _add_discovery_args(p):
    p.add_argument("--tau-ub", dest="tau_ub", type=_positive, default=1)
    p.add_argument("--omega-ub", dest="omega_ub", type=_positive, default=2)
    p.add_argument("--alpha-pc", dest="alpha_pc", type=_alpha, default=0.2)
    p.add_argument("--alpha-mci", dest="alpha_mci", type=_alpha, default=0.05)
    p.add_argument("--turning-point", dest="turning_point",
                   action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--fdr", dest="fdr", action=argparse.BooleanOptionalAction, default=False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcmci-omega", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = sub.choices

    p = sub.add_parser("simulate", help="generate panels with known periodic graphs")
    p.add_argument("--config", help="JSON file of defaults; flags override it")
    p.add_argument("--out", required=False)
    p.add_argument("--n", type=_positive, default=3)
    p.add_argument("--T", dest="T", type=_positive, default=1000)
    p.add_argument("--tau-max", dest="tau_max", type=_positive, default=2)
    p.add_argument("--omega-max", dest="omega_max", type=_positive, default=2)
    p.add_argument("--noise", choices=["gaussian", "exponential", "binary"], default="gaussian")
    p.add_argument("--link", choices=["linear", "quadratic"], default="linear")
    p.add_argument("--density", type=_density, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=_positive, default=1)

    p = sub.add_parser("discover", help="estimate periodicities and phase parent sets")
    p.add_argument("--config")
    p.add_argument("--input", required=False)
    p.add_argument("--out", required=False)
    p.add_argument("--algorithm", choices=["pcmci-omega", "pcmci"], default="pcmci-omega")
    p.add_argument("--test", choices=["parcorr", "gsq", "oracle"], default="parcorr")
    p.add_argument("--spec", help="spec JSON; required for --test oracle")
    p.add_argument("--superset", choices=["mci", "pc1"], default="mci")
    p.add_argument("--workers", type=_positive, default=1)
    _add_discovery_args(p)

    p = sub.add_parser("evaluate", help="score an estimated graph against ground truth")
    p.add_argument("--config")
    p.add_argument("--truth", required=False, help="spec JSON or edge-array JSON")
    p.add_argument("--graph", required=False, help="graph JSON written by discover")
    p.add_argument("--omega-ub", dest="omega_ub", type=_positive, default=None)
    p.add_argument("--out", help="write a one-row metrics CSV here instead of stdout")

    p = sub.add_parser("benchmark", help="simulation sweep over T and omega_max")
    p.add_argument("--config")
    p.add_argument("--out", required=False)
    p.add_argument("--grid-T", dest="T", type=_positive, nargs="+", default=[500, 2000, 8000])
    p.add_argument("--grid-omega-max", dest="omega_max", type=_positive, nargs="+",
                   default=[1, 2, 3])
    p.add_argument("--preset", choices=sorted(PRESETS), default="full",
                   help="full: 100 trials per cell; desk: 20")
    p.add_argument("--trials", type=_positive, default=None, help="overrides the preset")
    p.add_argument("--algorithms", nargs="+", choices=["pcmci-omega", "pcmci"],
                   default=["pcmci-omega", "pcmci"])
    p.add_argument("--n", type=_positive, default=5)
    p.add_argument("--tau-max", dest="tau_max", type=_positive, default=5)
    p.add_argument("--density", type=_density, default=0.1)
    p.add_argument("--noise", choices=["gaussian", "exponential"], default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive, default=1)
    _add_discovery_args(p)
    p.set_defaults(tau_ub=15, omega_ub=15, fdr=True)
    return parser


def parse_args(argv):
    """Parse ``argv`` with config-file defaults below explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        subparser = parser.commands[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(cfg) - known - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.pop("command", None)
        # re-validate config values through the same converters as flags
        for action in subparser._actions:
            if action.dest in cfg and action.type is not None:
                val = cfg[action.dest]
                try:
                    cfg[action.dest] = ([action.type(str(v)) for v in val]
                                        if isinstance(val, list) else action.type(str(val)))
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"config key {action.dest}: {exc}") from exc
            if action.dest in cfg and action.choices is not None:
                vals = cfg[action.dest] if isinstance(cfg[action.dest], list) else [cfg[action.dest]]
                if any(v not in action.choices for v in vals):
                    raise UsageError(f"config key {action.dest}: choose from {list(action.choices)}")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join('--' + m for m in missing)}")


def _config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose", "config")}


# commands -------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    _require(args, "out")
    out = Path(args.out)
    config = _config_of(args)
    outputs, trials = [], []
    for k in range(args.trials):
        seed = args.seed + k
        spec, panel = simulate(args.n, args.T, args.tau_max, args.omega_max, args.noise, seed,
                               args.density, args.link)
        stem = f"{k:03d}"
        buf = io.StringIO()
        write_panel_csv(panel, buf)
        files = {"panel": out / f"panel_{stem}.csv", "spec": out / f"spec_{stem}.json",
                 "truth": out / f"truth_{stem}.json"}
        atomic_write(files["panel"], buf.getvalue())
        atomic_write(files["spec"], _json(spec.to_dict()))
        atomic_write(files["truth"], edge_array_to_json(true_edge_array(spec)) + "\n")
        outputs += [p.name for p in files.values()]
        trials.append({"trial": k, "seed": seed, "spec_seed": spec.seed,
                       "omegas": list(spec.omegas)})
    manifest = _manifest("simulate", config, outputs)
    manifest["trials"] = trials
    atomic_write(out / "manifest.json", _json(manifest))
    print(f"wrote {args.trials} panel(s) to {out}")
    return EXIT_OK


def cmd_discover(args) -> int:
    _require(args, "input", "out")
    if args.test == "oracle" and not args.spec:
        raise UsageError("--test oracle needs --spec with the generating model")
    spec = _load_spec(args.spec) if args.spec else None
    kind = DISCRETE if args.test == "gsq" else CONTINUOUS
    panel = read_panel_csv(args.input, kind)
    if args.test == "oracle":
        if spec.n != panel.n:
            raise SpecValidationError(f"spec has {spec.n} variables, panel has {panel.n}")
        test = OracleCI.from_spec(spec, panel.T)
    else:
        test = args.test
    out = Path(args.out)
    config = _config_of(args)
    if args.algorithm == "pcmci":
        if panel.T < 2 * args.tau_ub + 1:
            raise InsufficientDataError(f"T={panel.T} too short for tau_ub={args.tau_ub}")
        graph = run_pcmci(panel, args.tau_ub, args.alpha_pc, args.alpha_mci, test,
                          fdr=args.fdr).graph
        scan_rows = []
    else:
        try:
            check_discover_args(panel.T, args.omega_ub, args.tau_ub)
        except ValueError as exc:
            raise InsufficientDataError(str(exc)) from exc
        res = discover(panel, args.omega_ub, args.tau_ub, args.alpha_pc, args.alpha_mci, test,
                       args.turning_point, args.fdr, superset=args.superset, n_jobs=args.workers)
        graph, scan_rows = res.graph, res.scan.rows()
    doc = graph.to_dict()
    doc["config"] = config
    atomic_write(out / "graph.json", _json(doc))
    atomic_write(out / "scan.csv",
                 _csv_text(scan_rows, ["variable", "omega", "phase", "parent_count", "selected"]))
    atomic_write(out / "manifest.json", _json(_manifest("discover", config,
                                                        ["graph.json", "scan.csv"])))
    print("omegas: " + " ".join(f"{name}={w}" for name, w in zip(graph.names, graph.omegas)))
    return EXIT_OK


def _truth_graph(path):
    with open(path) as fh:
        doc = json.load(fh)
    if "phase_edges" in doc:
        return ScmSpec.from_dict(doc).to_graph()
    if "shape" in doc:
        return edge_array_from_json(json.dumps(doc))
    raise SpecValidationError(f"{path}: neither a spec nor an edge-array document")


def cmd_evaluate(args) -> int:
    _require(args, "truth", "graph")
    truth = _truth_graph(args.truth)
    with open(args.graph) as fh:
        try:
            est = PeriodicGraph.from_dict(json.load(fh))
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecValidationError(f"{args.graph}: malformed graph document: {exc}") from exc
    if isinstance(truth, np.ndarray):
        lag = max(truth.shape[3] - 1, est.tau_max)
        a, b = lcm_align(truth, est.to_edge_array(est.period, lag))
        scores = adjacency_metrics(a, b)
        row = {"precision": scores.precision, "recall": scores.recall, "f1": scores.f1,
               "omega_acc": float("nan")}
    else:
        if truth.n != est.n:
            raise SpecValidationError(f"truth has {truth.n} variables, graph has {est.n}")
        row = evaluate_graph(truth, est, args.omega_ub)
    text = _csv_text([row], METRICS)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    _require(args, "out")
    trials = args.trials or PRESETS[args.preset]["trials"]
    cfg = BenchmarkConfig(T=list(args.T), omega_max=list(args.omega_max), trials=trials,
                          algorithms=list(args.algorithms), n=args.n, tau_max=args.tau_max,
                          tau_ub=args.tau_ub, omega_ub=args.omega_ub, density=args.density,
                          noise=args.noise, alpha_pc=args.alpha_pc, alpha_mci=args.alpha_mci,
                          fdr=args.fdr, turning_point=args.turning_point, seed=args.seed,
                          workers=args.workers)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    rows = run_benchmark(cfg)
    summary = summarize(rows)
    timing = summarize(rows, with_runtime=True)
    outputs = ["trials.csv", "summary.csv", "timing.csv"]
    atomic_write(out / "trials.csv", _csv_text(rows, TRIAL_COLUMNS))
    sum_cols = ["algorithm", "T", "omega_max", "trials", "failed"]
    sum_cols += [f"{m}_{s}" for m in METRICS for s in ("mean", "se")]
    atomic_write(out / "summary.csv", _csv_text(summary, sum_cols))
    atomic_write(out / "timing.csv", _csv_text(timing, sum_cols[:5] + ["runtime_sec_mean",
                                                                       "runtime_sec_se"]))
    for metric in METRICS:
        table = plot_table(summary, metric)
        cols = ["T", "omega_max"] + [f"{a}_{s}" for a in cfg.algorithms for s in ("mean", "se")]
        name = f"plot_{metric}.csv"
        atomic_write(out / name, _csv_text(table, cols))
        outputs.append(name)
    atomic_write(out / "manifest.json", _json(_manifest("benchmark", cfg.to_dict(), outputs)))
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} trial rows, {failed} failed; results in {out}")
    if failed == len(rows):
        return EXIT_DATA
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "discover": cmd_discover, "evaluate": cmd_evaluate,
            "benchmark": cmd_benchmark}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
