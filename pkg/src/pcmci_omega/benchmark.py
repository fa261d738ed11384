"""Simulation sweeps comparing PCMCI and PCMCI-Omega on generated data."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .metrics import evaluate_graph
from .omega import discover
from .pcmci import run_pcmci
from .simulate import simulate

logger = logging.getLogger(__name__)

ALGORITHMS = ("pcmci-omega", "pcmci")
METRICS = ("precision", "recall", "f1", "omega_acc")
TRIAL_COLUMNS = ("trial", "algorithm", "T", "omega_max", "precision", "recall", "f1",
                 "omega_acc", "runtime_sec", "seed", "status")


@dataclass
class BenchmarkConfig:
    """One sweep. ``T`` and ``omega_max`` are the grid axes.

    Edge density defaults to 0.1: at n=5 and tau_max=5 denser random
    systems are rarely stable. ``BenchmarkConfig.preset("desk")`` cuts the
    trial count to 20.
    """

    T: list = field(default_factory=lambda: [500, 2000, 8000])
    omega_max: list = field(default_factory=lambda: [1, 2, 3])
    trials: int = 100
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    n: int = 5
    tau_max: int = 5
    tau_ub: int = 15
    omega_ub: int = 15
    density: float = 0.1
    noise: str = "gaussian"
    link: str = "linear"
    alpha_pc: float = 0.2
    alpha_mci: float = 0.05
    fdr: bool = True
    turning_point: bool = True
    seed: int = 0
    workers: int = 1

    def validate(self):
        if not self.T or not self.omega_max:
            raise ValueError("benchmark grid is empty")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ValueError(f"algorithms must be drawn from {ALGORITHMS}, got {self.algorithms}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("alpha_pc", "alpha_mci"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def preset(cls, name="full", **overrides):
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(**{**PRESETS[name], **overrides})


PRESETS = {"full": {"trials": 100}, "desk": {"trials": 20}}


def run_trial(cfg: BenchmarkConfig, T: int, omega_max: int, trial: int) -> list:
    """Simulate one dataset and score every requested algorithm on it.

    Returns one row per algorithm; failures become rows with NaN metrics
    and the error text in ``status``.
    """
    seed = cfg.seed + trial
    base = {"trial": trial, "T": T, "omega_max": omega_max, "seed": seed}
    try:
        spec, panel = simulate(cfg.n, T, cfg.tau_max, omega_max, cfg.noise, seed, cfg.density,
                               cfg.link)
    except Exception as exc:  # recorded per trial, the sweep continues
        logger.warning("trial %d (T=%d, omega_max=%d) failed to simulate: %s", trial, T,
                       omega_max, exc)
        return [dict(base, algorithm=a, runtime_sec=float("nan"), status=f"error: {exc}",
                     **{m: float("nan") for m in METRICS}) for a in cfg.algorithms]
    truth = spec.to_graph()
    rows = []
    for algo in cfg.algorithms:
        start = time.perf_counter()
        try:
            if algo == "pcmci":
                graph = run_pcmci(panel, cfg.tau_ub, cfg.alpha_pc, cfg.alpha_mci,
                                  fdr=cfg.fdr).graph
            else:
                graph = discover(panel, cfg.omega_ub, cfg.tau_ub, cfg.alpha_pc, cfg.alpha_mci,
                                 turning_point=cfg.turning_point, fdr=cfg.fdr).graph
            scores = evaluate_graph(truth, graph, cfg.omega_ub)
            status = "ok"
        except Exception as exc:
            logger.warning("trial %d %s failed: %s", trial, algo, exc)
            scores, status = {m: float("nan") for m in METRICS}, f"error: {exc}"
        rows.append(dict(base, algorithm=algo, runtime_sec=time.perf_counter() - start,
                         status=status, **scores))
    return rows


def run_benchmark(cfg: BenchmarkConfig) -> list:
    """All trial rows, ordered by (T, omega_max, trial, algorithm order)."""
    cfg.validate()
    jobs = [(T, w, k) for T in cfg.T for w in cfg.omega_max for k in range(cfg.trials)]
    if cfg.workers == 1:
        chunks = [run_trial(cfg, *job) for job in jobs]
    else:
        chunks = Parallel(n_jobs=cfg.workers)(delayed(run_trial)(cfg, *job) for job in jobs)
    return [row for chunk in chunks for row in chunk]


def _mean_se(values):
    vals = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if vals.size == 0:
        return float("nan"), float("nan")
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return float(vals.mean()), se


def summarize(rows, with_runtime=False) -> list:
    """Per (algorithm, T, omega_max) cell: trial counts and mean/SE of each metric."""
    metrics = METRICS + (("runtime_sec",) if with_runtime else ())
    cells = {}
    for row in rows:
        cells.setdefault((row["algorithm"], row["T"], row["omega_max"]), []).append(row)
    out = []
    for (algo, T, w), cell in cells.items():
        ok = [r for r in cell if r["status"] == "ok"]
        entry = {"algorithm": algo, "T": T, "omega_max": w, "trials": len(cell),
                 "failed": len(cell) - len(ok)}
        for m in metrics:
            entry[f"{m}_mean"], entry[f"{m}_se"] = _mean_se(r[m] for r in ok)
        out.append(entry)
    return out


def plot_table(summary, metric) -> list:
    """Rows keyed by (T, omega_max) with one mean/SE column pair per algorithm."""
    table = {}
    for entry in summary:
        row = table.setdefault((entry["T"], entry["omega_max"]),
                               {"T": entry["T"], "omega_max": entry["omega_max"]})
        row[f"{entry['algorithm']}_mean"] = entry[f"{metric}_mean"]
        row[f"{entry['algorithm']}_se"] = entry[f"{metric}_se"]
    return [table[k] for k in sorted(table)]
