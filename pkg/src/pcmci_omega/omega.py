"""Periodicity search on top of PCMCI.

For every variable and every guess ``omega`` of its periodicity, the sample
times are split into ``omega`` interleaved phases and each candidate parent
is re-tested on each phase alone. The guess giving the sparsest phase-wise
parent sets is kept.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .ci_tests import bind_ci_test, get_ci_test
from .exceptions import InsufficientDataError
from .panel import PeriodicGraph, build_partition, lcm_periodicities
from .pcmci import PcmciResult, SupersetParents, default_sample_times, run_pcmci, shifted

logger = logging.getLogger(__name__)


@dataclass
class ScanCell:
    phases: list = field(default_factory=list)  # one frozenset of links per phase
    pvalues: dict = field(default_factory=dict)  # (k, var, lag) -> p
    feasible: bool = True
    reason: str = ""

    @property
    def size(self):
        """Largest phase-wise parent set, the quantity the selection minimises."""
        return max(len(s) for s in self.phases) if self.feasible else None


@dataclass
class OmegaScan:
    n: int
    omega_ub: int
    cells: dict  # (j, omega) -> ScanCell
    selected: dict = field(default_factory=dict)  # j -> omega

    def sizes(self, j):
        return [self.cells[(j, w)].size for w in range(1, self.omega_ub + 1)]

    def feasible(self, j):
        return [self.cells[(j, w)].feasible for w in range(1, self.omega_ub + 1)]

    def rows(self):
        """Scan report rows: variable, omega, phase, parent_count, selected."""
        out = []
        for j in range(self.n):
            for w in range(1, self.omega_ub + 1):
                cell = self.cells[(j, w)]
                if not cell.feasible:
                    continue
                for k, links in enumerate(cell.phases):
                    out.append({"variable": j, "omega": w, "phase": k + 1,
                                "parent_count": len(links),
                                "selected": int(self.selected.get(j) == w)})
        return out


def phase_conditions(superset: SupersetParents, j, link) -> list:
    """Fixed conditioning set of a phase test: both endpoints' candidates."""
    conds = [l for l in superset.links(j) if l != link]
    conds += shifted(superset.links(link.var), link.lag)
    return list(dict.fromkeys(c for c in conds if c != link))


def phase_parent_sets(panel, j, omega, superset: SupersetParents, tau_ub, alpha_mci=0.05,
                      ci_test="parcorr", start=None) -> ScanCell:
    """Prune the candidate parents of ``j`` separately on each of ``omega`` phases.

    Every test conditions on the full candidate sets, not on the shrinking
    phase set, so the outcome per link does not depend on test order.
    """
    test = get_ci_test(ci_test)
    start = 2 * tau_ub + 1 if start is None else start
    try:
        partition = build_partition(omega, start, panel.T)
    except InsufficientDataError as exc:
        return ScanCell(feasible=False, reason=str(exc))
    candidates = superset.links(j)
    conds = {link: phase_conditions(superset, j, link) for link in candidates}
    cell = ScanCell()
    for k, times in enumerate(partition.subsets):
        kept = set()
        for link in candidates:
            try:
                res = test(panel, j, link, conds[link], times)
            except InsufficientDataError as exc:
                return ScanCell(feasible=False, reason=f"phase {k + 1}: {exc}")
            if res.p_value <= alpha_mci:
                kept.add(link)
                cell.pvalues[(k, link.var, link.lag)] = res.p_value
        cell.phases.append(frozenset(kept))
    return cell


def turning_points(sizes, feasible=None) -> list:
    """Guesses whose size is strictly below both neighbours' (1-based)."""
    m = len(sizes)
    feasible = [s is not None for s in sizes] if feasible is None else list(feasible)
    out = []
    for idx in range(1, m - 1):
        if feasible[idx - 1] and feasible[idx] and feasible[idx + 1]:
            if sizes[idx] < min(sizes[idx - 1], sizes[idx + 1]):
                out.append(idx + 1)
    return out


def select_omega(sizes, feasible=None, turning_point=True) -> int:
    """Pick the periodicity from the scan profile ``sizes[omega - 1]``.

    The first turning point wins when enabled; otherwise (or if there is
    none) the smallest omega attaining the minimum size.
    """
    sizes = list(sizes)
    feasible = [s is not None for s in sizes] if feasible is None else list(feasible)
    if not any(feasible):
        raise ValueError("no feasible periodicity guess")
    if turning_point:
        tps = turning_points(sizes, feasible)
        if tps:
            return tps[0]
    best = min(s for s, ok in zip(sizes, feasible) if ok)
    return next(w for w, (s, ok) in enumerate(zip(sizes, feasible), start=1) if ok and s == best)


@dataclass
class DiscoveryResult:
    graph: PeriodicGraph
    scan: OmegaScan
    pcmci: PcmciResult
    config: dict = field(default_factory=dict)

    @property
    def omegas(self):
        return self.graph.omegas

    @property
    def period(self):
        return lcm_periodicities(self.graph.omegas)


def check_discover_args(T, omega_ub, tau_ub):
    if tau_ub < 1 or omega_ub < 1:
        raise ValueError(f"tau_ub and omega_ub must be >= 1 (got {tau_ub}, {omega_ub})")
    if T < 2 * tau_ub + omega_ub:
        raise ValueError(
            f"T={T} too short: need T >= 2*tau_ub + omega_ub = {2 * tau_ub + omega_ub}")


def discover(panel, omega_ub, tau_ub, alpha_pc=0.2, alpha_mci=0.05, ci_test="parcorr",
             turning_point=True, fdr=False, p_max=None, q_max=1, p_x=None,
             superset="mci", n_jobs=1) -> DiscoveryResult:
    """Estimate per-variable periodicities and phase-wise parent sets.

    ``superset`` chooses the candidate sets refined per phase: ``"mci"``
    (links PCMCI reports as significant) or ``"pc1"`` (PC1 survivors).
    """
    check_discover_args(panel.T, omega_ub, tau_ub)
    if superset not in ("mci", "pc1"):
        raise ValueError(f"superset must be 'mci' or 'pc1', got {superset!r}")
    sample_times = default_sample_times(panel.T, tau_ub)
    ci_test = bind_ci_test(ci_test, panel, 2 * tau_ub)
    base = run_pcmci(panel, tau_ub, alpha_pc, alpha_mci, ci_test, p_max, q_max, p_x, fdr,
                     sample_times)
    cand = base.superset if superset == "mci" else base.pc1_parents
    start = int(sample_times[0])

    grid = [(j, w) for j in range(panel.n) for w in range(1, omega_ub + 1)]
    run = delayed(phase_parent_sets)
    if n_jobs == 1:
        cells = [phase_parent_sets(panel, j, w, cand, tau_ub, alpha_mci, ci_test, start)
                 for j, w in grid]
    else:
        cells = Parallel(n_jobs=n_jobs)(
            run(panel, j, w, cand, tau_ub, alpha_mci, ci_test, start) for j, w in grid)
    scan = OmegaScan(panel.n, omega_ub, dict(zip(grid, cells)))

    omegas, phases, pvalues = [], [], {}
    for j in range(panel.n):
        w = select_omega(scan.sizes(j), scan.feasible(j), turning_point)
        scan.selected[j] = w
        cell = scan.cells[(j, w)]
        omegas.append(w)
        phases.append(tuple(cell.phases))
        for (k, var, lag), p in cell.pvalues.items():
            pvalues[(j, k, var, lag)] = p
        allowed = frozenset(cand.links(j))
        if any(not links <= allowed for links in cell.phases):
            raise AssertionError(f"variable {j}: phase parents escaped the candidate set")
    graph = PeriodicGraph(panel.n, tau_ub, tuple(omegas), tuple(phases), anchor=start,
                          names=panel.names, pvalues=pvalues)
    config = dict(omega_ub=omega_ub, tau_ub=tau_ub, alpha_pc=alpha_pc, alpha_mci=alpha_mci,
                  turning_point=turning_point, fdr=fdr, superset=superset)
    return DiscoveryResult(graph, scan, base, config)
