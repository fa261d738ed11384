"""Stationary PCMCI: PC1 condition selection followed by MCI tests."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import false_discovery_control

from .ci_tests import CiResult, bind_ci_test, get_ci_test
from .exceptions import InsufficientDataError
from .panel import LaggedLink, PeriodicGraph, TimeSeriesPanel

logger = logging.getLogger(__name__)


@dataclass
class SupersetParents:
    """Per-variable candidate parents, strongest first.

    ``entries[j]`` is a list of ``(LaggedLink, strength)`` pairs sorted by
    strength descending. ``flagged[j]`` holds links kept only because a test
    lacked data.
    """

    entries: dict
    flagged: dict = field(default_factory=dict)

    def links(self, j: int) -> list:
        return [link for link, _ in self.entries.get(j, [])]

    def as_sets(self) -> dict:
        return {j: frozenset(self.links(j)) for j in self.entries}


def default_sample_times(T: int, tau_ub: int) -> np.ndarray:
    """Times ``2*tau_ub + 1 .. T``: every lag-shifted MCI condition stays in range."""
    start = 2 * tau_ub + 1
    if start > T:
        raise InsufficientDataError(f"T={T} too short for tau_ub={tau_ub}")
    return np.arange(start, T + 1)


def pc1(panel, j, tau_ub, alpha_pc=0.2, p_max=None, q_max=1, sample_times=None,
        ci_test="parcorr"):
    """Stable PC1 condition selection for target variable ``j``.

    Returns ``(parents, flagged)`` where ``parents`` is a list of
    ``(LaggedLink, min |statistic|)`` sorted by strength descending.
    """
    test = get_ci_test(ci_test)
    n = panel.n
    if sample_times is None:
        sample_times = default_sample_times(panel.T, tau_ub)
    if p_max is None:
        p_max = n * tau_ub
    parents = [LaggedLink(i, tau) for i in range(n) for tau in range(1, tau_ub + 1)]
    min_stat = {link: np.inf for link in parents}
    flagged = set()

    for p in range(p_max + 1):
        if len(parents) - 1 < p:
            break
        nonsig = []
        for link in parents:
            others = [l for l in parents if l != link]
            for q, cond in enumerate(combinations(others, p)):
                if q >= q_max:
                    break
                try:
                    res = test(panel, j, link, cond, sample_times)
                except InsufficientDataError:
                    logger.warning("pc1: keeping %s -> %d, not enough samples", link, j)
                    flagged.add(link)
                    break
                min_stat[link] = min(min_stat[link], abs(res.statistic))
                if res.p_value > alpha_pc:
                    nonsig.append(link)
                    break
        for link in nonsig:
            del min_stat[link]
            flagged.discard(link)
        parents = sorted(min_stat, key=lambda l: -min_stat[l])
    return [(link, float(min_stat[link])) for link in parents], flagged


def shifted(links, tau: int) -> list:
    return [LaggedLink(l.var, l.lag + tau) for l in links]


def mci_conditions(superset: SupersetParents, j: int, link: LaggedLink, p_x=None) -> list:
    """Conditions of the MCI test of ``link -> j``: both endpoints' parents."""
    source = superset.links(link.var)
    if p_x is not None:
        source = source[:p_x]
    conds = [l for l in superset.links(j) if l != link] + shifted(source, link.lag)
    return list(dict.fromkeys(c for c in conds if c != link))


@dataclass
class MciResult:
    p_values: dict  # (j, i, tau) -> p
    statistics: dict  # (j, i, tau) -> statistic
    degenerate: set = field(default_factory=set)

    def significant(self, alpha) -> dict:
        out = {}
        for (j, i, tau), p in self.p_values.items():
            if p <= alpha:
                out.setdefault(j, set()).add(LaggedLink(i, tau))
        return out


def mci(panel, superset: SupersetParents, tau_ub, p_x=None, sample_times=None,
        ci_test="parcorr", fdr=False) -> MciResult:
    """Momentary conditional independence test of every lagged pair."""
    test = get_ci_test(ci_test)
    if sample_times is None:
        sample_times = default_sample_times(panel.T, tau_ub)
    pvals, statistics, degenerate = {}, {}, set()
    for j in range(panel.n):
        for i in range(panel.n):
            for tau in range(1, tau_ub + 1):
                link = LaggedLink(i, tau)
                conds = mci_conditions(superset, j, link, p_x)
                try:
                    res = test(panel, j, link, conds, sample_times)
                except InsufficientDataError:
                    res = CiResult.independent(0, degenerate=True)
                if res.degenerate:
                    degenerate.add((j, i, tau))
                pvals[(j, i, tau)] = res.p_value
                statistics[(j, i, tau)] = res.statistic
    if fdr:
        pvals = fdr_adjust(pvals)
    return MciResult(pvals, statistics, degenerate)


def fdr_adjust(pvals: dict) -> dict:
    """Benjamini-Hochberg adjusted p-values, keyed like the input."""
    if not pvals:
        return {}
    keys = list(pvals)
    raw = np.array([pvals[k] for k in keys], dtype=float)
    if np.any((raw < 0) | (raw > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    adjusted = np.minimum(false_discovery_control(raw, method="bh"), 1.0)
    return dict(zip(keys, adjusted.tolist()))


@dataclass
class PcmciResult:
    graph: PeriodicGraph
    pc1_parents: SupersetParents
    mci: MciResult
    superset: SupersetParents


def run_pcmci(panel: TimeSeriesPanel, tau_ub: int, alpha_pc=0.2, alpha_mci=0.05,
              ci_test="parcorr", p_max=None, q_max=1, p_x=None, fdr=False,
              sample_times=None) -> PcmciResult:
    """PC1 for every variable, then MCI on all lagged pairs.

    ``superset`` in the result holds the MCI-significant links of each
    variable, strongest first; it is the candidate set refined per phase by
    :func:`pcmci_omega.omega.discover`.
    """
    if sample_times is None:
        sample_times = default_sample_times(panel.T, tau_ub)
    ci_test = bind_ci_test(ci_test, panel, 2 * tau_ub)
    entries, flagged = {}, {}
    for j in range(panel.n):
        entries[j], flagged[j] = pc1(panel, j, tau_ub, alpha_pc, p_max, q_max,
                                     sample_times, ci_test)
    pc1_parents = SupersetParents(entries, flagged)
    res = mci(panel, pc1_parents, tau_ub, p_x, sample_times, ci_test, fdr)
    sig = res.significant(alpha_mci)

    sup_entries = {}
    phases, pvalues = [], {}
    for j in range(panel.n):
        links = sorted(sig.get(j, ()),
                       key=lambda l: (-abs(res.statistics[(j, l.var, l.lag)]), l))
        sup_entries[j] = [(l, abs(res.statistics[(j, l.var, l.lag)])) for l in links]
        phases.append((frozenset(links),))
        for l in links:
            pvalues[(j, 0, l.var, l.lag)] = res.p_values[(j, l.var, l.lag)]
    graph = PeriodicGraph(panel.n, tau_ub, (1,) * panel.n, tuple(phases),
                          anchor=int(np.min(sample_times)), names=panel.names, pvalues=pvalues)
    return PcmciResult(graph, pc1_parents, res, SupersetParents(sup_entries))
