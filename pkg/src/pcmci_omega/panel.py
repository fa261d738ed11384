"""Panel data type, period arithmetic and time partitions.

Time indices are 1-based throughout the public API (``t = 1`` is the first
row of a panel); variable indices are 0-based.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InsufficientDataError, PanelFormatError

CONTINUOUS = "continuous"
DISCRETE = "discrete"


class LaggedLink(NamedTuple):
    """A lagged parent ``X^var_{t-lag}``."""

    var: int
    lag: int


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """An n-variable time series stored as a (T, n) array.

    Rows are time steps (row 0 is ``t = 1``), columns are variables. Discrete
    panels keep their non-negative integer codes as floats; ``alphabets``
    records the number of distinct codes per variable.
    """

    values: np.ndarray
    names: tuple = ()
    kind: str = CONTINUOUS
    alphabets: tuple = field(default=())
    by_var: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise PanelFormatError(f"panel must be a non-empty 2D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise PanelFormatError("panel contains missing or non-finite entries")
        if self.kind not in (CONTINUOUS, DISCRETE):
            raise PanelFormatError(f"unknown panel kind {self.kind!r}")
        n = values.shape[1]
        names = tuple(self.names) if self.names else tuple(f"X{j}" for j in range(n))
        if len(names) != n:
            raise PanelFormatError(f"{len(names)} names for {n} variables")
        alphabets = ()
        if self.kind == DISCRETE:
            if np.any(values < 0) or np.any(values != np.round(values)):
                raise PanelFormatError("discrete panels need non-negative integer codes")
            alphabets = tuple(int(np.unique(values[:, j]).size) for j in range(n))
        values = values.copy()
        values.setflags(write=False)
        by_var = np.ascontiguousarray(values.T)
        by_var.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "by_var", by_var)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "alphabets", alphabets)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, X, names=None, kind=CONTINUOUS) -> "TimeSeriesPanel":
        """Validate an array-like of shape (T, n) and wrap it."""
        if isinstance(X, TimeSeriesPanel):
            return X
        try:
            arr = check_array(X, dtype=float, ensure_all_finite=True, ensure_min_samples=1)
        except ValueError as exc:
            raise PanelFormatError(str(exc)) from exc
        return cls(arr, tuple(names) if names is not None else (), kind)

    def column_at(self, var: int, times: np.ndarray) -> np.ndarray:
        """Values of variable ``var`` at 1-based ``times``."""
        return self.values[np.asarray(times) - 1, var]


def _is_path(obj) -> bool:
    return isinstance(obj, (str, bytes)) or hasattr(obj, "__fspath__")


def read_panel_csv(path_or_buffer, kind=CONTINUOUS) -> TimeSeriesPanel:
    """Read a panel CSV: a header row of names, then one row per time step."""
    if _is_path(path_or_buffer):
        with open(path_or_buffer, newline="") as fh:
            text = fh.read()
    else:
        text = path_or_buffer.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise PanelFormatError("panel CSV needs a header row and at least one data row")
    names = [name.strip() for name in rows[0]]
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(names):
            raise PanelFormatError(f"line {lineno}: expected {len(names)} fields, got {len(row)}")
        try:
            data.append([float(cell) for cell in row])
        except ValueError as exc:
            raise PanelFormatError(f"line {lineno}: {exc}") from exc
    return TimeSeriesPanel(np.array(data), tuple(names), kind)


def write_panel_csv(panel: TimeSeriesPanel, path_or_buffer) -> None:
    """Write ``panel`` in the format :func:`read_panel_csv` reads."""
    if _is_path(path_or_buffer):
        with open(path_or_buffer, "w", newline="") as fh:
            write_panel_csv(panel, fh)
        return
    writer = csv.writer(path_or_buffer, lineterminator="\n")
    writer.writerow(panel.names)
    as_int = panel.kind == DISCRETE
    for row in panel.values:
        writer.writerow([str(int(v)) if as_int else repr(float(v)) for v in row])


def lcm_periodicities(omegas: Iterable[int]) -> int:
    """Least common multiple of the per-variable periodicities."""
    omegas = [int(w) for w in omegas]
    if not omegas:
        raise ValueError("need at least one periodicity")
    if any(w < 1 for w in omegas):
        raise ValueError(f"periodicities must be >= 1, got {omegas}")
    return reduce(math.lcm, omegas)


def chain_count(tau_max: int, period: int) -> int:
    """Smallest multiple of ``period`` that is at least ``tau_max + 1``."""
    if tau_max < 0 or period < 1:
        raise ValueError(f"invalid (tau_max, period) = ({tau_max}, {period})")
    return -(-(tau_max + 1) // period) * period


@dataclass(frozen=True)
class TimePartition:
    omega: int
    start: int
    subsets: tuple

    def __len__(self):
        return self.omega

    def sizes(self) -> tuple:
        return tuple(len(s) for s in self.subsets)


def build_partition(omega: int, start: int, T: int) -> TimePartition:
    """Split ``start..T`` into ``omega`` interleaved arithmetic progressions.

    Subset ``k`` (1-based) holds ``start + (k-1) + m*omega`` for ``m >= 0``.
    """
    if omega < 1:
        raise ValueError(f"omega must be >= 1, got {omega}")
    if start < 1 or start > T:
        raise ValueError(f"start {start} outside 1..{T}")
    if T - start + 1 < omega:
        raise InsufficientDataError(
            f"omega={omega} needs at least {omega} time points from t={start}, only {T - start + 1} available"
        )
    subsets = tuple(
        np.arange(start + k, T + 1, omega, dtype=np.int64) for k in range(omega)
    )
    for s in subsets:
        s.setflags(write=False)
    return TimePartition(omega, start, subsets)


def phase_of(t, omega: int, start: int):
    """1-based phase of time ``t`` for a partition anchored at ``start``."""
    t_arr = np.asarray(t)
    if np.any(t_arr < start):
        raise ValueError(f"time {t} precedes partition anchor {start}")
    k = (t_arr - start) % omega + 1
    return int(k) if k.ndim == 0 else k


def _links_key(links) -> list:
    return sorted(LaggedLink(int(v), int(l)) for v, l in links)


@dataclass(frozen=True, eq=False)
class PeriodicGraph:
    """Per-variable periodicity and phase-resolved lagged parent sets.

    ``phases[j][k]`` is the parent set of variable ``j`` during its phase
    ``k + 1``; phase 1 of every variable starts at time ``anchor``.
    ``pvalues`` optionally maps ``(j, k, var, lag)`` to the p-value that kept
    the link.
    """

    n: int
    tau_max: int
    omegas: tuple
    phases: tuple
    anchor: int = 1
    names: tuple = ()
    pvalues: dict = field(default_factory=dict)

    def __post_init__(self):
        omegas = tuple(int(w) for w in self.omegas)
        phases = tuple(tuple(frozenset(LaggedLink(*l) for l in ph) for ph in var_phases)
                       for var_phases in self.phases)
        if len(omegas) != self.n or len(phases) != self.n:
            raise ValueError("omegas/phases must have one entry per variable")
        for j, (w, ph) in enumerate(zip(omegas, phases)):
            if w < 1 or len(ph) != w:
                raise ValueError(f"variable {j}: {len(ph)} phase sets for omega={w}")
            for links in ph:
                for link in links:
                    if not (1 <= link.lag <= self.tau_max) or not (0 <= link.var < self.n):
                        raise ValueError(f"variable {j}: invalid link {link}")
        names = tuple(self.names) if self.names else tuple(f"X{j}" for j in range(self.n))
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "names", names)

    def __eq__(self, other):
        if not isinstance(other, PeriodicGraph):
            return NotImplemented
        return (self.n, self.omegas, self.phases) == (other.n, other.omegas, other.phases)

    @property
    def period(self) -> int:
        return lcm_periodicities(self.omegas)

    def same_structure(self, other: "PeriodicGraph") -> bool:
        """Equal periodicities and equal parents at every absolute time.

        Unlike ``==`` this ignores how each graph labels its phases.
        """
        if self.n != other.n or self.omegas != other.omegas:
            return False
        lag = max(self.tau_max, other.tau_max)
        return bool(np.array_equal(self.to_edge_array(self.period, lag),
                                   other.to_edge_array(self.period, lag)))

    def parents_at(self, j: int, t: int) -> frozenset:
        """Parent links of variable ``j`` at time ``t >= anchor``."""
        return self.phases[j][phase_of(t, self.omegas[j], self.anchor) - 1]

    def union_parents(self, j: int) -> frozenset:
        return frozenset().union(*self.phases[j])

    def to_edge_array(self, period: int | None = None, max_lag: int | None = None) -> np.ndarray:
        """Boolean array [n, period, n, max_lag + 1] aligned to absolute time.

        Phase index ``p`` covers the times ``t`` with ``(t - 1) % period == p``.
        """
        period = self.period if period is None else int(period)
        max_lag = self.tau_max if max_lag is None else int(max_lag)
        if any(period % w for w in self.omegas):
            raise ValueError(f"period {period} is not a multiple of every omega {self.omegas}")
        arr = np.zeros((self.n, period, self.n, max_lag + 1), dtype=bool)
        for j in range(self.n):
            w = self.omegas[j]
            for p in range(period):
                k = (p + 1 - self.anchor) % w
                for link in self.phases[j][k]:
                    if link.lag <= max_lag:
                        arr[j, p, link.var, link.lag] = True
        return arr

    @classmethod
    def from_edge_array(cls, arr: np.ndarray, omegas: Sequence[int], anchor: int = 1,
                        names=()) -> "PeriodicGraph":
        """Inverse of :meth:`to_edge_array` for the given periodicities."""
        arr = np.asarray(arr, dtype=bool)
        n, period, _, lags = arr.shape
        phases = []
        for j in range(n):
            w = int(omegas[j])
            var_phases = []
            for k in range(w):
                p = (k + anchor - 1) % w
                i_idx, tau_idx = np.nonzero(arr[j, p])
                var_phases.append(frozenset(LaggedLink(int(i), int(tau)) for i, tau in zip(i_idx, tau_idx)))
            phases.append(tuple(var_phases))
        return cls(n, lags - 1, tuple(omegas), tuple(phases), anchor, names)

    def to_dict(self) -> dict:
        series = []
        for j in range(self.n):
            entry_phases = []
            for k, links in enumerate(self.phases[j]):
                parents = []
                for link in _links_key(links):
                    pval = self.pvalues.get((j, k, link.var, link.lag))
                    parents.append({"var": link.var, "lag": link.lag,
                                    "pvalue": None if pval is None else float(pval)})
                entry_phases.append({"phase": k + 1, "parents": parents})
            series.append({"name": self.names[j], "omega": self.omegas[j], "phases": entry_phases})
        return {"n": self.n, "tau_max": self.tau_max, "anchor": self.anchor,
                "variables": list(self.names), "series": series}

    @classmethod
    def from_dict(cls, doc: dict) -> "PeriodicGraph":
        omegas, phases, pvalues = [], [], {}
        for j, entry in enumerate(doc["series"]):
            omegas.append(int(entry["omega"]))
            ordered = sorted(entry["phases"], key=lambda ph: ph["phase"])
            var_phases = []
            for k, ph in enumerate(ordered):
                links = set()
                for par in ph["parents"]:
                    links.add(LaggedLink(int(par["var"]), int(par["lag"])))
                    if par.get("pvalue") is not None:
                        pvalues[(j, k, int(par["var"]), int(par["lag"]))] = float(par["pvalue"])
                var_phases.append(frozenset(links))
            phases.append(tuple(var_phases))
        return cls(int(doc["n"]), int(doc["tau_max"]), tuple(omegas), tuple(phases),
                   int(doc.get("anchor", 1)), tuple(doc.get("variables", ())), pvalues)
