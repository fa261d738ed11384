"""Ground-truth simulator for periodic (semi-stationary) lagged SCMs.

A spec holds, for every variable ``j``, ``omegas[j]`` phase mechanisms. A
phase mechanism is a boolean edge matrix of shape ``(n, tau_max)`` (entry
``[i, tau - 1]`` is the link ``X^i_{t-tau} -> X^j_t``) together with either a
coefficient matrix of the same shape (continuous specs) or a conditional
probability table (binary specs). Phase 1 of every variable starts at
``t = tau_max + 1``; earlier times are pure noise.

CPT layout: ``cpts[j][k]`` has one row per parent configuration and columns
``(P(X=0), P(X=1))``. Parents are ordered by ``(var, lag)`` and the first
parent is the most significant bit of the row index.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SpecValidationError, UnstableSpecError
from .panel import (CONTINUOUS, DISCRETE, LaggedLink, PeriodicGraph, TimeSeriesPanel,
                    lcm_periodicities, phase_of)

NOISES = ("gaussian", "exponential", "binary")
LINKS = ("linear", "quadratic")
COEF_RANGE = (0.2, 0.8)
CPT_RANGE = (0.1, 0.9)
QUADRATIC_WEIGHT = 0.2
BLOWUP = 1e6


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for retries and trials."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


@dataclass
class ScmSpec:
    n: int
    T: int
    tau_max: int
    omegas: tuple
    phase_edges: list  # per variable: bool array (omega_j, n, tau_max)
    phase_coeffs: list | None = None  # per variable: float array (omega_j, n, tau_max)
    cpts: list | None = None  # per variable, per phase: float array (2**m, 2)
    noise: str = "gaussian"
    seed: int = 0
    density: float = 0.3
    link: str = "linear"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omegas = tuple(int(w) for w in self.omegas)
        self.phase_edges = [np.asarray(e, dtype=bool).reshape(w, self.n, self.tau_max)
                            for e, w in zip(self.phase_edges, self.omegas)]
        if self.phase_coeffs is not None:
            self.phase_coeffs = [np.asarray(c, dtype=float).reshape(w, self.n, self.tau_max)
                                 for c, w in zip(self.phase_coeffs, self.omegas)]
        if self.cpts is not None:
            self.cpts = [[np.asarray(row, dtype=float).reshape(-1, 2) for row in var]
                         for var in self.cpts]

    @property
    def anchor(self) -> int:
        return self.tau_max + 1

    @property
    def omega_max(self) -> int:
        return max(self.omegas)

    @property
    def period(self) -> int:
        return lcm_periodicities(self.omegas)

    @property
    def discrete(self) -> bool:
        return self.noise == "binary"

    def phase_parents(self, j: int, k: int) -> list:
        """Sorted parent links of variable ``j`` in 0-based phase ``k``."""
        i_idx, lag_idx = np.nonzero(self.phase_edges[j][k])
        return sorted(LaggedLink(int(i), int(l) + 1) for i, l in zip(i_idx, lag_idx))

    def to_graph(self) -> PeriodicGraph:
        phases = tuple(tuple(frozenset(self.phase_parents(j, k)) for k in range(w))
                       for j, w in enumerate(self.omegas))
        return PeriodicGraph(self.n, self.tau_max, self.omegas, phases, anchor=self.anchor)

    def validate(self) -> None:
        """Raise :class:`SpecValidationError` on any broken invariant."""
        if self.noise not in NOISES:
            raise SpecValidationError(f"unknown noise {self.noise!r}")
        if self.link not in LINKS:
            raise SpecValidationError(f"unknown link function {self.link!r}")
        if len(self.omegas) != self.n or len(self.phase_edges) != self.n:
            raise SpecValidationError("need one periodicity and edge stack per variable")
        if self.discrete:
            if self.cpts is None:
                raise SpecValidationError("binary spec without CPTs")
            for j in range(self.n):
                if len(self.cpts[j]) != self.omegas[j]:
                    raise SpecValidationError(f"variable {j}: CPT count != omega")
                for k in range(self.omegas[j]):
                    table = self.cpts[j][k]
                    rows = 2 ** len(self.phase_parents(j, k))
                    if table.shape != (rows, 2):
                        raise SpecValidationError(
                            f"variable {j} phase {k + 1}: CPT has {table.shape[0]} rows, needs {rows}")
                    if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1) > 1e-12):
                        raise SpecValidationError(f"variable {j} phase {k + 1}: CPT rows must be distributions")
        else:
            if self.phase_coeffs is None:
                raise SpecValidationError("continuous spec without coefficients")
            for j in range(self.n):
                if np.any((self.phase_coeffs[j] != 0) != self.phase_edges[j]):
                    raise SpecValidationError(f"variable {j}: coefficients must be nonzero exactly on edges")
        bad = repeated_phases(self)
        if bad:
            raise SpecValidationError(f"phases must differ; identical pairs {bad}")

    def to_dict(self) -> dict:
        doc = {"n": self.n, "T": self.T, "tau_max": self.tau_max, "omegas": list(self.omegas),
               "noise": self.noise, "seed": self.seed, "density": self.density, "link": self.link,
               "phase_edges": [e.astype(int).tolist() for e in self.phase_edges]}
        if self.phase_coeffs is not None:
            doc["phase_coeffs"] = [c.tolist() for c in self.phase_coeffs]
        if self.cpts is not None:
            doc["cpts"] = [[t.tolist() for t in var] for var in self.cpts]
        if self.meta:
            doc["meta"] = self.meta
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScmSpec":
        try:
            spec = cls(int(doc["n"]), int(doc["T"]), int(doc["tau_max"]), tuple(doc["omegas"]),
                       doc["phase_edges"], doc.get("phase_coeffs"), doc.get("cpts"),
                       doc.get("noise", "gaussian"), int(doc.get("seed", 0)),
                       float(doc.get("density", 0.3)), doc.get("link", "linear"),
                       dict(doc.get("meta", {})))
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecValidationError(f"malformed spec document: {exc}") from exc
        spec.validate()
        return spec


def repeated_phases(spec: ScmSpec) -> list:
    """Pairs ``(j, k1, k2)`` (1-based phases) whose edge sets coincide."""
    violations = []
    for j, edges in enumerate(spec.phase_edges):
        for k1, k2 in itertools.combinations(range(len(edges)), 2):
            if np.array_equal(edges[k1], edges[k2]):
                violations.append((j, k1 + 1, k2 + 1))
    return violations


def nested_phases(spec: ScmSpec) -> list:
    """Pairs ``(j, k1, k2)`` where one phase's edge set contains the other's.

    Distinct but nested phase sets satisfy the hard-mechanism-change check
    yet leave the max-parent-count selection rule unable to separate the
    true periodicity from 1.
    """
    out = []
    for j, edges in enumerate(spec.phase_edges):
        for k1, k2 in itertools.combinations(range(len(edges)), 2):
            a, b = edges[k1], edges[k2]
            if np.all(a <= b) or np.all(b <= a):
                out.append((j, k1 + 1, k2 + 1))
    return out


def _draw_phase_edges(rng, n, tau_max, omega, density, identifiable, max_tries):
    for _ in range(max_tries):
        edges = rng.random((omega, n, tau_max)) < density
        ok = True
        for a, b in itertools.combinations(edges, 2):
            if np.array_equal(a, b) or (identifiable and (np.all(a <= b) or np.all(b <= a))):
                ok = False
                break
        if ok:
            return edges
    return None


def random_spec(n, T, tau_max, omega_max, noise="gaussian", seed=0, density=0.3,
                link="linear", identifiable=True, max_tries=1000) -> ScmSpec:
    """Sample a random periodic SCM.

    One variable gets periodicity ``omega_max``; the others are uniform on
    ``1..omega_max``. Edges are Bernoulli(``density``); coefficients have
    magnitude in [0.2, 0.8] with random sign. Phase edge sets are redrawn
    until they are pairwise distinct and, when ``identifiable``, pairwise
    non-nested.
    """
    if min(n, T, tau_max, omega_max) < 1 or not (0 < density <= 1):
        raise ValueError("n, T, tau_max, omega_max must be >= 1 and density in (0, 1]")
    if noise not in NOISES or link not in LINKS:
        raise ValueError(f"bad noise/link ({noise!r}, {link!r})")
    rng = np.random.default_rng(seed)
    omegas = rng.integers(1, omega_max + 1, size=n)
    omegas[rng.integers(n)] = omega_max
    edges, coeffs, cpts = [], [], []
    for j in range(n):
        e = _draw_phase_edges(rng, n, tau_max, int(omegas[j]), density, identifiable, max_tries)
        if e is None:
            raise SpecValidationError(
                f"variable {j}: no {omegas[j]} distinct phase edge sets found with n={n}, "
                f"tau_max={tau_max}, density={density}")
        edges.append(e)
        mag = rng.uniform(*COEF_RANGE, size=e.shape)
        sign = rng.choice([-1.0, 1.0], size=e.shape)
        coeffs.append(np.where(e, mag * sign, 0.0))
        var_cpts = []
        for k in range(int(omegas[j])):
            m = int(e[k].sum())
            p1 = rng.uniform(*CPT_RANGE, size=2 ** m)
            var_cpts.append(np.column_stack([1.0 - p1, p1]))
        cpts.append(var_cpts)
    spec = ScmSpec(n, T, tau_max, tuple(int(w) for w in omegas), edges,
                   None if noise == "binary" else coeffs, cpts if noise == "binary" else None,
                   noise, int(seed), float(density), link)
    spec.validate()
    return spec


def _phase_tables(spec: ScmSpec):
    """Coefficient tensor (n, n, tau_max) for each residue of t modulo the period."""
    period = spec.period
    tables = np.zeros((period, spec.n, spec.n, spec.tau_max))
    for r in range(period):
        t = spec.anchor + r
        for j in range(spec.n):
            k = phase_of(t, spec.omegas[j], spec.anchor) - 1
            tables[(t - spec.anchor) % period, j] = spec.phase_coeffs[j][k]
    return tables


def spectral_radius(spec: ScmSpec) -> float:
    """Per-step growth rate of the linear recursion over one full period."""
    n, L = spec.n, spec.tau_max
    tables = _phase_tables(spec)
    mono = np.eye(n * L)
    for r in range(spec.period):
        comp = np.zeros((n * L, n * L))
        comp[:n] = tables[r].transpose(0, 2, 1).reshape(n, n * L)
        comp[n:, :-n] = np.eye(n * (L - 1))
        mono = comp @ mono
    rho = np.max(np.abs(np.linalg.eigvals(mono)))
    return float(rho ** (1.0 / spec.period))


def _noise(spec, rng):
    if spec.noise == "exponential":
        return rng.exponential(1.0, size=(spec.T, spec.n))
    return rng.standard_normal((spec.T, spec.n))


def gen_linear_panel(spec: ScmSpec, noise_scale: float = 1.0) -> TimeSeriesPanel:
    """Simulate a continuous panel; raises :class:`UnstableSpecError` on blow-up."""
    if spec.discrete:
        raise SpecValidationError("gen_linear_panel needs a continuous spec")
    rng = np.random.default_rng([spec.seed, 1])
    eps = _noise(spec, rng)
    X = np.zeros((spec.T, spec.n))
    L = spec.tau_max
    X[:L] = eps[:L]
    tables = _phase_tables(spec)
    quad = spec.link == "quadratic"
    for t in range(L + 1, spec.T + 1):
        window = X[t - 1 - np.arange(1, L + 1)].T  # (n, L): window[i, l-1] = X_{t-l}^i
        if quad:
            window = window + QUADRATIC_WEIGHT * window ** 2
        coef = tables[(t - spec.anchor) % spec.period]
        row = np.einsum("jil,il->j", coef, window) + noise_scale * eps[t - 1]
        if not np.all(np.isfinite(row)) or np.any(np.abs(row) > BLOWUP):
            raise UnstableSpecError(f"spec seed={spec.seed} diverged at t={t}")
        X[t - 1] = row
    return TimeSeriesPanel(X, tuple(f"X{j}" for j in range(spec.n)), CONTINUOUS)


def gen_binary_panel(spec: ScmSpec) -> TimeSeriesPanel:
    """Simulate a binary panel by sampling each child from its phase CPT."""
    if not spec.discrete or spec.cpts is None:
        raise SpecValidationError("gen_binary_panel needs a binary spec with CPTs")
    rng = np.random.default_rng([spec.seed, 1])
    u = rng.random((spec.T, spec.n))
    X = np.zeros((spec.T, spec.n), dtype=np.int64)
    L = spec.tau_max
    X[:L] = u[:L] < 0.5
    parents = [[spec.phase_parents(j, k) for k in range(w)] for j, w in enumerate(spec.omegas)]
    for t in range(L + 1, spec.T + 1):
        for j in range(spec.n):
            k = phase_of(t, spec.omegas[j], spec.anchor) - 1
            idx = 0
            for link in parents[j][k]:
                idx = 2 * idx + int(X[t - 1 - link.lag, link.var])
            table = spec.cpts[j][k]
            if idx >= table.shape[0]:
                raise SpecValidationError(f"variable {j} phase {k + 1}: missing CPT row {idx}")
            X[t - 1, j] = u[t - 1, j] < table[idx, 1]
    return TimeSeriesPanel(X.astype(float), tuple(f"X{j}" for j in range(spec.n)), DISCRETE)


def gen_panel(spec: ScmSpec, noise_scale: float = 1.0) -> TimeSeriesPanel:
    return gen_binary_panel(spec) if spec.discrete else gen_linear_panel(spec, noise_scale)


def simulate(n, T, tau_max, omega_max, noise="gaussian", seed=0, density=0.3, link="linear",
             identifiable=True, max_retries=200):
    """Draw a spec and a panel, redrawing the spec until the run stays bounded.

    Linear specs are also redrawn when the recursion is not contracting over a
    full period. Attempt ``a > 0`` uses ``derive_seed(seed, a)``.
    """
    for attempt in range(max_retries):
        s = seed if attempt == 0 else derive_seed(seed, attempt)
        spec = random_spec(n, T, tau_max, omega_max, noise, s, density, link, identifiable)
        if noise != "binary" and link == "linear" and spectral_radius(spec) >= 1.0:
            continue
        try:
            panel = gen_panel(spec)
        except UnstableSpecError:
            continue
        spec.meta = {"master_seed": int(seed), "attempt": attempt}
        return spec, panel
    raise UnstableSpecError(f"no stable spec after {max_retries} draws from seed {seed}")


@dataclass
class UnrolledDag:
    n: int
    horizon: int
    parents: dict  # (j, t) -> list of (i, s)

    def edges(self):
        for child, pars in self.parents.items():
            for p in pars:
                yield p, child


def unroll(spec: ScmSpec, horizon: int) -> UnrolledDag:
    """Time-unrolled DAG over ``t = 1..horizon``."""
    if horizon < spec.tau_max + 1:
        raise ValueError(f"horizon {horizon} shorter than tau_max + 1")
    parents = {}
    plinks = [[spec.phase_parents(j, k) for k in range(w)] for j, w in enumerate(spec.omegas)]
    for t in range(1, horizon + 1):
        for j in range(spec.n):
            if t <= spec.tau_max:
                parents[(j, t)] = []
                continue
            k = phase_of(t, spec.omegas[j], spec.anchor) - 1
            parents[(j, t)] = [(l.var, t - l.lag) for l in plinks[j][k]]
    return UnrolledDag(spec.n, horizon, parents)


def true_edge_array(spec: ScmSpec, period=None, max_lag=None) -> np.ndarray:
    """Ground truth as a boolean array [n, period, n, max_lag + 1]."""
    return spec.to_graph().to_edge_array(spec.period if period is None else period,
                                         spec.tau_max if max_lag is None else max_lag)
