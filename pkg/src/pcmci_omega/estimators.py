"""scikit-learn style estimators wrapping the discovery functions."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ci_tests import get_ci_test
from .omega import discover
from .panel import CONTINUOUS, DISCRETE, TimeSeriesPanel
from .pcmci import run_pcmci


def _as_panel(X, test, names=None) -> TimeSeriesPanel:
    if isinstance(X, TimeSeriesPanel):
        return X
    kind = DISCRETE if test == "gsq" else CONTINUOUS
    if names is None and hasattr(X, "columns"):
        names = [str(c) for c in X.columns]
    return TimeSeriesPanel.from_array(X, names, kind)


def _check_alpha(name, value):
    if not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


class PCMCI(BaseEstimator):
    """Stationary lagged causal discovery (PC1 condition selection + MCI).

    Parameters
    ----------
    tau_ub : int
        Largest lag considered.
    alpha_pc : float
        Significance level of the condition-selection stage.
    alpha_mci : float
        Significance level for reporting a link.
    test : str or callable
        ``"parcorr"``, ``"gsq"`` or a callable with the CI test signature.
    fdr : bool
        Apply Benjamini-Hochberg adjustment to the MCI p-values.
    p_max, q_max, p_x : int or None
        Condition-selection limits; ``None`` means the defaults.

    Attributes
    ----------
    graph_ : PeriodicGraph
        Single-phase graph of significant links.
    p_values_ : ndarray of shape (n, n, tau_ub + 1)
        ``p_values_[j, i, tau]`` for the link ``X^i_{t-tau} -> X^j_t``.
    superset_ : SupersetParents
        Significant links per variable, strongest first.
    """

    def __init__(self, tau_ub=1, alpha_pc=0.2, alpha_mci=0.05, test="parcorr", fdr=False,
                 p_max=None, q_max=1, p_x=None):
        self.tau_ub = tau_ub
        self.alpha_pc = alpha_pc
        self.alpha_mci = alpha_mci
        self.test = test
        self.fdr = fdr
        self.p_max = p_max
        self.q_max = q_max
        self.p_x = p_x

    def _check_params(self):
        if int(self.tau_ub) < 1:
            raise ValueError(f"tau_ub must be >= 1, got {self.tau_ub}")
        _check_alpha("alpha_pc", self.alpha_pc)
        _check_alpha("alpha_mci", self.alpha_mci)
        get_ci_test(self.test)

    def fit(self, X, y=None, names=None):
        """Fit on an array of shape (T, n) or a :class:`TimeSeriesPanel`."""
        self._check_params()
        panel = _as_panel(X, self.test, names)
        res = run_pcmci(panel, int(self.tau_ub), self.alpha_pc, self.alpha_mci, self.test,
                        self.p_max, self.q_max, self.p_x, self.fdr)
        pv = np.ones((panel.n, panel.n, int(self.tau_ub) + 1))
        for (j, i, tau), p in res.mci.p_values.items():
            pv[j, i, tau] = p
        self.graph_ = res.graph
        self.p_values_ = pv
        self.superset_ = res.superset
        self.pc1_parents_ = res.pc1_parents
        self.result_ = res
        self.n_features_in_ = panel.n
        return self

    def edge_array(self):
        check_is_fitted(self, "graph_")
        return self.graph_.to_edge_array()


class PCMCIOmega(BaseEstimator):
    """Causal discovery for series whose mechanisms repeat periodically.

    Each variable gets its own periodicity estimate and one parent set per
    phase of that periodicity.

    Parameters
    ----------
    omega_ub : int
        Largest periodicity considered.
    tau_ub : int
        Largest lag considered.
    alpha_pc, alpha_mci : float
        Significance levels of condition selection and of link tests.
    test : str or callable
        ``"parcorr"``, ``"gsq"`` or a callable with the CI test signature.
    turning_point : bool
        Prefer the first strict local minimum of the scan profile.
    fdr : bool
        Benjamini-Hochberg adjustment in the stationary stage.
    superset : {"mci", "pc1"}
        Candidate parents refined per phase.
    n_jobs : int
        Workers for the periodicity scan.

    Attributes
    ----------
    graph_ : PeriodicGraph
    omegas_ : tuple of int
    scan_ : OmegaScan
    superset_ : SupersetParents
    pcmci_ : PcmciResult
    """

    def __init__(self, omega_ub=2, tau_ub=1, alpha_pc=0.2, alpha_mci=0.05, test="parcorr",
                 turning_point=True, fdr=False, superset="mci", p_max=None, q_max=1, p_x=None,
                 n_jobs=1):
        self.omega_ub = omega_ub
        self.tau_ub = tau_ub
        self.alpha_pc = alpha_pc
        self.alpha_mci = alpha_mci
        self.test = test
        self.turning_point = turning_point
        self.fdr = fdr
        self.superset = superset
        self.p_max = p_max
        self.q_max = q_max
        self.p_x = p_x
        self.n_jobs = n_jobs

    def fit(self, X, y=None, names=None):
        """Fit on an array of shape (T, n) or a :class:`TimeSeriesPanel`."""
        _check_alpha("alpha_pc", self.alpha_pc)
        _check_alpha("alpha_mci", self.alpha_mci)
        get_ci_test(self.test)
        panel = _as_panel(X, self.test, names)
        res = discover(panel, int(self.omega_ub), int(self.tau_ub), self.alpha_pc, self.alpha_mci,
                       self.test, self.turning_point, self.fdr, self.p_max, self.q_max, self.p_x,
                       self.superset, self.n_jobs)
        self.graph_ = res.graph
        self.omegas_ = res.omegas
        self.scan_ = res.scan
        self.pcmci_ = res.pcmci
        self.superset_ = res.pcmci.superset if self.superset == "mci" else res.pcmci.pc1_parents
        self.result_ = res
        self.n_features_in_ = panel.n
        return self

    def edge_array(self, period=None):
        check_is_fitted(self, "graph_")
        return self.graph_.to_edge_array(period)
