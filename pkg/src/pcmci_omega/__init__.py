"""Causal discovery for multivariate time series with periodic mechanisms."""
from .ci_tests import (CiResult, OracleCI, d_separated, dsep_oracle_test, gsq_test,
                       lagged_design_matrix, parcorr_test)
from .estimators import PCMCI, PCMCIOmega
from .exceptions import (InsufficientDataError, PanelFormatError, PCMCIOmegaError,
                         SpecValidationError, UnstableSpecError)
from .metrics import adjacency_metrics, evaluate_graph, lcm_align, omega_accuracy
from .omega import discover, phase_parent_sets, select_omega
from .panel import (LaggedLink, PeriodicGraph, TimePartition, TimeSeriesPanel, build_partition,
                    chain_count, lcm_periodicities, phase_of, read_panel_csv, write_panel_csv)
from .pcmci import fdr_adjust, mci, pc1, run_pcmci
from .simulate import (ScmSpec, gen_binary_panel, gen_linear_panel, random_spec, simulate,
                       true_edge_array, unroll, repeated_phases)

__version__ = "0.1.0"

__all__ = [
    "CiResult", "OracleCI", "d_separated", "dsep_oracle_test", "gsq_test",
    "lagged_design_matrix", "parcorr_test", "PCMCI", "PCMCIOmega", "InsufficientDataError",
    "PanelFormatError", "PCMCIOmegaError", "SpecValidationError", "UnstableSpecError",
    "adjacency_metrics", "evaluate_graph", "lcm_align", "omega_accuracy", "discover",
    "phase_parent_sets", "select_omega", "LaggedLink", "PeriodicGraph", "TimePartition",
    "TimeSeriesPanel", "build_partition", "chain_count", "lcm_periodicities", "phase_of",
    "read_panel_csv", "write_panel_csv", "fdr_adjust", "mci", "pc1", "run_pcmci", "ScmSpec",
    "gen_binary_panel", "gen_linear_panel", "random_spec", "simulate", "true_edge_array",
    "unroll", "repeated_phases",
]
