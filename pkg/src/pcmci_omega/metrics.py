"""Evaluation of phase-resolved lagged graphs against ground truth.

Edge arrays are boolean with shape ``[n, period, n, max_lag + 1]``; entry
``[j, p, i, tau]`` is the link ``X^i_{t-tau} -> X^j_t`` at the times ``t``
with ``(t - 1) % period == p``. Because the phase axis is tied to absolute
time, arrays of different periods are compared by tiling both to a common
period.
"""
from __future__ import annotations

import json
import math
from typing import NamedTuple

import numpy as np

from .panel import PeriodicGraph


class AdjacencyScores(NamedTuple):
    precision: float
    recall: float
    f1: float


def _check_edge_array(arr, name):
    arr = np.asarray(arr)
    if arr.ndim != 4 or arr.shape[0] != arr.shape[2] or arr.shape[1] < 1:
        raise ValueError(f"{name}: expected shape [n, period, n, max_lag + 1], got {arr.shape}")
    return arr.astype(bool)


def pad_lags(arr: np.ndarray, max_lag: int) -> np.ndarray:
    """Extend the lag axis with empty slices up to ``max_lag``."""
    extra = max_lag + 1 - arr.shape[3]
    if extra < 0:
        raise ValueError(f"array already has lags beyond {max_lag}")
    return np.pad(arr, ((0, 0), (0, 0), (0, 0), (0, extra))) if extra else arr


def lcm_align(truth, est):
    """Tile both arrays along the phase axis to the LCM of their periods."""
    truth = _check_edge_array(truth, "truth")
    est = _check_edge_array(est, "est")
    if truth.shape[0] != est.shape[0]:
        raise ValueError(f"variable counts differ: {truth.shape[0]} vs {est.shape[0]}")
    lag = max(truth.shape[3], est.shape[3]) - 1
    truth, est = pad_lags(truth, lag), pad_lags(est, lag)
    period = math.lcm(truth.shape[1], est.shape[1])
    return (np.tile(truth, (1, period // truth.shape[1], 1, 1)),
            np.tile(est, (1, period // est.shape[1], 1, 1)))


def confusion_counts(truth, est):
    """(TP, FP, FN) over all lagged entries; the lag-0 slice is ignored."""
    truth = _check_edge_array(truth, "truth")
    est = _check_edge_array(est, "est")
    if truth.shape != est.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {est.shape}; align first")
    t, e = truth[..., 1:], est[..., 1:]
    return int(np.sum(t & e)), int(np.sum(~t & e)), int(np.sum(t & ~e))


def adjacency_metrics(truth, est) -> AdjacencyScores:
    """Adjacency precision, recall and F1 of aligned arrays.

    With no predicted edges precision is 1 when there are also no true
    edges, else 0; recall mirrors this when there are no true edges.
    """
    tp, fp, fn = confusion_counts(truth, est)
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return AdjacencyScores(precision, recall, f1)


def omega_accuracy(true_omega: int, est_omega: int, omega_ub: int) -> bool:
    """Whether ``est_omega`` is a multiple of ``true_omega`` within the bound."""
    if min(true_omega, est_omega, omega_ub) < 1:
        raise ValueError("periodicities and bound must be >= 1")
    return est_omega % true_omega == 0 and est_omega <= omega_ub


def collapse(arr) -> np.ndarray:
    """Logical OR over the phase axis, keeping a phase axis of length 1."""
    return _check_edge_array(arr, "array").any(axis=1, keepdims=True)


def evaluate_graph(truth: PeriodicGraph, est: PeriodicGraph, omega_ub: int | None = None) -> dict:
    """Adjacency scores plus the fraction of variables with an acceptable period."""
    lag = max(truth.tau_max, est.tau_max)
    a, b = lcm_align(truth.to_edge_array(truth.period, lag), est.to_edge_array(est.period, lag))
    scores = adjacency_metrics(a, b)
    ub = omega_ub if omega_ub is not None else max(max(est.omegas), max(truth.omegas))
    hits = [omega_accuracy(w, w_hat, ub) for w, w_hat in zip(truth.omegas, est.omegas)]
    return {"precision": scores.precision, "recall": scores.recall, "f1": scores.f1,
            "omega_acc": float(np.mean(hits))}


def edge_array_to_json(arr) -> str:
    arr = _check_edge_array(arr, "array")
    return json.dumps({"shape": list(arr.shape), "data": arr.astype(int).tolist()})


def edge_array_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    arr = np.asarray(doc["data"], dtype=bool)
    if list(arr.shape) != list(doc["shape"]):
        raise ValueError(f"edge array shape header {doc['shape']} disagrees with data {list(arr.shape)}")
    return _check_edge_array(arr, "array")
