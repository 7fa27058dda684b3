"""Evaluation against simulator ground truth: ARI, CCD/DNF, rate RMSE."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np


def ari(labels_a: np.ndarray, labels_b: np.ndarray) -> float:
    """Adjusted Rand index between two labelings (permutation-invariant)."""
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise ValueError("labelings must have equal length")
    n = labels_a.size
    _, a_idx = np.unique(labels_a, return_inverse=True)
    _, b_idx = np.unique(labels_b, return_inverse=True)
    contingency = np.zeros((a_idx.max() + 1, b_idx.max() + 1))
    np.add.at(contingency, (a_idx, b_idx), 1)
    comb = lambda x: x * (x - 1) / 2.0
    sum_ij = comb(contingency).sum()
    sum_a = comb(contingency.sum(axis=1)).sum()
    sum_b = comb(contingency.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


@dataclass
class DetectionRecord:
    """True change times and flagged detections, keyed by block or node."""

    true_changes: list[tuple[float, tuple]] = field(default_factory=list)
    flagged: list[tuple[float, tuple]] = field(default_factory=list)


def ccd_dnf(record: DetectionRecord, horizon: float | None = None,
            ) -> tuple[float, float, dict]:
    """Proportion of changes correctly detected, and detections not false.

    A true change is matched by the first subsequent flag arriving before
    the next true change for the same key (a flag after a missed change
    counts for the latest change only).  Counts are pooled across keys;
    the per-key breakdown is returned alongside.  With no detections at
    all, DNF is defined as 1.
    """
    true_by_key = defaultdict(list)
    flags_by_key = defaultdict(list)
    for t, key in record.true_changes:
        true_by_key[key].append(t)
    for t, key in record.flagged:
        flags_by_key[key].append(t)
    total_c = total_d = total_t = 0
    per_key = {}
    keys = set(true_by_key) | set(flags_by_key)
    for key in keys:
        truths = sorted(true_by_key.get(key, []))
        flags = sorted(flags_by_key.get(key, []))
        c, d = len(truths), len(flags)
        matched = 0
        for idx, t_star in enumerate(truths):
            upper = truths[idx + 1] if idx + 1 < len(truths) else (
                horizon if horizon is not None else np.inf)
            if any(t_star < f <= upper for f in flags):
                matched += 1
        total_c += c
        total_d += d
        total_t += matched
        per_key[key] = {"C": c, "D": d, "T": matched}
    ccd = total_t / total_c if total_c else 1.0
    dnf = total_t / total_d if total_d else 1.0
    return ccd, dnf, per_key


def rate_rmse(mean_trace: np.ndarray, true_trace: np.ndarray,
              burn_in: int = 0) -> np.ndarray:
    """Per-block RMSE of the posterior-mean trace against the truth.

    Both traces are (steps, K, K); the first ``burn_in`` steps are excluded.
    """
    mean_trace = np.asarray(mean_trace, dtype=np.float64)
    true_trace = np.asarray(true_trace, dtype=np.float64)
    if mean_trace.shape != true_trace.shape:
        raise ValueError("trace shapes must match")
    diff = mean_trace[burn_in:] - true_trace[burn_in:]
    if diff.shape[0] == 0:
        raise ValueError("no steps left after burn-in")
    return np.sqrt((diff ** 2).mean(axis=0))
