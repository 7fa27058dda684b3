"""Changepoint flagging on posterior streams.

Rate changes: gamma KL divergence against a sliding window of posterior
snapshots, thresholded with a MAD rule; a flag needs ``kappa`` consecutive
outliers, after which the window is rebuilt from scratch (unless the
no-reset mode is selected, used when changes arrive in quick succession).

Membership changes: JS divergence on the categorical membership rows,
MAD on the logged values, guarded by argmax-stability conditions.  The
membership stream is never reset after a flag.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln

LOG2 = float(np.log(2.0))


class DetectorConfigError(ValueError):
    """Detector configuration violates an invariant."""


@dataclass
class DetectorConfig:
    b1: int = 10          # convergence burn-in, discarded
    b2: int = 10          # sample burn-in, fills the window
    kappa: int = 2        # consecutive outliers / comparison lags
    w_kl: float = 10.0
    w_js: float = 2.0
    js_floor: float = 1e-12
    reset_on_flag: bool = True

    def __post_init__(self):
        if self.kappa < 1:
            raise DetectorConfigError("kappa must be >= 1")
        if self.b1 < self.kappa + 1 or self.b2 < self.kappa + 1:
            raise DetectorConfigError("b1 and b2 must be >= kappa + 1")
        if self.w_kl < 0 or self.w_js < 0:
            raise DetectorConfigError("thresholds must be non-negative")
        if not self.js_floor > 0:
            raise DetectorConfigError("js_floor must be positive")


def kl_gamma(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """KL divergence between Gamma(a1, b1) and Gamma(a2, b2) (shape, rate)."""
    a1, b1 = p1
    a2, b2 = p2
    if min(a1, b1, a2, b2) <= 0:
        raise ValueError("gamma parameters must be positive")
    return (a2 * np.log(b1 / b2) - (gammaln(a1) - gammaln(a2))
            + (a1 - a2) * digamma(a1) - (b1 - b2) * a1 / b1)


def js_categorical(q1: np.ndarray, q2: np.ndarray) -> float:
    """JS divergence between two categorical distributions, in [0, log 2]."""
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    if q1.shape != q2.shape:
        raise ValueError("dimension mismatch")
    m = 0.5 * (q1 + q2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(q1 > 0, q1 * (np.log(q1) - np.log(m)), 0.0)
        t2 = np.where(q2 > 0, q2 * (np.log(q2) - np.log(m)), 0.0)
    return float(0.5 * (t1.sum() + t2.sum()))


def mad_outlier(window: np.ndarray, candidate: float, threshold: float) -> bool:
    """Strict MAD test: |candidate - med| > threshold * MAD (ties pass)."""
    window = np.asarray(window, dtype=np.float64)
    if window.size == 0:
        raise ValueError("window must be non-empty")
    med = np.median(window)
    mad = np.median(np.abs(window - med))
    return bool(abs(candidate - med) > threshold * mad)


class RateChangeDetector:
    """Per-block detector on the stream of gamma posterior snapshots."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.window: deque[tuple[float, float]] = deque()
        self.step = 0
        self.outlier_run = 0
        self.flag_steps: list[int] = []
        self.last_statistic: float | None = None

    def _kl_pool(self) -> np.ndarray:
        cfg = self.config
        win = list(self.window)
        values = []
        for s in range(1, cfg.kappa + 1):
            for ell in range(s, cfg.b2):
                values.append(kl_gamma(win[ell], win[ell - s]))
        return np.asarray(values)

    def update(self, alpha: float, beta: float) -> bool:
        """Feed one posterior snapshot; return True iff a change is flagged."""
        cfg = self.config
        self.step += 1
        snapshot = (float(alpha), float(beta))
        if self.step <= cfg.b1:
            return False
        if len(self.window) < cfg.b2:
            self.window.append(snapshot)
            return False
        pool = self._kl_pool()
        candidate = kl_gamma(snapshot, self.window[-1])
        self.last_statistic = candidate
        med = np.median(pool)
        mad = np.median(np.abs(pool - med))
        if abs(candidate - med) <= cfg.w_kl * mad:
            self.window.popleft()
            self.window.append(snapshot)
            self.outlier_run = 0
            return False
        self.outlier_run += 1
        guard = cfg.b1 + cfg.b2 + cfg.kappa
        if self.outlier_run >= cfg.kappa and self.step > guard:
            self.outlier_run = 0
            self.flag_steps.append(self.step)
            if cfg.reset_on_flag:
                self.window.clear()
            else:
                self.window.popleft()
                self.window.append(snapshot)
            return True
        self.outlier_run = min(self.outlier_run, cfg.kappa)
        return False


class MembershipChangeDetector:
    """Per-node detector on the stream of membership probability rows."""

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.window: deque[np.ndarray] = deque()
        self.argmax_hist: deque[int] = deque(maxlen=config.kappa)
        self.step = 0
        self.flag_steps: list[int] = []
        self.last_statistic: float | None = None

    def _js_pool(self) -> np.ndarray:
        cfg = self.config
        win = list(self.window)
        values = []
        for s in range(1, cfg.kappa + 1):
            for ell in range(s, cfg.b2):
                values.append(np.log(js_categorical(win[ell], win[ell - s])
                                     + cfg.js_floor))
        return np.asarray(values)

    def update(self, tau_row: np.ndarray) -> bool:
        cfg = self.config
        self.step += 1
        row = np.asarray(tau_row, dtype=np.float64).copy()
        label = int(np.argmax(row))
        prev_labels = list(self.argmax_hist)
        self.argmax_hist.append(label)
        if self.step <= cfg.b1:
            return False
        if len(self.window) < cfg.b2:
            self.window.append(row)
            return False
        pool = self._js_pool()
        candidate = np.log(js_categorical(row, self.window[-1]) + cfg.js_floor)
        self.last_statistic = candidate
        med = np.median(pool)
        mad = np.median(np.abs(pool - med))
        outlier = abs(candidate - med) > cfg.w_js * mad
        stable_history = (len(prev_labels) == cfg.kappa
                          and len(set(prev_labels)) == 1)
        moved = stable_history and all(label != p for p in prev_labels)
        guard = cfg.b1 + cfg.b2 + cfg.kappa
        flagged = outlier and moved and self.step > guard
        if outlier:
            # freeze, mirroring the rate window; no post-flag reset here
            pass
        else:
            self.window.popleft()
            self.window.append(row)
        if flagged:
            self.flag_steps.append(self.step)
        return flagged


@dataclass
class DetectionEvent:
    step: int
    kind: str                     # "rate" | "membership"
    key: tuple                    # block (k, m) or node (i,)
    statistic: float
    threshold: float
    flagged: bool


class NetworkDetector:
    """Runs one rate detector per block and one membership detector per node."""

    def __init__(self, config: DetectorConfig, n_groups: int, n_nodes: int):
        self.config = config
        self.rate_detectors = {(k, m): RateChangeDetector(config)
                               for k in range(n_groups) for m in range(n_groups)}
        self.node_detectors = {i: MembershipChangeDetector(config)
                               for i in range(n_nodes)}
        self.events: list[DetectionEvent] = []

    def update(self, rate_alpha: np.ndarray, rate_beta: np.ndarray,
               tau: np.ndarray) -> list[DetectionEvent]:
        new_events = []
        for (k, m), det in self.rate_detectors.items():
            flagged = det.update(rate_alpha[k, m], rate_beta[k, m])
            if flagged:
                new_events.append(DetectionEvent(
                    det.step, "rate", (k, m),
                    float(det.last_statistic), self.config.w_kl, True))
        for i, det in self.node_detectors.items():
            flagged = det.update(tau[i])
            if flagged:
                new_events.append(DetectionEvent(
                    det.step, "membership", (i,),
                    float(det.last_statistic), self.config.w_js, True))
        self.events.extend(new_events)
        return new_events
