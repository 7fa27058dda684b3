"""Event-stream ingestion and artifact persistence.

Event CSV format: header ``source,dest,timestamp``; timestamps are either
plain non-negative seconds or ISO-8601 datetimes (normalized to seconds
from the earliest timestamp's midnight, so calendar data starts inside
the first batch).
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .model import EventBatch
from .simulate import SimOutput

_DURATION_UNITS = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0, "w": 604800.0}


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def parse_duration(text: str | float) -> float:
    """Parse a batch width: plain number or number + unit suffix ("1w")."""
    if isinstance(text, (int, float)):
        return float(text)
    text = text.strip()
    if text and text[-1].lower() in _DURATION_UNITS:
        return float(text[:-1]) * _DURATION_UNITS[text[-1].lower()]
    return float(text)


def _parse_timestamp(raw: str, line_no: int) -> tuple[float, bool]:
    try:
        return float(raw), False
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise DataError(f"line {line_no}: unparseable timestamp {raw!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp(), True


@dataclass
class NodeRegistry:
    """Stable integer node ids in first-appearance order."""

    names: list[str] = field(default_factory=list)
    ids: dict[str, int] = field(default_factory=dict)

    def get(self, name: str) -> int:
        if name not in self.ids:
            self.ids[name] = len(self.names)
            self.names.append(name)
        return self.ids[name]

    def __len__(self) -> int:
        return len(self.names)


def ingest_csv(path: str | Path, delta: float | str,
               horizon: float | None = None,
               ) -> tuple[NodeRegistry, list[EventBatch]]:
    """Read an event CSV into per-interval count batches.

    Numeric timestamps are used as-is; ISO timestamps are normalized to
    seconds since midnight (UTC) of the earliest timestamp's day.  Batch r
    holds events with normalized t in ((r-1)*delta, r*delta]; an event at
    exactly t=0 is placed in batch 1.
    """
    delta = parse_duration(delta)
    registry = NodeRegistry()
    srcs, dsts, times = [], [], []
    any_iso = False
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return registry, []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise DataError(f"line {line_no}: expected 3 columns, got {len(row)}")
            t, is_iso = _parse_timestamp(row[2], line_no)
            any_iso = any_iso or is_iso
            srcs.append(registry.get(row[0].strip()))
            dsts.append(registry.get(row[1].strip()))
            times.append(t)
    if not times:
        return registry, []
    src = np.asarray(srcs, dtype=np.int64)
    dst = np.asarray(dsts, dtype=np.int64)
    t = np.asarray(times, dtype=np.float64)
    if any_iso:
        day = 86400.0
        t = t - np.floor(t.min() / day) * day
    if np.any(t < 0):
        raise DataError("timestamps must be non-negative after normalization")
    order = np.argsort(t, kind="stable")
    src, dst, t = src[order], dst[order], t[order]
    if horizon is None:
        horizon = float(np.ceil(t.max() / delta - 1e-12) * delta)
        horizon = max(horizon, delta)
    n_batches = int(np.ceil(horizon / delta - 1e-12))
    if t.max() > horizon + 1e-9:
        raise DataError("event timestamp beyond the requested horizon")
    edges = delta * np.arange(1, n_batches + 1)
    idx = np.searchsorted(edges, t, side="left")
    idx = np.clip(idx, 0, n_batches - 1)
    n = len(registry)
    flat = idx * n * n + src * n + dst
    counts = np.bincount(flat, minlength=n_batches * n * n).reshape(n_batches, n, n)
    batches = [EventBatch(counts[r], r + 1, delta) for r in range(n_batches)]
    return registry, batches


def write_events_csv(path: str | Path, output: SimOutput) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "dest", "timestamp"])
        for i, j, t in zip(output.src, output.dst, output.times):
            writer.writerow([int(i), int(j), repr(float(t))])


def write_ground_truth(path: str | Path, output: SimOutput,
                       horizon: float) -> None:
    payload = {
        "horizon": horizon,
        "adjacency_density": float(np.mean(output.adjacency)),
        "membership_times": output.true_memberships.times.tolist(),
        "memberships": [v.tolist() for v in output.true_memberships.values],
        "rate_times": output.true_rates.times.tolist(),
        "rates": [np.asarray(v).tolist() for v in output.true_rates.values],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def read_ground_truth(path: str | Path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    payload["memberships"] = [np.asarray(v) for v in payload["memberships"]]
    payload["rates"] = [np.asarray(v) for v in payload["rates"]]
    return payload


class TraceWriter:
    """Writes one flat JSON record per engine step."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w")

    def write_step(self, step: int, rate_alpha: np.ndarray, rate_beta: np.ndarray,
                   gamma: np.ndarray | None, tau: np.ndarray,
                   sigma: np.ndarray | None = None,
                   occupancy: np.ndarray | None = None) -> None:
        record = {
            "r": step,
            "alpha": np.asarray(rate_alpha).tolist(),
            "beta": np.asarray(rate_beta).tolist(),
            "gamma": None if gamma is None else np.asarray(gamma).tolist(),
            "tau": np.asarray(tau).tolist(),
            "tau_argmax": np.argmax(tau, axis=1).tolist(),
            "sigma_summary": None if sigma is None else {
                "mean": float(np.mean(sigma)),
                "frac_certain": float(np.mean(sigma >= 1.0)),
            },
            "occupancy": None if occupancy is None
            else np.asarray(occupancy).tolist(),
        }
        self._fh.write(json.dumps(record) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path: str | Path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


class DetectionLog:
    """JSON-lines log of detector decisions."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w")

    def write(self, step: int, kind: str, key, statistic: float,
              threshold: float, flagged: bool) -> None:
        key = list(key) if isinstance(key, (tuple, list)) else key
        self._fh.write(json.dumps({
            "step": step, "kind": kind, "key": key,
            "statistic": statistic, "threshold": threshold,
            "flagged": flagged}) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
