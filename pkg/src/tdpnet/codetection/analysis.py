"""Network-level analytics over event records: co-detection, inter-arrival times, F1."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..exceptions import FormatError, InsufficientDataError, UndefinedMetricError
from .trigger import EventRecord

EVENT_CSV_HEADER = ("node_id", "timestamp_s", "duration_s", "pos_trig", "neg_trig", "peak", "peak_pos_s")
_BIN_GUARD = 1e-9


@dataclass(frozen=True)
class CodetectionBin:
    window_start: float
    distinct_sensor_count: int
    max_peak_amplitude: float


def codetect(events: Iterable[EventRecord], window: float = 0.5,
             sliding: bool = False) -> list[CodetectionBin]:
    """Group events from many nodes into co-detection windows.

    By default windows tumble from t = 0 with width ``window``.  With
    ``sliding=True`` a window of that width opens at every event timestamp.
    Empty windows are omitted.
    """
    evs = sorted(events, key=lambda e: (e.event_timestamp, e.node_id))
    if not evs:
        return []
    ts = np.array([e.event_timestamp for e in evs])
    bins = []
    if sliding:
        for i, t0 in enumerate(ts):
            j = np.searchsorted(ts, t0 + window, side="left")
            group = evs[i:j]
            bins.append(CodetectionBin(float(t0), len({e.node_id for e in group}),
                                       max(e.peak_amplitude for e in group)))
        return bins
    idx = np.floor(ts / window + _BIN_GUARD).astype(np.int64)
    for k in np.unique(idx):
        group = [e for e, i in zip(evs, idx) if i == k]
        bins.append(CodetectionBin(float(k * window), len({e.node_id for e in group}),
                                   max(e.peak_amplitude for e in group)))
    return bins


@dataclass
class InterarrivalStats:
    deltas: np.ndarray
    bin_width: float
    counts: np.ndarray
    edges: np.ndarray
    mean: float
    cdf_x: np.ndarray
    cdf_y: np.ndarray

    def fraction_above(self, seconds: float) -> float:
        return float(np.mean(self.deltas > seconds))


def interarrival_stats(events: Iterable[EventRecord], bin_width: float = 0.1) -> InterarrivalStats:
    """Histogram, mean and empirical CDF of network-wide inter-arrival times."""
    ts = np.sort([e.event_timestamp for e in events])
    if len(ts) < 2:
        raise InsufficientDataError("need at least two events")
    deltas = np.diff(ts)
    idx = np.floor(deltas / bin_width + _BIN_GUARD).astype(np.int64)
    counts = np.bincount(idx)
    edges = np.arange(len(counts) + 1) * bin_width
    x = np.sort(deltas)
    y = np.arange(1, len(x) + 1) / len(x)
    return InterarrivalStats(deltas, bin_width, counts, edges, float(deltas.mean()), x, y)


def f1_score(tp: int, fp: int, fn: int) -> float:
    """``2 tp / (2 tp + fn + fp)``."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    denom = 2 * tp + fn + fp
    if denom == 0:
        raise UndefinedMetricError("F1 is undefined when tp = fp = fn = 0")
    return 2 * tp / denom


# CSV ------------------------------------------------------------------------

def write_events_csv(events: Sequence[EventRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_CSV_HEADER)
        for e in events:
            w.writerow([e.node_id, f"{e.event_timestamp:.6f}", f"{e.duration:.6f}", e.pos_trigger_count,
                        e.neg_trigger_count, f"{e.peak_amplitude:.9g}", f"{e.peak_position:.6f}"])


def read_events_csv(path) -> list[EventRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != EVENT_CSV_HEADER:
        raise FormatError(f"{path}: missing event CSV header")
    out = []
    for row in rows[1:]:
        try:
            out.append(EventRecord(int(row[0]), float(row[1]), float(row[2]), int(row[3]),
                                   int(row[4]), float(row[5]), float(row[6])))
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}: bad event row {row}") from exc
    return out


def write_codetection_csv(bins: Sequence[CodetectionBin], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f.name for f in fields(CodetectionBin)])
        for b in bins:
            w.writerow([f"{b.window_start:.6f}", b.distinct_sensor_count, f"{b.max_peak_amplitude:.9g}"])


def write_interarrival_csv(stats: InterarrivalStats, hist_path, cdf_path) -> None:
    Path(hist_path).write_text("bin_start_s,count\n" + "".join(
        f"{e:.1f},{c}\n" for e, c in zip(stats.edges[:-1], stats.counts)))
    Path(cdf_path).write_text("interarrival_s,cumulative_fraction\n" + "".join(
        f"{x:.6f},{y:.6f}\n" for x, y in zip(stats.cdf_x, stats.cdf_y)))

