"""Dual-threshold event triggering on a digitised geophone signal."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import ParameterError


@dataclass(frozen=True)
class TriggerConfig:
    upper_threshold: float
    lower_threshold: float
    post_trigger_interval: float = 1.0
    sample_rate: float = 1000.0
    bias: float = 0.0

    def __post_init__(self):
        if not self.lower_threshold < self.bias < self.upper_threshold:
            raise ParameterError("thresholds must satisfy lower < bias < upper")
        if self.post_trigger_interval <= 0 or self.sample_rate <= 0:
            raise ParameterError("post-trigger interval and sample rate must be positive")

    @property
    def quiet_samples(self) -> int:
        return max(1, int(round(self.post_trigger_interval * self.sample_rate)))


@dataclass(frozen=True)
class EventRecord:
    node_id: int
    event_timestamp: float
    duration: float
    pos_trigger_count: int
    neg_trigger_count: int
    peak_amplitude: float
    peak_position: float


@dataclass
class _OpenEvent:
    start: int
    last_out: int
    pos: int = 0
    neg: int = 0
    peak: float = -1.0
    peak_idx: int = 0

    def close_index(self, quiet: int) -> int:
        return self.last_out + 1 + quiet


class TriggerDetector:
    """Streaming event detector for one node.

    An event opens at the first sample outside ``[lower, upper]`` and closes
    once the signal has stayed inside for the post-trigger interval.  Rising
    crossings of the upper threshold and falling crossings of the lower one
    are counted, and the peak ``|x - bias|`` over the event span is recorded
    together with its position.  Output does not depend on how the signal is
    chunked.
    """

    def __init__(self, cfg: TriggerConfig, node_id: int = 0, start_time: float = 0.0):
        self.cfg = cfg
        self.node_id = node_id
        self.start_time = start_time
        self.offset = 0
        self._prev = cfg.bias
        self._open: Optional[_OpenEvent] = None

    def _record(self, ev: _OpenEvent) -> EventRecord:
        fs = self.cfg.sample_rate
        end = ev.close_index(self.cfg.quiet_samples)
        return EventRecord(self.node_id, self.start_time + ev.start / fs, (end - ev.start) / fs,
                           ev.pos, ev.neg, float(ev.peak), (ev.peak_idx - ev.start) / fs)

    def _scan_peak(self, ev: _OpenEvent, amp: np.ndarray, lo: int, hi: int) -> None:
        # lo/hi are local indices into the current chunk
        if hi <= lo:
            return
        i = int(np.argmax(amp[lo:hi]))
        if amp[lo + i] > ev.peak:
            ev.peak = float(amp[lo + i])
            ev.peak_idx = self.offset + lo + i

    def process(self, samples) -> list[EventRecord]:
        """Consume a chunk and return the events that closed within it."""
        x = np.asarray(samples, dtype=np.float64).reshape(-1)
        n = len(x)
        if n == 0:
            return []
        cfg = self.cfg
        q = cfg.quiet_samples
        prev = np.concatenate([[self._prev], x[:-1]])
        rising = (x > cfg.upper_threshold) & (prev <= cfg.upper_threshold)
        falling = (x < cfg.lower_threshold) & (prev >= cfg.lower_threshold)
        out_local = np.flatnonzero((x > cfg.upper_threshold) | (x < cfg.lower_threshold))
        amp = np.abs(x - cfg.bias)
        closed = []

        # clusters of outside samples separated by fewer than q inside samples
        if len(out_local):
            breaks = np.flatnonzero(np.diff(out_local) - 1 >= q)
            firsts = np.concatenate([[0], breaks + 1])
            lasts = np.concatenate([breaks, [len(out_local) - 1]])
        else:
            firsts = lasts = np.zeros(0, dtype=int)

        cursor = 0  # local index up to which the open event's peak is scanned
        for a, b in zip(firsts, lasts):
            s_loc, e_loc = int(out_local[a]), int(out_local[b])
            ev = self._open
            if ev is not None and self.offset + s_loc >= ev.close_index(q):
                close_loc = ev.close_index(q) - self.offset
                self._scan_peak(ev, amp, cursor, close_loc)
                closed.append(self._record(ev))
                ev = self._open = None
            if ev is None:
                ev = self._open = _OpenEvent(start=self.offset + s_loc, last_out=self.offset + e_loc)
                cursor = s_loc
            ev.last_out = self.offset + e_loc
            idx = out_local[a:b + 1]
            ev.pos += int(rising[idx].sum())
            ev.neg += int(falling[idx].sum())
            self._scan_peak(ev, amp, cursor, e_loc + 1)
            cursor = e_loc + 1

        ev = self._open
        if ev is not None:
            close_loc = ev.close_index(q) - self.offset
            self._scan_peak(ev, amp, cursor, min(close_loc, n))
            if close_loc <= n:
                closed.append(self._record(ev))
                self._open = None
        self._prev = float(x[-1])
        self.offset += n
        return closed

    def advance_quiet(self, n: int) -> list[EventRecord]:
        """Consume ``n`` samples equal to the bias without materialising them."""
        closed = []
        ev = self._open
        if ev is not None and ev.close_index(self.cfg.quiet_samples) <= self.offset + n:
            closed.append(self._record(ev))
            self._open = None
        if n:
            self._prev = self.cfg.bias
        self.offset += n
        return closed

    def finish(self) -> list[EventRecord]:
        """Close a still-open event as if the signal went quiet at stream end."""
        if self._open is None:
            return []
        rec = self._record(self._open)
        self._open = None
        return [rec]


def detect_events(samples, cfg: TriggerConfig, node_id: int = 0,
                  start_time: float = 0.0) -> list[EventRecord]:
    """All events in a finite signal."""
    det = TriggerDetector(cfg, node_id, start_time)
    return det.process(samples) + det.finish()
