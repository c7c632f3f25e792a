"""Seeded synthetic sensor-network scenarios for exercising the detection chain.

Sources arrive in bursts.  Each source is seen by every node independently
with ``detection_probability``, as a constant-amplitude sinusoidal pulse
with a small per-node delay.  This is a test-signal generator, not a model
of seismic wave propagation.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..exceptions import FormatError
from .analysis import CodetectionBin, codetect
from .energy import EnergyModel, LifetimeEstimate, duty_cycle, estimate_lifetime
from .trigger import EventRecord, TriggerConfig, TriggerDetector

CHUNK_SECONDS = 60


@dataclass(frozen=True)
class ScenarioConfig:
    nodes: int = 9
    duration_s: float = 3600.0
    seed: int = 0
    sample_rate: float = 1000.0
    schedule: str = "poisson"  # or "fixed": exact burst count, exact burst size
    bursts_per_hour: float = 3.127
    burst_size: float = 1.0
    burst_spacing_s: float = 5.0
    min_spacing_s: float = 0.0
    detection_probability: float = 1.0
    max_delay_s: float = 0.05
    pulse_duration_s: float = 2.5
    pulse_frequency_hz: float = 20.0
    pulse_amplitude: float = 1.0
    amplitude_spread: float = 1.0
    noise_std: float = 0.0
    upper_threshold: float = 0.5
    lower_threshold: float = -0.5
    bias: float = 0.0
    post_trigger_s: float = 1.0
    codetection_window_s: float = 0.5
    active_current_sense_ma: float = 35.0
    sleep_current_sense_ma: float = 0.035
    active_current_comm_ma: float = 28.0
    sleep_current_comm_ma: float = 0.005
    avg_current_comm_ma: float = 0.845
    battery_capacity_mah: float = 13_000.0

    @property
    def trigger(self) -> TriggerConfig:
        return TriggerConfig(self.upper_threshold, self.lower_threshold, self.post_trigger_s,
                             self.sample_rate, self.bias)

    @property
    def energy_model(self) -> EnergyModel:
        return EnergyModel(self.active_current_sense_ma, self.sleep_current_sense_ma,
                           self.active_current_comm_ma, self.sleep_current_comm_ma,
                           self.avg_current_comm_ma, self.battery_capacity_mah)


def parse_config(text: str) -> ScenarioConfig:
    """Parse flat ``key = value`` text; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise FormatError(f"line {lineno}: unknown key {key!r}")
        conv = {"int": int, "float": float, "str": str}[types[key]]
        try:
            values[key] = conv(value)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    cfg = ScenarioConfig(**values)
    if cfg.schedule not in ("poisson", "fixed"):
        raise FormatError(f"schedule must be 'poisson' or 'fixed', got {cfg.schedule!r}")
    if cfg.nodes < 0 or cfg.duration_s <= 0:
        raise FormatError("nodes must be >= 0 and duration_s > 0")
    return cfg


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


def source_times(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Sorted onset times of all sources."""
    hours = cfg.duration_s / 3600.0
    expected = cfg.bursts_per_hour * hours
    n_bursts = int(round(expected)) if cfg.schedule == "fixed" else int(rng.poisson(expected))
    span = max(cfg.duration_s - cfg.pulse_duration_s - cfg.post_trigger_s - cfg.max_delay_s, 0.0)
    starts = np.sort(rng.uniform(0.0, span, n_bursts))
    times = []
    for t0 in starts:
        if cfg.schedule == "fixed":
            size = max(1, int(round(cfg.burst_size)))
        else:
            size = int(rng.geometric(1.0 / max(cfg.burst_size, 1.0)))
        t = t0
        for _ in range(size):
            times.append(t)
            t += cfg.min_spacing_s + rng.exponential(cfg.burst_spacing_s)
    times = np.sort(np.asarray(times, dtype=np.float64))
    for i in range(1, len(times)):
        times[i] = max(times[i], times[i - 1] + cfg.min_spacing_s)
    return times[times <= span]


@dataclass(frozen=True)
class Pulse:
    start: int
    length: int
    amplitude: float


def node_pulses(cfg: ScenarioConfig, sources: np.ndarray, rng: np.random.Generator) -> list[list[Pulse]]:
    fs = cfg.sample_rate
    length = int(round(cfg.pulse_duration_s * fs))
    per_node = [[] for _ in range(cfg.nodes)]
    for t in sources:
        seen = rng.random(cfg.nodes) < cfg.detection_probability
        delays = rng.uniform(0.0, cfg.max_delay_s, cfg.nodes)
        amps = cfg.pulse_amplitude * rng.uniform(1.0, 1.0 + cfg.amplitude_spread, cfg.nodes)
        for node in np.flatnonzero(seen):
            per_node[node].append(Pulse(int(round((t + delays[node]) * fs)), length, float(amps[node])))
    return [sorted(p, key=lambda pulse: pulse.start) for p in per_node]


def _detect_node(cfg: ScenarioConfig, node: int, pulses: list[Pulse], seed) -> list[EventRecord]:
    fs = cfg.sample_rate
    total = int(round(cfg.duration_s * fs))
    chunk = int(CHUNK_SECONDS * fs)
    noise_rng = np.random.default_rng(seed)
    det = TriggerDetector(cfg.trigger, node)
    omega = 2.0 * np.pi * cfg.pulse_frequency_hz / fs
    events = []
    k = 0
    for c0 in range(0, total, chunk):
        n = min(chunk, total - c0)
        while k < len(pulses) and pulses[k].start + pulses[k].length <= c0:
            k += 1
        active = [p for p in pulses[k:] if p.start < c0 + n]
        if cfg.noise_std == 0.0 and not active:
            events += det.advance_quiet(n)
            continue
        x = np.full(n, cfg.bias)
        if cfg.noise_std:
            x += noise_rng.normal(0.0, cfg.noise_std, n)
        for p in active:
            lo, hi = max(p.start, c0), min(p.start + p.length, c0 + n)
            idx = np.arange(lo, hi)
            x[lo - c0:hi - c0] += p.amplitude * np.sin(omega * (idx - p.start))
        events += det.process(x)
    return events + det.finish()


@dataclass
class SimulationResult:
    config: ScenarioConfig
    sources: np.ndarray
    events: list[EventRecord]
    bins: list[CodetectionBin]
    events_per_hour_per_sensor: float
    mean_event_length: float
    lifetime: LifetimeEstimate


def simulate(cfg: ScenarioConfig, workers: int = 1) -> SimulationResult:
    """Generate signals for every node, detect events and aggregate.

    Per-node detection may run on worker threads; results are merged in
    ``(timestamp, node_id)`` order so output is identical for any worker count.
    """
    rng = np.random.default_rng(cfg.seed)
    sources = source_times(cfg, rng)
    pulses = node_pulses(cfg, sources, rng)
    seeds = np.random.SeedSequence(cfg.seed).spawn(max(cfg.nodes, 1))
    jobs = [(cfg, node, pulses[node], seeds[node]) for node in range(cfg.nodes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_node = list(pool.map(lambda a: _detect_node(*a), jobs))
    else:
        per_node = [_detect_node(*a) for a in jobs]
    events = sorted((e for evs in per_node for e in evs), key=lambda e: (e.event_timestamp, e.node_id))
    hours = cfg.duration_s / 3600.0
    rate = len(events) / (hours * cfg.nodes) if cfg.nodes else 0.0
    mean_len = float(np.mean([e.duration for e in events])) if events else 0.0
    life = estimate_lifetime(cfg.energy_model, duty_cycle(rate, mean_len))
    return SimulationResult(cfg, sources, events, codetect(events, cfg.codetection_window_s),
                            rate, mean_len, life)
