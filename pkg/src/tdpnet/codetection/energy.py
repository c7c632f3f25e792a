"""Duty-cycle, battery-lifetime and data-volume arithmetic for a triggered sensor node."""
from __future__ import annotations

import struct
from dataclasses import dataclass

from ..exceptions import ParameterError, UndefinedMetricError

HOURS_PER_DAY = 24
SECONDS_PER_DAY = 86_400
# node_id, timestamp, duration, pos/neg trigger counts, peak, peak position
EVENT_RECORD_STRUCT = struct.Struct("<HdfHHff")


@dataclass(frozen=True)
class EnergyModel:
    """Currents in mA, capacity in mAh.

    ``avg_current_comm`` is the field-measured average of the radio
    processor; it is an input, not derived from traffic.
    """

    active_current_sense: float = 35.0
    sleep_current_sense: float = 0.035
    active_current_comm: float = 28.0
    sleep_current_comm: float = 0.005
    avg_current_comm: float = 0.845
    battery_capacity: float = 13_000.0

    def __post_init__(self):
        currents = (self.active_current_sense, self.sleep_current_sense, self.active_current_comm,
                    self.sleep_current_comm, self.avg_current_comm)
        if min(currents) < 0 or self.battery_capacity <= 0:
            raise ParameterError("currents must be >= 0 and capacity > 0")
        if self.sleep_current_sense > self.active_current_sense or \
                self.sleep_current_comm > self.active_current_comm:
            raise ParameterError("sleep current exceeds active current")


@dataclass(frozen=True)
class LifetimeEstimate:
    duty: float
    avg_current_sense: float
    avg_current_total: float
    energy_per_day: float
    lifetime_days: float


def duty_cycle(events_per_hour: float, mean_event_length: float) -> float:
    """Fraction of time the sensing chain is active, capped at 1."""
    if events_per_hour < 0 or mean_event_length < 0:
        raise ParameterError("rates and lengths must be non-negative")
    return min(1.0, events_per_hour * mean_event_length / 3600.0)


def estimate_lifetime(model: EnergyModel, duty: float) -> LifetimeEstimate:
    if not 0.0 <= duty <= 1.0:
        raise ParameterError(f"duty must lie in [0, 1], got {duty}")
    sense = duty * model.active_current_sense + (1.0 - duty) * model.sleep_current_sense
    total = sense + model.avg_current_comm
    if total <= 0:
        raise UndefinedMetricError("lifetime is undefined for zero current draw")
    per_day = HOURS_PER_DAY * total
    return LifetimeEstimate(duty, sense, total, per_day, model.battery_capacity / per_day)


def daily_acquisition_bytes(events_per_hour: float, mean_event_length: float,
                            sample_rate: float = 1000.0, bytes_per_sample: int = 3,
                            record_bytes: int = EVENT_RECORD_STRUCT.size) -> float:
    """Waveform plus event-record bytes recorded per sensor and day."""
    events = events_per_hour * HOURS_PER_DAY
    return events * (mean_event_length * sample_rate * bytes_per_sample + record_bytes)


def continuous_daily_bytes(sample_rate: float = 1000.0, bytes_per_sample: int = 3) -> float:
    return SECONDS_PER_DAY * sample_rate * bytes_per_sample


def format_report(est: LifetimeEstimate, extra: dict | None = None) -> str:
    """Key-value energy report, one ``key = value`` per line."""
    rows = {
        "duty_cycle_percent": f"{100 * est.duty:.4f}",
        "avg_current_sense_mA": f"{est.avg_current_sense:.4f}",
        "avg_current_total_mA": f"{est.avg_current_total:.4f}",
        "energy_per_day_mAh": f"{est.energy_per_day:.3f}",
        "lifetime_days": f"{est.lifetime_days:.1f}",
    }
    rows.update(extra or {})
    return "".join(f"{k} = {v}\n" for k, v in rows.items())
