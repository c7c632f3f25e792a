"""Event-triggered sensing chain: triggering, co-detection, statistics and energy."""
from .analysis import (CodetectionBin, InterarrivalStats, codetect, f1_score, interarrival_stats,
                       read_events_csv, write_codetection_csv, write_events_csv,
                       write_interarrival_csv)
from .energy import (EnergyModel, LifetimeEstimate, continuous_daily_bytes, daily_acquisition_bytes,
                     duty_cycle, estimate_lifetime)
from .synthetic import ScenarioConfig, SimulationResult, load_config, parse_config, simulate
from .trigger import EventRecord, TriggerConfig, TriggerDetector, detect_events

__all__ = [
    "CodetectionBin", "InterarrivalStats", "codetect", "f1_score", "interarrival_stats",
    "read_events_csv", "write_codetection_csv", "write_events_csv", "write_interarrival_csv",
    "EnergyModel", "LifetimeEstimate", "continuous_daily_bytes", "daily_acquisition_bytes",
    "duty_cycle", "estimate_lifetime", "ScenarioConfig", "SimulationResult", "load_config",
    "parse_config", "simulate", "EventRecord", "TriggerConfig", "TriggerDetector", "detect_events",
]
