import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdpnet.codetection import (EnergyModel, EventRecord, ScenarioConfig, TriggerConfig,
                                TriggerDetector, codetect, continuous_daily_bytes,
                                daily_acquisition_bytes, detect_events, duty_cycle,
                                estimate_lifetime, f1_score, interarrival_stats, parse_config,
                                read_events_csv, simulate, write_events_csv)
from tdpnet.codetection.energy import EVENT_RECORD_STRUCT
from tdpnet.exceptions import FormatError, InsufficientDataError, ParameterError, UndefinedMetricError

CFG = TriggerConfig(upper_threshold=0.5, lower_threshold=-0.5, post_trigger_interval=1.0)


def event(node, t, peak=1.0):
    return EventRecord(node, t, 1.0, 1, 0, peak, 0.0)


def test_silence_has_no_events():
    assert detect_events(np.zeros(5000), CFG) == []


def test_single_pulse():
    x = np.zeros(5000)
    x[1000:1100] = 2.0
    (ev,) = detect_events(x, CFG, node_id=4)
    assert ev.node_id == 4
    assert ev.event_timestamp == pytest.approx(1.0)
    assert ev.duration == pytest.approx(0.1 + 1.0)
    assert (ev.pos_trigger_count, ev.neg_trigger_count) == (1, 0)
    assert ev.peak_amplitude == 2.0
    assert 0.0 <= ev.peak_position < 0.1


@pytest.mark.parametrize("gap,n_events", [(999, 1), (1000, 2), (200, 1), (3000, 2)])
def test_pulse_merge_boundary(gap, n_events):
    # the second pulse starts ``gap`` inside samples after the first ends; q = 1000
    x = np.zeros(8000)
    x[100:200] = 1.0
    x[200 + gap:250 + gap] = -1.0
    events = detect_events(x, CFG)
    assert len(events) == n_events
    if n_events == 1:
        assert (events[0].pos_trigger_count, events[0].neg_trigger_count) == (1, 1)


def test_sinusoid_counts_crossings():
    t = np.arange(2000) / 1000
    x = np.where(t < 0.5, np.sin(2 * np.pi * 10 * t), 0.0)
    (ev,) = detect_events(x, CFG)
    assert ev.pos_trigger_count == 5 and ev.neg_trigger_count == 5
    assert ev.peak_amplitude == pytest.approx(1.0, abs=1e-3)


def test_open_event_closed_at_end():
    x = np.zeros(300)
    x[250:] = 1.0
    (ev,) = detect_events(x, CFG)
    assert ev.duration == pytest.approx(0.05 + 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(1, 4000), min_size=1, max_size=10))
def test_detection_is_chunk_invariant(seed, sizes):
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 0.25, 12_000) * (rng.random(12_000) < 0.6)
    whole = detect_events(x, CFG, 2, 10.0)
    det = TriggerDetector(CFG, 2, 10.0)
    got, pos = [], 0
    for size in sizes + [len(x)]:
        got += det.process(x[pos:pos + size])
        pos += size
    got += det.finish()
    assert got == whole


def test_quiet_fast_path_matches_samples():
    x = np.zeros(6000)
    x[10:60] = 3.0
    slow = TriggerDetector(CFG)
    fast = TriggerDetector(CFG)
    a = slow.process(x[:2000]) + slow.process(np.zeros(4000)) + slow.finish()
    b = fast.process(x[:2000]) + fast.advance_quiet(4000) + fast.finish()
    assert a == b


def test_trigger_config_validation():
    with pytest.raises(ParameterError):
        TriggerConfig(0.1, 0.2)
    with pytest.raises(ParameterError):
        TriggerConfig(1.0, -1.0, post_trigger_interval=0)


def test_codetection_windows():
    (b,) = codetect([event(0, 0.1, 2.0), event(1, 0.3, 5.0)], 0.5)
    assert (b.window_start, b.distinct_sensor_count, b.max_peak_amplitude) == (0.0, 2, 5.0)
    bins = codetect([event(0, 0.1), event(1, 1.1)], 0.5)
    assert [x.distinct_sensor_count for x in bins] == [1, 1]
    single = codetect([event(3, t) for t in (0.1, 0.2, 0.9, 5.0)], 0.5)
    assert all(x.distinct_sensor_count == 1 for x in single)
    assert codetect([], 0.5) == []


def test_sliding_codetection():
    bins = codetect([event(0, 0.4), event(1, 0.6), event(2, 1.2)], 0.5, sliding=True)
    assert [x.distinct_sensor_count for x in bins] == [2, 1, 1]


def test_interarrival_stats():
    s = interarrival_stats([event(0, t) for t in (0.0, 1.0, 2.0, 3.0)])
    np.testing.assert_allclose(s.deltas, 1.0)
    assert s.mean == 1.0
    s = interarrival_stats([event(0, 0.0), event(0, 0.05), event(1, 0.2)])
    assert list(s.counts) == [1, 1]
    np.testing.assert_allclose(s.edges, [0.0, 0.1, 0.2])
    assert s.cdf_y[-1] == 1.0
    with pytest.raises(InsufficientDataError):
        interarrival_stats([event(0, 1.0)])


def test_burst_scenario_cdf_shape():
    cfg = ScenarioConfig(nodes=1, duration_s=7 * 86400, bursts_per_hour=3.127 / 7, burst_size=7,
                         burst_spacing_s=5, min_spacing_s=4, seed=3)
    s = interarrival_stats(simulate(cfg).events)
    below = 1 - s.fraction_above(100)
    assert 0.75 < below < 0.95
    assert s.fraction_above(20) > s.fraction_above(100) > 0.05


def test_duty_cycle():
    assert duty_cycle(3.127, 3.5) == pytest.approx(0.00304, abs=1e-5)
    assert duty_cycle(0, 3.5) == 0.0
    assert duty_cycle(3600, 1.0) == 1.0
    assert duty_cycle(7200, 1.0) == 1.0


def test_lifetime_estimate():
    est = estimate_lifetime(EnergyModel(), duty_cycle(3.127, 3.5))
    assert est.avg_current_sense == pytest.approx(0.141, rel=0.01)
    assert est.avg_current_total == pytest.approx(0.986, rel=0.01)
    assert est.energy_per_day == pytest.approx(23.667, rel=0.01)
    assert est.lifetime_days == pytest.approx(549, rel=0.01)
    assert estimate_lifetime(EnergyModel(), 0.0).avg_current_sense == pytest.approx(0.035)
    assert estimate_lifetime(EnergyModel(), 1.0).avg_current_sense == pytest.approx(35.0)
    with pytest.raises(ParameterError):
        estimate_lifetime(EnergyModel(), 1.5)


def test_data_volume():
    assert EVENT_RECORD_STRUCT.size == 26
    daily = daily_acquisition_bytes(3.127, 3.5)
    assert daily == pytest.approx(3.127 * 24 * (3.5 * 1000 * 3 + 26))
    assert abs(daily / 788_000 - 1) < 0.15
    assert abs(continuous_daily_bytes() / daily / 328 - 1) < 0.10


@pytest.mark.parametrize("tp,fp,fn,f1", [(10, 0, 0, 1.0), (0, 3, 0, 0.0), (0, 3, 4, 0.0), (8, 2, 2, 0.8)])
def test_f1(tp, fp, fn, f1):
    assert f1_score(tp, fp, fn) == pytest.approx(f1)


def test_f1_undefined():
    with pytest.raises(UndefinedMetricError):
        f1_score(0, 0, 0)
    with pytest.raises(ValueError):
        f1_score(-1, 0, 0)


def test_events_csv_round_trip(tmp_path):
    events = detect_events(np.r_[np.zeros(100), np.ones(50), np.zeros(3000)], CFG, 7, 12.5)
    write_events_csv(events, tmp_path / "e.csv")
    back = read_events_csv(tmp_path / "e.csv")
    assert [(e.node_id, e.pos_trigger_count) for e in back] == [(7, 1)]
    assert back[0].event_timestamp == pytest.approx(12.6)
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(FormatError):
        read_events_csv(tmp_path / "bad.csv")


def test_parse_config():
    cfg = parse_config("nodes = 3  # three\n\nschedule = fixed\nduration_s = 60\n")
    assert (cfg.nodes, cfg.schedule, cfg.duration_s) == (3, "fixed", 60.0)
    for text in ("nodes 3", "colour = red", "nodes = many", "schedule = sometimes"):
        with pytest.raises(FormatError):
            parse_config(text)


def test_two_node_simultaneous_pulses():
    cfg = ScenarioConfig(nodes=2, duration_s=600, schedule="fixed", bursts_per_hour=12,
                         max_delay_s=0.0, seed=4)
    res = simulate(cfg)
    assert len(res.sources) == 2
    assert [b.distinct_sensor_count for b in res.bins] == [2, 2]


def test_tumbling_bins_can_split_a_codetection():
    events = [event(0, 0.49), event(1, 0.51)]
    assert [b.distinct_sensor_count for b in codetect(events, 0.5)] == [1, 1]
    assert codetect(events, 0.5, sliding=True)[0].distinct_sensor_count == 2


def test_zero_source_scenario():
    res = simulate(ScenarioConfig(nodes=3, duration_s=600, bursts_per_hour=0.0))
    assert res.events == [] and res.bins == []
    assert res.lifetime.avg_current_sense == pytest.approx(0.035)


def test_simulation_is_deterministic_across_workers():
    cfg = ScenarioConfig(nodes=4, duration_s=3600, bursts_per_hour=6, burst_size=3, noise_std=0.05,
                         seed=11)
    assert simulate(cfg, workers=1).events == simulate(cfg, workers=3).events
