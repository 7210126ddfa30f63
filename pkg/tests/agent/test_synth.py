import numpy as np
import pytest

import melt.agent.sim as sim
import melt.agent.synth as synth
import melt.analysis.energy as energy
import melt.const.device as device_const
import melt.const.time as time_const
import melt.schema.event as event_schema

START_NS = 1_700_000_000 * time_const.NS_PER_S


@pytest.fixture
def flat_profile(quiet_profile) -> event_schema.SimProfile:
    """Prefill and decode draw the same 5 W with no tail."""
    return quiet_profile.model_copy(update={"prefill_power_mw": 5000.0, "tail_tau_s": 0.0})


def _one_prompt(profile: event_schema.SimProfile, prompt_tokens: int, gen_tokens: int) -> list[event_schema.Event]:
    events, _ = sim.sim_execute_prompt(profile, prompt_tokens, gen_tokens, sim.SimState(now_ns=START_NS))
    return events


def test_ten_seconds_of_decode(flat_profile):
    # 80 tokens of prefill take 1 s, 250 decode tokens another 10 s
    events = _one_prompt(flat_profile, 80, 250)
    trace = synth.sim_power_trace(flat_profile, events, host_start_ns=START_NS, host_end_ns=START_NS + 12 * 10**9)

    decode = energy.integrate(trace, (1.0, 11.0))
    assert decode.energy_mwh_gross == pytest.approx(13.8889, rel=1e-4)
    assert decode.charge_mah_gross == pytest.approx(13.8889 / 3.8, rel=1e-4)


def test_samples_sit_on_the_nominal_grid(quiet_profile):
    events = _one_prompt(quiet_profile, 80, 25)
    trace = synth.sim_power_trace(quiet_profile, events)

    assert trace.source == device_const.PowerSource.SIM
    assert trace.t_first == 0.0
    assert trace.t_last == pytest.approx(2.0)
    assert trace.nominal_rate_hz == 1000.0
    np.testing.assert_allclose(np.diff(trace.ts_s), 1e-3)
    np.testing.assert_allclose(trace.voltage_v, 3.8)


def test_phase_levels(flat_profile):
    profile = flat_profile.model_copy(update={"prefill_power_mw": 6000.0})
    events = _one_prompt(profile, 160, 50)
    trace = synth.sim_power_trace(profile, events, host_start_ns=START_NS - 2 * 10**9, host_end_ns=START_NS + 6 * 10**9)

    def level_at(t_s: float) -> float:
        return float(trace.power_mw[np.searchsorted(trace.ts_s, t_s)])

    assert level_at(1.0) == pytest.approx(380.0)
    assert level_at(3.0) == pytest.approx(6000.0)
    assert level_at(5.0) == pytest.approx(5000.0)
    assert level_at(7.0) == pytest.approx(380.0)


def test_tail_decays_back_to_idle(quiet_profile):
    events = _one_prompt(quiet_profile, 80, 25)
    trace = synth.sim_power_trace(quiet_profile, events, host_end_ns=START_NS + 10 * 10**9)
    after = trace.power_mw[trace.ts_s > 2.0]
    assert np.all(np.diff(after) <= 1e-9)
    assert after[0] > 4000.0
    assert after[-1] == pytest.approx(380.0, abs=5.0)


def test_trace_integrates_to_the_phase_sum(quiet_profile):
    events = _one_prompt(quiet_profile, 160, 50)
    window = {"host_start_ns": START_NS - 10**9, "host_end_ns": START_NS + 5 * 10**9}
    trace = synth.sim_power_trace(quiet_profile, events, **window)
    spans = synth.active_spans(quiet_profile, events, lambda ns: (ns - START_NS + 10**9) / time_const.NS_PER_S)
    timeline = synth.PowerTimeline.build(spans, quiet_profile.idle_power_mw, quiet_profile.tail_tau_s, -1.0)

    expected_mwh = float(timeline.energy(np.array([6.0]))[0] - timeline.energy(np.array([0.0]))[0]) / 3600
    assert energy.integrate(trace, (0.0, 6.0)).energy_mwh_gross == pytest.approx(expected_mwh, rel=1e-4)


def test_clock_offset_moves_events_into_host_time(quiet_profile):
    offset_ns = 250 * time_const.NS_PER_MS
    events = _one_prompt(quiet_profile, 160, 50)
    shifted = [event.shifted(offset_ns) for event in events]

    plain = synth.sim_power_trace(quiet_profile, events, host_start_ns=START_NS, host_end_ns=START_NS + 5 * 10**9)
    moved = synth.sim_power_trace(
        quiet_profile, shifted, host_start_ns=START_NS, host_end_ns=START_NS + 5 * 10**9, offset_ns=offset_ns
    )
    np.testing.assert_allclose(moved.power_mw, plain.power_mw)


def test_rails_share_the_total(quiet_profile):
    events = _one_prompt(quiet_profile, 80, 25)
    trace = synth.sim_power_trace(quiet_profile, events, rails=True)

    assert trace.source == device_const.PowerSource.SYSFS
    shares = [series.power_mw for rail, series in trace.rails.items() if rail != device_const.Rail.TOTAL]
    np.testing.assert_allclose(np.sum(shares, axis=0), trace.power_mw)
    np.testing.assert_allclose(trace.rails[device_const.Rail.GPU].power_mw, 0.45 * trace.power_mw)


def test_noise_follows_seed_and_run(quiet_profile):
    profile = quiet_profile.model_copy(update={"noise_std_mw": 100.0, "seed": 3})
    events = _one_prompt(profile, 80, 25)

    first = synth.sim_power_trace(profile, events).power_mw
    again = synth.sim_power_trace(profile, events).power_mw
    other_run = synth.sim_power_trace(profile, events, run_index=1).power_mw
    other_seed = synth.sim_power_trace(profile.with_seed(4), events).power_mw

    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other_run)
    assert not np.array_equal(first, other_seed)


def test_temperature_is_deterministic_and_bounded(quiet_profile):
    profile = quiet_profile.model_copy(update={"temp_noise_std_c": 0.1, "seed": 8})
    events = _one_prompt(profile, 160, 50)
    window = {"host_start_ns": START_NS - 10**9, "host_end_ns": START_NS + 30 * 10**9}

    first = synth.sim_temperature_trace(profile, events, **window)
    again = synth.sim_temperature_trace(profile, events, **window)

    assert set(first.sensors) == {"soc", "skin"}
    for name, series in first.sensors.items():
        np.testing.assert_array_equal(series.temp_c, again.sensors[name].temp_c)
        assert len(series.ts_s) == 31 * 5 + 1


def test_soc_heats_faster_than_skin(quiet_profile):
    events = _one_prompt(quiet_profile, 160, 50)
    temperature = synth.sim_temperature_trace(
        quiet_profile, events, host_start_ns=START_NS - 10**9, host_end_ns=START_NS + 5 * 10**9
    )
    soc, skin = temperature.sensors["soc"].temp_c, temperature.sensors["skin"].temp_c
    idle_target = quiet_profile.ambient_c + quiet_profile.thermal_k_c_per_w * 0.38

    assert soc[0] == pytest.approx(idle_target)
    assert soc.max() > skin.max()
    assert soc.max() < quiet_profile.ambient_c + quiet_profile.thermal_k_c_per_w * 6.0
