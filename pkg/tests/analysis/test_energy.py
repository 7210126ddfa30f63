import numpy as np
import pytest

import melt.analysis.energy as energy
import melt.const.device as device_const
import melt.const.error as error_const
import melt.powertrace.baseline as baseline_module
import melt.schema.trace as trace_schema

RATE_HZ = 5000.0


def _synthetic_power(rng: np.random.Generator) -> tuple[float, float, float, float, float]:
    level = rng.uniform(500.0, 3000.0)
    slope = rng.uniform(-100.0, 100.0)
    amplitude = rng.uniform(0.0, level / 3)
    freq_hz = rng.uniform(0.1, 50.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    return level, slope, amplitude, freq_hz, phase


def _evaluate(params: tuple[float, float, float, float, float], t: np.ndarray) -> np.ndarray:
    level, slope, amplitude, freq_hz, phase = params
    return level + slope * t + amplitude * np.sin(2 * np.pi * freq_hz * t + phase)


def test_constant_power_closed_form(make_trace):
    ts = np.linspace(0.0, 10.0, 50_001)
    window = energy.integrate(make_trace(ts, np.full(len(ts), 5000.0)), (0.0, 10.0))
    assert window.energy_mwh_gross == pytest.approx(5000.0 * 10.0 / 3600.0, rel=1e-9)
    assert window.energy_mwh_gross == pytest.approx(13.8889, abs=1e-4)


def test_linear_ramp_is_exact(make_trace):
    ts = np.linspace(0.0, 1.0, 5001)
    window = energy.integrate(make_trace(ts, 1000.0 * ts), (0.0, 1.0))
    assert window.energy_mwh_gross == pytest.approx(0.138889, abs=1e-6)


def test_matches_dense_midpoint_sum(make_trace):
    for seed in range(100):
        rng = np.random.default_rng(seed)
        params = _synthetic_power(rng)
        ts = np.arange(int(2.0 * RATE_HZ) + 1) / RATE_HZ
        trace = make_trace(ts, _evaluate(params, ts))

        t0 = rng.uniform(0.0, 0.5)
        t1 = rng.uniform(1.2, 2.0)
        cells = 10 * int((t1 - t0) * RATE_HZ)
        width = (t1 - t0) / cells
        midpoints = t0 + (np.arange(cells) + 0.5) * width
        reference_mwh = float(np.sum(_evaluate(params, midpoints)) * width / 3600.0)

        window = energy.integrate(trace, (t0, t1))
        assert window.energy_mwh_gross == pytest.approx(reference_mwh, rel=1e-3), f"seed {seed}"


def test_mean_removal_leaves_nothing(make_trace):
    for seed in range(100):
        rng = np.random.default_rng(seed)
        ts = np.arange(5001) / RATE_HZ
        trace = make_trace(ts, _evaluate(_synthetic_power(rng), ts))
        span = (trace.t_first, trace.t_last)

        idle = baseline_module.estimate_baseline(trace, span)

        window = energy.integrate(trace, span, idle)
        assert abs(window.energy_mwh_net) <= 1e-9 * window.energy_mwh_gross, f"seed {seed}"


def test_windows_add_up_across_a_split_between_samples(make_trace):
    rng = np.random.default_rng(7)
    ts = np.arange(2001) / 1000.0
    trace = make_trace(ts, 2000.0 + 500.0 * rng.standard_normal(len(ts)))

    whole = energy.integrate(trace, (0.1, 1.9)).energy_mwh_gross
    left = energy.integrate(trace, (0.1, 0.73456)).energy_mwh_gross
    right = energy.integrate(trace, (0.73456, 1.9)).energy_mwh_gross
    assert left + right == pytest.approx(whole, rel=1e-12)


def test_energy_and_charge_agree_at_constant_voltage(make_trace):
    ts = np.arange(1001) / 1000.0
    trace = make_trace(ts, 3000.0 + 1000.0 * np.sin(ts * 7), voltage_v=3.8)
    window = energy.integrate(trace, (0.0, 1.0))
    assert window.charge_mah_gross is not None
    assert window.energy_mwh_gross == pytest.approx(window.charge_mah_gross * 3.8, rel=1e-12)


def test_net_charge_divides_net_power_by_voltage(make_trace):
    ts = np.arange(1001) / 1000.0
    trace = make_trace(ts, np.full(len(ts), 1380.0), voltage_v=4.0)
    baseline = trace_schema.BaselinePower(mean_power_mw=380.0, window=(0.0, 0.1), sample_count=101)
    window = energy.integrate(trace, (0.0, 1.0), baseline)
    assert window.energy_mwh_net == pytest.approx(1000.0 / 3600.0)
    assert window.charge_mah_net == pytest.approx(250.0 / 3600.0)
    assert window.energy_mwh == window.energy_mwh_net


def test_negative_net_is_flagged(make_trace):
    ts = np.arange(101) / 100.0
    trace = make_trace(ts, np.full(len(ts), 300.0))
    baseline = trace_schema.BaselinePower(mean_power_mw=400.0, window=(0.0, 0.5), sample_count=51)
    window = energy.integrate(trace, (0.0, 1.0), baseline)
    assert window.negative_net_flag
    assert window.energy_mwh_net < 0


def test_rail_traces_have_no_charge():
    ts = np.arange(101) / 100.0
    trace = trace_schema.PowerTrace(
        source=device_const.PowerSource.SYSFS,
        ts_s=ts,
        rails={device_const.Rail.TOTAL: trace_schema.RailSeries(ts_s=ts, power_mw=np.full(len(ts), 3600.0))},
        nominal_rate_hz=100.0,
    )
    window = energy.integrate(trace, (0.0, 1.0))
    assert window.energy_mwh_gross == pytest.approx(1.0)
    assert window.charge_mah_gross is None and window.charge_mah is None


@pytest.mark.parametrize(
    ("window", "member"),
    [
        ((0.5, 0.5), error_const.AnalysisError.DEGENERATE_WINDOW),
        ((0.7, 0.2), error_const.AnalysisError.DEGENERATE_WINDOW),
        ((-0.5, 0.5), error_const.TraceError.WINDOW_OUT_OF_RANGE),
        ((0.5, 1.5), error_const.TraceError.WINDOW_OUT_OF_RANGE),
    ],
)
def test_rejects_bad_windows(make_trace, window, member):
    ts = np.arange(101) / 100.0
    with pytest.raises(error_const.MeltError) as exc_info:
        energy.integrate(make_trace(ts, np.ones(len(ts))), window)
    assert exc_info.value.is_(member)
