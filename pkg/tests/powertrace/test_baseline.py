import numpy as np
import pytest

import melt.analysis.energy as energy
import melt.const.device as device_const
import melt.const.error as error_const
import melt.powertrace.baseline as baseline
import melt.powertrace.parse as parse
import melt.schema.trace as trace_schema


@pytest.fixture
def ts() -> np.ndarray:
    return np.arange(1001) / 100.0


@pytest.fixture
def rail_trace() -> trace_schema.PowerTrace:
    samples = (("CPU", 90.0), ("TOTAL", 200.0))
    rows = "".join(f"{k / 100.0!r},{rail},{power!r}\n" for k in range(20) for rail, power in samples)
    return parse.parse_sysfs("ts_s,rail,power_mW\n" + rows)


def test_constant_idle(make_trace, ts):
    idle = baseline.estimate_baseline(make_trace(ts, np.full(len(ts), 380.0)), (0.0, 5.0))
    assert idle.mean_power_mw == pytest.approx(380.0)
    assert idle.sample_count == 501
    assert idle.window == (0.0, 5.0)


def test_two_level_idle_averages(make_trace):
    ts = np.arange(100) / 100.0
    idle = baseline.estimate_baseline(make_trace(ts, np.where(ts < 0.5, 300.0, 500.0)), (0.0, 0.99))
    assert idle.mean_power_mw == pytest.approx(400.0)


def test_rail_traces_use_the_total_rail(rail_trace):
    assert baseline.estimate_baseline(rail_trace, (0.0, 0.19)).mean_power_mw == pytest.approx(200.0)


@pytest.mark.parametrize(
    ("window", "member"),
    [
        ((20.0, 30.0), error_const.TraceError.WINDOW_OUT_OF_RANGE),
        ((1.0, 1.05), error_const.TraceError.TOO_FEW_SAMPLES),
        ((3.0, 2.0), error_const.AnalysisError.DEGENERATE_WINDOW),
    ],
)
def test_unusable_windows(make_trace, ts, window, member):
    with pytest.raises(error_const.MeltError) as exc_info:
        baseline.estimate_baseline(make_trace(ts, np.full(len(ts), 380.0)), window)
    assert exc_info.value.is_(member)


def test_minimum_sample_count_can_be_lowered(make_trace, ts):
    trace = make_trace(ts, np.full(len(ts), 380.0))
    assert baseline.estimate_baseline(trace, (1.0, 1.05), min_samples=3).sample_count == 6


def test_subtraction_in_the_power_domain(make_trace, ts):
    trace = make_trace(ts, np.full(len(ts), 5000.0), voltage_v=4.0)
    idle = trace_schema.BaselinePower(mean_power_mw=380.0, window=(0.0, 1.0), sample_count=101)

    net = baseline.subtract_baseline(trace, idle)

    np.testing.assert_allclose(net.power_mw, 4620.0)
    np.testing.assert_allclose(net.current_ma, 4620.0 / 4.0)
    np.testing.assert_array_equal(net.voltage_v, trace.voltage_v)
    assert net.is_net and net.baseline_mw == 380.0
    assert not trace.is_net


def test_subtracting_itself_leaves_zero(make_trace, ts):
    trace = make_trace(ts, np.full(len(ts), 380.0))
    net = baseline.subtract_baseline(trace, baseline.estimate_baseline(trace, (0.0, 10.0)))
    np.testing.assert_allclose(net.power_mw, 0.0, atol=1e-9)


def test_baseline_above_the_load_stays_negative(make_trace, ts):
    trace = make_trace(ts, np.full(len(ts), 300.0))
    idle = trace_schema.BaselinePower(mean_power_mw=380.0, window=(0.0, 1.0), sample_count=101)
    net = baseline.subtract_baseline(trace, idle)

    assert (net.power_mw < 0).all()
    assert energy.integrate(trace, (0.0, 10.0), idle).negative_net_flag


def test_rail_subtraction_touches_total_only(rail_trace):
    idle = trace_schema.BaselinePower(mean_power_mw=50.0, window=(0.0, 0.1), sample_count=11)

    net = baseline.subtract_baseline(rail_trace, idle)

    np.testing.assert_allclose(net.rails[device_const.Rail.TOTAL].power_mw, 150.0)
    np.testing.assert_allclose(net.rails[device_const.Rail.CPU].power_mw, 90.0)


def test_mean_removal_integrates_to_zero(make_trace):
    for seed in range(100):
        rng = np.random.default_rng(seed)
        ts = np.cumsum(rng.uniform(0.002, 0.008, 2000))
        trace = make_trace(ts, 1000.0 + 400.0 * rng.random(len(ts)))
        window = (float(ts[0]), float(ts[-1]))

        net = baseline.subtract_baseline(trace, baseline.estimate_baseline(trace, window))

        gross = energy.integrate(trace, window).energy_mwh_gross
        assert abs(energy.integrate(net, window).energy_mwh_gross) <= 1e-9 * gross, f"seed {seed}"


def test_single_step_is_weighted_by_time(make_trace):
    ts = np.arange(11, dtype=float)
    trace = make_trace(ts, np.where(ts < 10.0, 0.0, 1000.0))

    idle = baseline.estimate_baseline(trace, (0.0, 10.0))

    assert idle.mean_power_mw == pytest.approx(50.0)
    net = baseline.subtract_baseline(trace, idle)
    assert energy.integrate(net, (0.0, 10.0)).energy_mwh_gross == pytest.approx(0.0, abs=1e-12)


def test_window_past_the_trace_is_cut_to_its_span(make_trace, ts):
    trace = make_trace(ts, np.where(ts < 5.0, 300.0, 500.0))
    assert baseline.estimate_baseline(trace, (8.0, 12.0)).mean_power_mw == pytest.approx(500.0)
