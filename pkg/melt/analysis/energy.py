from __future__ import annotations

import logging

import numpy as np

import melt.const.error as error_const
import melt.const.time as time_const
import melt.schema.analysis as analysis_schema
import melt.schema.trace as trace_schema

logger = logging.getLogger(__name__)


def trapezoid_window(ts_s: np.ndarray, values: np.ndarray, t0: float, t1: float) -> float:
    """
    Trapezoidal integral of `values` over [t0, t1].
    Window edges that fall between samples get a linearly interpolated sample.
    """
    left = int(np.searchsorted(ts_s, t0, side="right"))
    right = int(np.searchsorted(ts_s, t1, side="left"))
    inner_ts, inner_values = ts_s[left:right], values[left:right]

    x = np.concatenate(([t0], inner_ts, [t1]))
    y = np.concatenate(([np.interp(t0, ts_s, values)], inner_values, [np.interp(t1, ts_s, values)]))
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)


def check_window(trace: trace_schema.PowerTrace, window: tuple[float, float]) -> None:
    t0, t1 = window
    if not t0 < t1:
        error_const.AnalysisError.DEGENERATE_WINDOW.build(t0=t0, t1=t1).raise_()
    if not len(trace):
        error_const.TraceError.EMPTY_TRACE().raise_()
    if t0 < trace.t_first or t1 > trace.t_last:
        error_const.TraceError.WINDOW_OUT_OF_RANGE.build(
            t0=t0, t1=t1, t_first=trace.t_first, t_last=trace.t_last
        ).raise_()


def integrate(
    trace: trace_schema.PowerTrace,
    window: tuple[float, float],
    baseline: trace_schema.BaselinePower | None = None,
    label: str = "",
) -> analysis_schema.EnergyWindow:
    """
    Energy (mWh) and, for traces with current, charge (mAh) drawn inside the window.
    With a baseline the net figures subtract it in the power domain, and net charge divides by the sample voltage.
    """
    check_window(trace, window)
    t0, t1 = window
    power_mw = trace.power_mw

    gross_mwh = trapezoid_window(trace.ts_s, power_mw, t0, t1) / time_const.S_PER_HOUR
    gross_mah = None
    if trace.is_electrical:
        gross_mah = trapezoid_window(trace.ts_s, trace.current_ma, t0, t1) / time_const.S_PER_HOUR

    net_mwh = net_mah = None
    if baseline is not None:
        net_power_mw = power_mw - baseline.mean_power_mw
        net_mwh = trapezoid_window(trace.ts_s, net_power_mw, t0, t1) / time_const.S_PER_HOUR
        if trace.is_electrical:
            net_mah = trapezoid_window(trace.ts_s, net_power_mw / trace.voltage_v, t0, t1) / time_const.S_PER_HOUR

    negative = net_mwh is not None and net_mwh < 0
    if negative:
        logger.warning(f"Net energy over {label or window} is negative ({net_mwh:.6f} mWh), baseline exceeds load")
    return analysis_schema.EnergyWindow(
        label=label,
        window=(t0, t1),
        energy_mwh_gross=gross_mwh,
        energy_mwh_net=net_mwh,
        charge_mah_gross=gross_mah,
        charge_mah_net=net_mah,
        negative_net_flag=negative,
    )
