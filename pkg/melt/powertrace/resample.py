from __future__ import annotations

import numpy as np

import melt.const.error as error_const
import melt.schema.trace as trace_schema


def uniform_grid(t_first: float, t_last: float, rate_hz: float) -> np.ndarray:
    """Grid points t_first + k/rate_hz, closed with t_last so both endpoints are kept exactly."""
    count = int(np.floor((t_last - t_first) * rate_hz + 1e-9)) + 1
    grid = t_first + np.arange(count) / rate_hz
    if t_last - grid[-1] > 1e-6 / rate_hz:
        return np.append(grid, t_last)
    grid[-1] = t_last
    return grid


def resample(trace: trace_schema.PowerTrace, target_hz: float) -> trace_schema.PowerTrace:
    if target_hz <= 0:
        error_const.TraceError.INVALID_RATE.build(rate=target_hz).raise_()
    if not len(trace):
        error_const.TraceError.EMPTY_TRACE().raise_()

    grid = uniform_grid(trace.t_first, trace.t_last, target_hz)
    if trace.is_electrical:
        assert trace.current_ma is not None and trace.voltage_v is not None  # nosec: B101
        return trace.replace(
            ts_s=grid,
            current_ma=np.interp(grid, trace.ts_s, trace.current_ma),
            voltage_v=np.interp(grid, trace.ts_s, trace.voltage_v),
            nominal_rate_hz=float(target_hz),
            jitter_violations=0,
        )

    rails = {
        rail: trace_schema.RailSeries(ts_s=grid, power_mw=np.interp(grid, series.ts_s, series.power_mw))
        for rail, series in trace.rails.items()
    }
    return trace.replace(ts_s=grid, rails=rails, nominal_rate_hz=float(target_hz), jitter_violations=0)
