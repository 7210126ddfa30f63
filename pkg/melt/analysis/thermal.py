from __future__ import annotations

import numpy as np

import melt.const.error as error_const
import melt.schema.analysis as analysis_schema
import melt.schema.trace as trace_schema


def _window_values(series: trace_schema.TempSeries, t0: float, t1: float) -> np.ndarray | None:
    """Samples inside the window plus interpolated readings at both edges; None when the sensor misses the window."""
    if not len(series.ts_s) or series.ts_s[-1] < t0 or series.ts_s[0] > t1:
        return None
    inside = series.temp_c[(series.ts_s >= t0) & (series.ts_s <= t1)]
    edges = np.interp([t0, t1], series.ts_s, series.temp_c)
    return np.concatenate((edges, inside))


def thermal_summary(temperature: trace_schema.TempTrace, window: tuple[float, float]) -> analysis_schema.ThermalSummary:
    t0, t1 = window
    if not t0 < t1:
        error_const.AnalysisError.DEGENERATE_WINDOW.build(t0=t0, t1=t1).raise_()
    if temperature.is_empty:
        error_const.TraceError.EMPTY_TRACE().raise_()

    sensors: dict[str, analysis_schema.SensorStats] = {}
    pooled: list[np.ndarray] = []
    for name, series in sorted(temperature.sensors.items()):
        if (values := _window_values(series, t0, t1)) is None:
            continue
        pooled.append(values)
        sensors[name] = analysis_schema.SensorStats(
            max_c=float(values.max()), mean_c=float(values.mean()), sample_count=len(values)
        )

    if not sensors:
        error_const.TraceError.WINDOW_OUT_OF_RANGE.build(
            t0=t0, t1=t1, t_first=temperature.t_first, t_last=temperature.t_last
        ).raise_()
    everything = np.concatenate(pooled)
    return analysis_schema.ThermalSummary(
        window=(t0, t1), max_c=float(everything.max()), mean_c=float(everything.mean()), sensors=sensors
    )
