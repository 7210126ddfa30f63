from __future__ import annotations

import logging
import math

import numpy as np

import melt.analysis.energy as energy
import melt.config.project as project_config
import melt.const.device as device_const
import melt.const.error as error_const
import melt.schema.trace as trace_schema

logger = logging.getLogger(__name__)


def estimate_baseline(
    trace: trace_schema.PowerTrace,
    idle_window: tuple[float, float],
    min_samples: int | None = None,
) -> trace_schema.BaselinePower:
    """
    Time-weighted mean power over the idle window, as the trapezoid integral divided by the window length.
    Subtracting it leaves exactly zero net energy over the same window. A window reaching past the trace is
    cut to the trace span; `sample_count` counts the samples inside (edges inclusive).
    """
    if min_samples is None:
        min_samples = project_config.get_melt_setting().analysis.baseline_min_samples

    t0, t1 = idle_window
    if not t0 < t1:
        error_const.AnalysisError.DEGENERATE_WINDOW.build(t0=t0, t1=t1).raise_()
    if not len(trace):
        error_const.TraceError.EMPTY_TRACE().raise_()
    if t1 < trace.t_first or t0 > trace.t_last:
        error_const.TraceError.WINDOW_OUT_OF_RANGE.build(
            t0=t0, t1=t1, t_first=trace.t_first, t_last=trace.t_last
        ).raise_()

    inside = (trace.ts_s >= t0) & (trace.ts_s <= t1)
    if (count := int(np.count_nonzero(inside))) < min_samples:
        error_const.TraceError.TOO_FEW_SAMPLES.build(t0=t0, t1=t1, count=count, minimum=min_samples).raise_()

    lo, hi = max(t0, trace.t_first), min(t1, trace.t_last)
    if not lo < hi:
        error_const.AnalysisError.DEGENERATE_WINDOW.build(t0=lo, t1=hi).raise_()
    mean_power_mw = energy.trapezoid_window(trace.ts_s, trace.power_mw, lo, hi) / (hi - lo)
    baseline = trace_schema.BaselinePower(mean_power_mw=mean_power_mw, window=(t0, t1), sample_count=count)
    logger.debug(f"Baseline {baseline.mean_power_mw:.3f} mW over {count} samples in ({t0}, {t1})")
    return baseline


def subtract_baseline(trace: trace_schema.PowerTrace, baseline: trace_schema.BaselinePower) -> trace_schema.PowerTrace:
    """
    Net power = gross - baseline, in the power domain.
    Electrical traces carry it back to current through the measured voltage; negative samples are kept.
    """
    if not math.isfinite(baseline.mean_power_mw):
        error_const.AnalysisError.INVALID_PARAMETER.build(name="baseline", value=baseline.mean_power_mw).raise_()

    offset = (trace.baseline_mw or 0.0) + baseline.mean_power_mw
    if trace.is_electrical:
        net_current = (trace.power_mw - baseline.mean_power_mw) / trace.voltage_v
        return trace.replace(current_ma=net_current, baseline_mw=offset)

    total = trace.rails[device_const.Rail.TOTAL]
    rails = {
        **trace.rails,
        device_const.Rail.TOTAL: trace_schema.RailSeries(
            ts_s=total.ts_s, power_mw=total.power_mw - baseline.mean_power_mw
        ),
    }
    return trace.replace(rails=rails, baseline_mw=offset)
