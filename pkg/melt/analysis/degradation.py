from __future__ import annotations

import logging
import typing

import numpy as np

import melt.config.project as project_config
import melt.const.error as error_const
import melt.schema.analysis as analysis_schema

logger = logging.getLogger(__name__)


def detect_degradation(
    series: typing.Sequence[float],
    w: int | None = None,
    drop_frac: float | None = None,
) -> analysis_schema.DegradationReport:
    """
    Index i flags a drop when the mean of the w values starting at i falls below
    (1 - drop_frac) times the mean of the w values before it.
    Each run of consecutive flags is reported once, at its first index.
    """
    analysis_setting = project_config.get_melt_setting().analysis
    w = analysis_setting.degradation_window if w is None else w
    drop_frac = analysis_setting.degradation_drop_frac if drop_frac is None else drop_frac

    if w < 1:
        error_const.AnalysisError.INVALID_PARAMETER.build(name="w", value=w).raise_()
    if not 0 < drop_frac < 1:
        error_const.AnalysisError.INVALID_PARAMETER.build(name="drop_frac", value=drop_frac).raise_()
    values = np.asarray(series, dtype=float)
    if len(values) < 2 * w + 1:
        error_const.AnalysisError.SERIES_TOO_SHORT.build(length=len(values), required=2 * w + 1).raise_()

    # Window means via a running sum: means[j] averages values[j:j + w].
    cumsum = np.concatenate(([0.0], np.cumsum(values)))
    means = (cumsum[w:] - cumsum[:-w]) / w
    candidates = np.arange(w, len(values) - w + 1)
    flagged = means[candidates] < (1 - drop_frac) * means[candidates - w]

    changepoints: list[int] = []
    previous = False
    for index, is_drop in zip(candidates, flagged):
        if is_drop and not previous:
            changepoints.append(int(index))
        previous = bool(is_drop)

    if changepoints:
        logger.info(f"Throughput drops at prompts {changepoints}")
    return analysis_schema.DegradationReport(
        series=values.tolist(), changepoints=changepoints, window_w=w, drop_threshold=drop_frac
    )
