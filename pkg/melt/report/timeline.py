"""Plot-ready power timeline of one run: raw and smoothed power with phase and prompt annotations."""

from __future__ import annotations

import pathlib as pt

import numpy as np
import pandas as pd

import melt.analysis.metrics as metrics
import melt.analysis.smooth as smooth
import melt.const.event as event_const
import melt.report.emit as emit
import melt.schema.analysis as analysis_schema

TIMELINE_COLUMNS = ("ts_s", "power_mw_raw", "power_mw_smoothed", "phase", "prompt_index")


def _label_spans(ts_s: np.ndarray, spans: list[tuple[float, float]], labels: np.ndarray, value: object) -> None:
    for t0, t1 in spans:
        labels[(ts_s >= t0) & (ts_s <= t1)] = value


def timeline_frame(timeline: analysis_schema.AlignedTimeline | None, smoothing_n: int) -> pd.DataFrame:
    if timeline is None or not len(timeline.power):
        return pd.DataFrame(columns=list(TIMELINE_COLUMNS))

    ts_s, raw = timeline.power.ts_s, timeline.power.power_mw
    prompts, loads = metrics.collect_spans(timeline)

    phase = np.full(len(ts_s), event_const.PhaseLabel.IDLE.value, dtype=object)
    _label_spans(ts_s, loads, phase, event_const.PhaseLabel.LOAD.value)
    prefill = [(spans.prefill_begin, spans.prefill_end) for spans in prompts if spans.prefill_end is not None]
    decode = [(spans.prefill_end, spans.last_token) for spans in prompts if spans.last_token is not None]
    _label_spans(ts_s, prefill, phase, event_const.PhaseLabel.PREFILL.value)
    _label_spans(ts_s, decode, phase, event_const.PhaseLabel.DECODE.value)

    prompt_index = np.full(len(ts_s), None, dtype=object)
    for spans in prompts:
        if spans.inference_end is not None:
            _label_spans(ts_s, [(spans.prefill_begin, spans.inference_end)], prompt_index, spans.prompt_index)

    return pd.DataFrame(
        {
            "ts_s": ts_s,
            "power_mw_raw": raw,
            "power_mw_smoothed": smooth.smooth(raw, smoothing_n),
            "phase": phase,
            "prompt_index": prompt_index,
        }
    )


def timeline_export(
    timeline: analysis_schema.AlignedTimeline | None, smoothing_n: int, path: pt.Path
) -> pt.Path:
    """An empty timeline still gets its header."""
    frame = timeline_frame(timeline, smoothing_n)
    columns = {
        "ts_s": [f"{value:.9f}" for value in frame["ts_s"]],
        "power_mw_raw": [emit.format_number(value) for value in frame["power_mw_raw"]],
        "power_mw_smoothed": [emit.format_number(value) for value in frame["power_mw_smoothed"]],
        "phase": frame["phase"],
        "prompt_index": ["" if value is None else str(value) for value in frame["prompt_index"]],
    }
    text = pd.DataFrame(columns, columns=list(TIMELINE_COLUMNS)).to_csv(index=False, lineterminator="\n")
    return emit.write_text(text, path)
