from __future__ import annotations

import dataclasses
import logging
import typing

import melt.analysis.align as align
import melt.analysis.energy as energy
import melt.analysis.thermal as thermal
import melt.const.error as error_const
import melt.const.event as event_const
import melt.schema.analysis as analysis_schema
import melt.schema.event as event_schema
import melt.schema.trace as trace_schema

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class PromptSpans:
    """Trace-second boundaries of one prompt as read off its events."""

    prompt_index: int
    conversation_index: int = 0
    prompt_tokens: int = 0
    prefill_begin: float | None = None
    prefill_end: float | None = None
    token_ts: list[float] = dataclasses.field(default_factory=list)

    @property
    def last_token(self) -> float | None:
        return self.token_ts[-1] if self.token_ts else None

    @property
    def inference_end(self) -> float | None:
        return self.last_token if self.token_ts else self.prefill_end


def _attr(event: event_schema.Event, name: str) -> typing.Any:
    if name not in event.attrs:
        error_const.AnalysisError.MALFORMED_TRACE.build(
            reason=f"{event.kind} {event.phase} at {event.ts_ns} has no '{name}'"
        ).raise_()
    return event.attrs[name]


def collect_spans(timeline: analysis_schema.AlignedTimeline) -> tuple[list[PromptSpans], list[tuple[float, float]]]:
    """Per-prompt spans in prompt order, and every completed model load span."""
    prompts: dict[int, PromptSpans] = {}
    loads: list[tuple[float, float]] = []
    load_begin: float | None = None

    for event in timeline.events:
        ts = timeline.event_s(event)
        match event.kind, event.phase:
            case event_const.EventKind.MODEL_LOAD, event_const.EventPhase.BEGIN:
                load_begin = ts
            case event_const.EventKind.MODEL_LOAD, event_const.EventPhase.END if load_begin is not None:
                loads.append((load_begin, ts))
                load_begin = None
            case event_const.EventKind.PREFILL, event_const.EventPhase.BEGIN:
                index = _attr(event, "prompt_index")
                prompts[index] = PromptSpans(
                    prompt_index=index,
                    conversation_index=event.attrs.get("conversation_index", 0),
                    prompt_tokens=_attr(event, "tokens"),
                    prefill_begin=ts,
                )
            case event_const.EventKind.PREFILL, event_const.EventPhase.END:
                if (spans := prompts.get(index := _attr(event, "prompt_index"))) is None:
                    error_const.AnalysisError.MALFORMED_TRACE.build(
                        reason=f"prefill of prompt {index} ends before it begins"
                    ).raise_()
                spans.prefill_end = ts
            case event_const.EventKind.DECODE_TOKEN, _:
                if (spans := prompts.get(index := _attr(event, "prompt_index"))) is None:
                    error_const.AnalysisError.MALFORMED_TRACE.build(
                        reason=f"decode token of prompt {index} before its prefill"
                    ).raise_()
                spans.token_ts.append(ts)
    return [prompts[index] for index in sorted(prompts)], loads


def clamp_to_trace(
    trace: trace_schema.PowerTrace, window: tuple[float, float], slack_s: float
) -> tuple[float, float] | None:
    """
    Pull window edges that overshoot the trace by less than `slack_s` back onto it.
    Returns None for windows the trace does not cover.
    """
    if not len(trace):
        return None
    t0, t1 = window
    if t0 < trace.t_first - slack_s or t1 > trace.t_last + slack_s:
        return None
    t0, t1 = max(t0, trace.t_first), min(t1, trace.t_last)
    return (t0, t1) if t0 < t1 else None


def _window_energy(
    timeline: analysis_schema.AlignedTimeline,
    window: tuple[float, float],
    baseline: trace_schema.BaselinePower | None,
    label: str,
    slack_s: float,
) -> analysis_schema.EnergyWindow | None:
    if (clamped := clamp_to_trace(timeline.power, window, slack_s)) is None:
        logger.warning(f"{label}: window {window} is not covered by the power trace")
        return None
    return energy.integrate(timeline.power, clamped, baseline, label=label)


def _per_token(value: float | None, tokens: int) -> float | None:
    return None if value is None or tokens <= 0 else value / tokens


def prompt_metrics(
    timeline: analysis_schema.AlignedTimeline,
    baseline: trace_schema.BaselinePower | None = None,
    slack_s: float = 0.0,
) -> list[analysis_schema.PromptMetrics]:
    """
    Throughput, per-token and per-inference energy of every prompt.
    The decode window runs from prefill end to the last decode token, the inference window from prefill begin to it.
    Energy figures stay empty for prompts whose windows leave the power trace by more than `slack_s`.
    """
    align.validate_events(timeline.events)
    prompts, loads = collect_spans(timeline)
    load_time_s = loads[0][1] - loads[0][0] if loads else None

    metrics: list[analysis_schema.PromptMetrics] = []
    for position, spans in enumerate(prompts):
        assert spans.prefill_begin is not None and spans.prefill_end is not None  # nosec: B101
        prefill_s = spans.prefill_end - spans.prefill_begin
        if prefill_s <= 0:
            error_const.AnalysisError.MALFORMED_TRACE.build(
                reason=f"prompt {spans.prompt_index} has an empty prefill span"
            ).raise_()
        generated = len(spans.token_ts)
        decode_s = spans.last_token - spans.prefill_end if spans.last_token is not None else None
        decode_s = decode_s if decode_s and decode_s > 0 else None

        tag = f"prompt-{spans.prompt_index:04d}"
        decode = None
        if decode_s:
            decode_window = (spans.prefill_end, spans.last_token)
            decode = _window_energy(timeline, decode_window, baseline, f"{tag}/decode", slack_s)
        prefill = _window_energy(
            timeline, (spans.prefill_begin, spans.prefill_end), baseline, f"{tag}/prefill", slack_s
        )
        inference = _window_energy(
            timeline, (spans.prefill_begin, spans.inference_end), baseline, f"{tag}/inference", slack_s
        )

        max_temp_c = None
        if timeline.temperature is not None and not timeline.temperature.is_empty:
            try:
                inference_window = (spans.prefill_begin, spans.inference_end)
                max_temp_c = thermal.thermal_summary(timeline.temperature, inference_window).max_c
            except error_const.MeltError as e:
                logger.debug(f"{tag}: no temperature ({e})")

        metrics.append(
            analysis_schema.PromptMetrics(
                prompt_index=spans.prompt_index,
                conversation_index=spans.conversation_index,
                prompt_tokens=spans.prompt_tokens,
                generated_tokens=generated,
                prefill_s=prefill_s,
                decode_s=decode_s,
                prefill_tps=spans.prompt_tokens / prefill_s,
                generation_tps=generated / decode_s if decode_s else None,
                discharge_mah_per_token=_per_token(decode.charge_mah if decode else None, generated),
                discharge_mah_per_token_gross=_per_token(decode.charge_mah_gross if decode else None, generated),
                energy_mwh_per_token=_per_token(decode.energy_mwh if decode else None, generated),
                energy_mwh_per_token_gross=_per_token(decode.energy_mwh_gross if decode else None, generated),
                prefill_energy_mwh=prefill.energy_mwh if prefill else None,
                prefill_energy_mwh_gross=prefill.energy_mwh_gross if prefill else None,
                inference_energy_mwh=inference.energy_mwh if inference else None,
                inference_energy_mwh_gross=inference.energy_mwh_gross if inference else None,
                inference_discharge_mah=inference.charge_mah if inference else None,
                load_time_s=load_time_s if position == 0 else None,
                max_temp_c=max_temp_c,
            )
        )
    return metrics


def battery_projection(capacity_mah: float, per_prompt_discharge_mah: float) -> float:
    """Prompts a full battery lasts at the given discharge per prompt; not floored."""
    if capacity_mah <= 0:
        error_const.AnalysisError.NON_POSITIVE_INPUT.build(name="capacity_mah", value=capacity_mah).raise_()
    if per_prompt_discharge_mah <= 0:
        error_const.AnalysisError.NON_POSITIVE_INPUT.build(
            name="per_prompt_discharge_mah", value=per_prompt_discharge_mah
        ).raise_()
    return capacity_mah / per_prompt_discharge_mah
