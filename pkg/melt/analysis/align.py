from __future__ import annotations

import logging
import typing

import melt.config.project as project_config
import melt.const.error as error_const
import melt.const.event as event_const
import melt.const.time as time_const
import melt.schema.analysis as analysis_schema
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.schema.trace as trace_schema

logger = logging.getLogger(__name__)


def validate_events(events: typing.Sequence[event_schema.Event]) -> None:
    """
    Stack check over an event trace: spans of one kind open and close in nesting order,
    decode tokens count up within a prompt and timestamps never go back.
    """
    stack: list[event_const.EventKind] = []
    last_token: dict[int, int] = {}
    last_ts: int | None = None

    def fail(reason: str) -> typing.NoReturn:
        error_const.AnalysisError.MALFORMED_TRACE.build(reason=reason).raise_()

    for position, event in enumerate(events):
        if last_ts is not None and event.ts_ns < last_ts:
            fail(f"event {position} goes back in time")
        last_ts = event.ts_ns

        if event.kind in event_const.SPAN_KINDS:
            if event.phase == event_const.EventPhase.BEGIN:
                stack.append(event.kind)
            elif event.phase == event_const.EventPhase.END:
                if not stack or stack[-1] != event.kind:
                    fail(f"event {position} closes {event.kind} while {stack[-1] if stack else 'nothing'} is open")
                stack.pop()
            else:
                fail(f"event {position}: {event.kind} cannot be an instant")
        elif event.kind == event_const.EventKind.DECODE_TOKEN:
            if event.phase != event_const.EventPhase.INSTANT:
                fail(f"event {position}: decode tokens are instants")
            prompt_index, token_index = event.attrs.get("prompt_index", -1), event.attrs.get("token_index", -1)
            if token_index <= last_token.get(prompt_index, -1):
                fail(f"event {position}: token_index {token_index} does not increase in prompt {prompt_index}")
            last_token[prompt_index] = token_index

    if stack:
        fail(f"{', '.join(stack)} never closed")


def align(
    events: typing.Sequence[event_schema.Event],
    clock_sync: core_schema.ClockSync,
    power: trace_schema.PowerTrace,
    epoch_ns: int,
    temperature: trace_schema.TempTrace | None = None,
    manifest: core_schema.RunManifest | None = None,
    epsilon_s: float | None = None,
) -> analysis_schema.AlignedTimeline:
    """
    Move device-time events into host time.
    Events further than epsilon outside the power trace flag the run partial.
    """
    if epsilon_s is None:
        epsilon_s = project_config.get_melt_setting().analysis.alignment_epsilon_s

    host_events = [event.shifted(-clock_sync.offset_ns) for event in events]
    out_of_range = 0
    if len(power):
        low_ns = epoch_ns + round((power.t_first - epsilon_s) * time_const.NS_PER_S)
        high_ns = epoch_ns + round((power.t_last + epsilon_s) * time_const.NS_PER_S)
        out_of_range = sum(1 for event in host_events if not low_ns <= event.ts_ns <= high_ns)
    else:
        out_of_range = len(host_events)

    if out_of_range:
        logger.warning(f"{out_of_range} events fall outside the power trace, run is partial")
    return analysis_schema.AlignedTimeline(
        events=host_events,
        power=power,
        epoch_ns=epoch_ns,
        offset_ns=clock_sync.offset_ns,
        temperature=temperature,
        manifest=manifest,
        partial=out_of_range > 0,
        out_of_range_count=out_of_range,
    )
