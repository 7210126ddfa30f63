from __future__ import annotations

import collections
import typing

import melt.const.event as event_const
import melt.schema.analysis as analysis_schema
import melt.schema.event as event_schema


def per_op_summary(
    events: typing.Iterable[event_schema.Event], phase: event_const.OpPhase | None = None
) -> dict[str, analysis_schema.OpShare]:
    """Total kernel time per op name and its share of all op time, optionally within one phase."""
    totals: collections.Counter[str] = collections.Counter()
    for event in events:
        if event.kind != event_const.EventKind.OP:
            continue
        if phase is not None and event.attrs.get("op_phase") != phase:
            continue
        totals[event.attrs["op_name"]] += float(event.attrs.get("duration_us", 0.0))

    grand_total = sum(totals.values())
    return {
        op_name: analysis_schema.OpShare(total_us=total_us, share=total_us / grand_total if grand_total else 0.0)
        for op_name, total_us in sorted(totals.items())
    }


def ops_by_phase(events: typing.Sequence[event_schema.Event]) -> dict[str, dict[str, analysis_schema.OpShare]]:
    """Only phases that traced any op show up."""
    summaries = {phase.value: per_op_summary(events, phase) for phase in event_const.OpPhase}
    return {phase: summary for phase, summary in summaries.items() if summary}
