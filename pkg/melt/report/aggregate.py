from __future__ import annotations

import logging
import typing

import numpy as np
import pandas as pd

import melt.const.error as error_const
import melt.schema.analysis as analysis_schema
import melt.schema.report as report_schema

logger = logging.getLogger(__name__)

LEVEL_RUN = "run"
LEVEL_PROMPT = "prompt"
RUN_METRIC_NAMES: tuple[str, ...] = ("load_time_s", "battery_prompts_to_depletion", "run_energy_mwh")


def _quant(report: report_schema.RunReport) -> str:
    model = report.manifest.spec.model
    return f"{model.quant_scheme}-{model.bitwidth}bit"


GROUP_KEYS: dict[str, typing.Callable[[report_schema.RunReport], str]] = {
    "device": lambda report: report.manifest.spec.device.id,
    "model": lambda report: report.manifest.spec.model.name,
    "backend": lambda report: str(report.manifest.spec.backend),
    "quant": _quant,
    "energy_mode": lambda report: report.manifest.spec.device.energy_mode or "",
    "grid_point": lambda report: report.manifest.spec.grid_point.label(),
    "mode": lambda report: str(report.manifest.spec.mode),
    "platform": lambda report: str(report.manifest.spec.device.platform),
}


def group_key(report: report_schema.RunReport, group_by: typing.Sequence[str]) -> tuple[str, ...]:
    return tuple(GROUP_KEYS[key](report) for key in group_by)


def _run_values(report: report_schema.RunReport) -> dict[str, float]:
    """One value per metric for a run: prompt metrics averaged over its prompts, plus run-level figures."""
    values: dict[str, float] = {}
    for metric in analysis_schema.PROMPT_METRIC_NAMES:
        samples = [value for prompt in report.prompts if (value := getattr(prompt, metric)) is not None]
        if samples:
            values[metric] = float(np.mean(samples))
    if report.load_time_s is not None:
        values["load_time_s"] = report.load_time_s
    if report.battery_prompts_to_depletion is not None:
        values["battery_prompts_to_depletion"] = report.battery_prompts_to_depletion
    if (window := report.run_window) is not None:
        values["run_energy_mwh"] = window.energy_mwh
    return values


def _spread(values: pd.Series) -> tuple[float, float]:
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return mean, std


def aggregate(
    reports: typing.Sequence[report_schema.RunReport], group_by: typing.Sequence[str]
) -> list[report_schema.AggregateRow]:
    """
    Mean and sample std per group and metric, at two levels: across the runs of a group (each run reduced to
    the mean over its prompts) and across all prompts of the group's successful runs.
    Failed runs never enter a mean; every run that did not contribute to a row is counted as its attrition.
    """
    if unknown := [key for key in group_by if key not in GROUP_KEYS]:
        error_const.ReportError.UNKNOWN_GROUP_KEY.build(key=unknown[0], known=sorted(GROUP_KEYS)).raise_()
    if not reports:
        error_const.ReportError.EMPTY_GROUP.build(group="(all)").raise_()

    groups: dict[tuple[str, ...], list[report_schema.RunReport]] = {}
    for report in reports:
        groups.setdefault(group_key(report, group_by), []).append(report)

    rows: list[report_schema.AggregateRow] = []
    for key, members in sorted(groups.items()):
        keys = dict(zip(group_by, key))
        ok_runs = [report for report in members if report.is_ok]
        failed = len(members) - len(ok_runs)
        if failed:
            logger.warning(f"Group {keys}: {failed} of {len(members)} runs failed and are left out")

        run_frame = pd.DataFrame([_run_values(report) for report in ok_runs])
        prompt_fields = set(analysis_schema.PROMPT_METRIC_NAMES)
        prompt_frame = pd.DataFrame(
            [prompt.model_dump(include=prompt_fields) for report in ok_runs for prompt in report.prompts]
        )

        for metric in (*analysis_schema.PROMPT_METRIC_NAMES, *RUN_METRIC_NAMES):
            run_values = run_frame[metric].dropna() if metric in run_frame else pd.Series(dtype=float)
            if len(run_values) or not ok_runs:
                mean, std = _spread(run_values) if len(run_values) else (None, None)
                rows.append(
                    report_schema.AggregateRow(
                        keys=keys,
                        level=LEVEL_RUN,
                        metric=metric,
                        mean=mean,
                        std=std,
                        n=len(run_values),
                        attrition=len(members) - len(run_values),
                    )
                )

            if metric not in analysis_schema.PROMPT_METRIC_NAMES or metric not in prompt_frame:
                continue
            if len(prompt_values := prompt_frame[metric].dropna()):
                mean, std = _spread(prompt_values)
                rows.append(
                    report_schema.AggregateRow(
                        keys=keys,
                        level=LEVEL_PROMPT,
                        metric=metric,
                        mean=mean,
                        std=std,
                        n=len(prompt_values),
                        attrition=failed,
                    )
                )
    return rows
