"""Everything `melt analyze` does to one run directory."""

from __future__ import annotations

import glob
import logging
import pathlib as pt

import numpy as np

import melt.analysis.align as align
import melt.analysis.degradation as degradation
import melt.analysis.energy as energy
import melt.analysis.metrics as metrics
import melt.analysis.ops as ops
import melt.analysis.thermal as thermal
import melt.config.analysis as analysis_config
import melt.config.project as project_config
import melt.const.error as error_const
import melt.const.event as event_const
import melt.const.run as run_const
import melt.powertrace.baseline as baseline_module
import melt.powertrace.parse as parse
import melt.report.emit as emit
import melt.schema.analysis as analysis_schema
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.schema.report as report_schema
import melt.schema.trace as trace_schema

logger = logging.getLogger(__name__)


def load_manifest(run_dir: pt.Path) -> core_schema.RunManifest:
    path = run_dir / run_const.MANIFEST_FILENAME
    if not path.is_file():
        error_const.ReportError.RUN_NOT_FOUND.build(path=str(run_dir)).raise_()
    try:
        return core_schema.RunManifest.model_validate_json(path.read_bytes())
    except ValueError as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=str(path), reason=str(e)).raise_()


def load_timeline(
    run_dir: pt.Path, manifest: core_schema.RunManifest, epsilon_s: float | None = None
) -> analysis_schema.AlignedTimeline:
    """Read events and traces of a collected run and put them on the host timebase of its power trace."""
    meta = trace_schema.TraceMeta(device_id=manifest.spec.device.id, run_id=manifest.run_id)
    try:
        events = event_schema.load_events(manifest.artifact(run_dir, run_const.ArtifactKind.EVENTS).read_bytes())
        power = parse.parse_power(manifest.artifact(run_dir, run_const.ArtifactKind.POWER).read_bytes(), meta)
        temperature = None
        if (temperature_path := manifest.artifact(run_dir, run_const.ArtifactKind.TEMPERATURE)).is_file():
            temperature = parse.parse_temperature(temperature_path.read_bytes(), power.source, meta)
    except FileNotFoundError as e:
        error_const.ReportError.RUN_NOT_FOUND.build(path=str(e.filename)).raise_()
    return align.align(
        events, manifest.clock_sync, power, manifest.host_start, temperature, manifest, epsilon_s=epsilon_s
    )


def default_baseline_window(timeline: analysis_schema.AlignedTimeline) -> tuple[float, float] | None:
    """The idle stretch between trace start and the first model load."""
    load_begin = next(
        (
            timeline.event_s(event)
            for event in timeline.events
            if event.kind == event_const.EventKind.MODEL_LOAD and event.phase == event_const.EventPhase.BEGIN
        ),
        None,
    )
    if load_begin is None or not len(timeline.power) or load_begin <= timeline.power.t_first:
        return None
    return timeline.power.t_first, load_begin


def run_window(timeline: analysis_schema.AlignedTimeline) -> tuple[float, float] | None:
    """Start/stop marks when the run has them, the event span otherwise."""
    marks = timeline.manifest.marks if timeline.manifest is not None else {}
    if run_const.NotificationKind.START in marks and run_const.NotificationKind.STOP in marks:
        t0 = timeline.to_trace_s(marks[run_const.NotificationKind.START])
        t1 = timeline.to_trace_s(marks[run_const.NotificationKind.STOP])
    elif timeline.events:
        t0, t1 = timeline.event_s(timeline.events[0]), timeline.event_s(timeline.events[-1])
    else:
        return None
    return (t0, t1) if t0 < t1 else None


def _estimate_baseline(
    timeline: analysis_schema.AlignedTimeline, window: tuple[float, float] | None
) -> trace_schema.BaselinePower | None:
    if window is None:
        logger.warning("No idle window before the model load, reporting gross energy only")
        return None
    try:
        return baseline_module.estimate_baseline(timeline.power, window)
    except error_const.MeltError as e:
        logger.warning(f"Baseline over {window} unusable, reporting gross energy only: {e}")
        return None


def _degradation(
    prompts: list[analysis_schema.PromptMetrics], setting: analysis_config.AnalysisSetting
) -> analysis_schema.DegradationReport | None:
    series = [prompt.generation_tps for prompt in prompts if prompt.generation_tps is not None]
    if len(series) < 2 * setting.degradation_window + 1:
        return None
    return degradation.detect_degradation(series, setting.degradation_window, setting.degradation_drop_frac)


def analyze_timeline(
    timeline: analysis_schema.AlignedTimeline,
    manifest: core_schema.RunManifest,
    baseline_window: tuple[float, float] | None = None,
) -> report_schema.RunReport:
    setting = project_config.get_melt_setting().analysis
    baseline = _estimate_baseline(timeline, baseline_window or default_baseline_window(timeline))
    prompts = metrics.prompt_metrics(timeline, baseline, slack_s=setting.alignment_epsilon_s)

    windows: list[analysis_schema.EnergyWindow] = []
    thermal_summary = None
    if (window := run_window(timeline)) is not None:
        if (clamped := metrics.clamp_to_trace(timeline.power, window, setting.alignment_epsilon_s)) is not None:
            windows.append(energy.integrate(timeline.power, clamped, baseline, label="run"))
        if timeline.temperature is not None and not timeline.temperature.is_empty:
            try:
                thermal_summary = thermal.thermal_summary(timeline.temperature, window)
            except error_const.MeltError as e:
                logger.warning(f"{manifest.run_id}: no thermal summary ({e})")
    _, loads = metrics.collect_spans(timeline)
    if loads and (clamped := metrics.clamp_to_trace(timeline.power, loads[0], setting.alignment_epsilon_s)):
        windows.append(energy.integrate(timeline.power, clamped, baseline, label="load"))

    battery = None
    capacity = manifest.spec.device.battery_capacity_mah
    discharges = [prompt.inference_discharge_mah for prompt in prompts if prompt.inference_discharge_mah is not None]
    if capacity is not None and discharges and (mean_discharge := float(np.mean(discharges))) > 0:
        battery = metrics.battery_projection(capacity, mean_discharge)

    missing_energy = any(prompt.inference_energy_mwh is None for prompt in prompts)
    negative = any(window.negative_net_flag for window in windows) or any(
        prompt.inference_energy_mwh is not None and prompt.inference_energy_mwh < 0 for prompt in prompts
    )
    quality = analysis_schema.DataQuality(
        partial=timeline.partial or missing_energy,
        negative_net=negative,
        out_of_range_events=timeline.out_of_range_count,
        jitter_violations=timeline.power.jitter_violations,
    )
    if not quality.is_clean:
        logger.warning(f"{manifest.run_id}: data quality flags {quality.model_dump()}")

    return report_schema.RunReport(
        manifest=manifest,
        prompts=prompts,
        windows=windows,
        baseline=baseline,
        degradation=_degradation(prompts, setting),
        thermal=thermal_summary,
        ops=ops.ops_by_phase(timeline.events),
        load_time_s=prompts[0].load_time_s if prompts else None,
        battery_prompts_to_depletion=battery,
        quality=quality,
        notes=[report_schema.PER_INFERENCE_NOTE],
    )


def analyze_run(run_dir: pt.Path, baseline_window: tuple[float, float] | None = None) -> report_schema.RunReport:
    """Failed runs come back as a report with their manifest and nothing measured."""
    manifest = load_manifest(run_dir)
    if manifest.status != run_const.RunStatus.OK:
        logger.info(f"{manifest.run_id}: status {manifest.status}, nothing to analyze")
        return report_schema.RunReport(manifest=manifest, notes=[f"run ended with {manifest.status}: {manifest.error}"])

    timeline = load_timeline(run_dir, manifest)
    report = analyze_timeline(timeline, manifest, baseline_window)
    logger.info(f"{manifest.run_id}: {len(report.prompts)} prompts analyzed")
    return report


def find_runs(pattern: str) -> list[pt.Path]:
    """Run directories matched by a glob, either directly or through their manifest/report file."""
    run_dirs: set[pt.Path] = set()
    for match in map(pt.Path, glob.glob(pattern, recursive=True)):
        if match.is_dir() and (match / run_const.MANIFEST_FILENAME).is_file():
            run_dirs.add(match)
        elif match.name in (run_const.MANIFEST_FILENAME, run_const.REPORT_FILENAME):
            run_dirs.add(match.parent)
        elif match.is_dir():
            run_dirs.update(path.parent for path in match.rglob(run_const.MANIFEST_FILENAME))
    return sorted(run_dirs)


def load_or_analyze(run_dir: pt.Path) -> report_schema.RunReport:
    if (report_path := run_dir / run_const.REPORT_FILENAME).is_file():
        return emit.load_report(report_path)
    return analyze_run(run_dir)
