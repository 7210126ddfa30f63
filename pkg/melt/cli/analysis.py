from __future__ import annotations

import pathlib as pt
import typing

import typer

import melt.config.project as project_config
import melt.const.error as error_const
import melt.const.run as run_const
import melt.report.aggregate as aggregate_module
import melt.report.emit as emit
import melt.report.pipeline as pipeline
import melt.report.timeline as timeline_module
import melt.util.mu_cli as cli_util
import melt.util.mu_string as string_util


def _pair(value: typing.Optional[str]) -> typing.Optional[tuple[float, float]]:
    if value is None:
        return None
    try:
        return string_util.parse_pair(value)
    except ValueError:
        cli_util.usage_error(f"expected 't0,t1', got '{value}'")


@cli_util.exit_on_error
def analyze(
    run: typing.Annotated[pt.Path, typer.Option(help="Run directory holding manifest.json.")],
    out: typing.Annotated[pt.Path, typer.Option(help="Directory for report.json and prompts.csv.")],
    baseline_window: typing.Annotated[
        typing.Optional[str], typer.Option(help="Idle window 't0,t1' in trace seconds; defaults to pre-load idle.")
    ] = None,
) -> None:
    """Compute the metrics of one run."""
    report = pipeline.analyze_run(run, _pair(baseline_window))
    emit.emit(report, "json", out / run_const.REPORT_FILENAME)
    emit.emit(report, "csv", out / "prompts.csv")
    typer.echo(f"{out / run_const.REPORT_FILENAME}\t{report.manifest.status}\t{len(report.prompts)} prompts")


@cli_util.exit_on_error
def report(
    runs: typing.Annotated[str, typer.Option(help="Glob matching run directories.")],
    out: typing.Annotated[pt.Path, typer.Option(help="Table file to write.")],
    group_by: typing.Annotated[
        typing.Optional[str], typer.Option(help=f"Comma separated keys out of {sorted(aggregate_module.GROUP_KEYS)}.")
    ] = None,
    fmt: typing.Annotated[str, typer.Option("--format", help="csv or json.")] = "csv",
) -> None:
    """Aggregate runs into mean and std per group."""
    if fmt not in typing.get_args(emit.ReportFormat):
        cli_util.usage_error(f"format must be csv or json, got '{fmt}'")
    keys = (
        [key.strip() for key in group_by.split(",") if key.strip()]
        if group_by
        else project_config.get_melt_setting().report.group_by
    )
    if not (run_dirs := pipeline.find_runs(runs)):
        error_const.ReportError.RUN_NOT_FOUND.build(path=runs).raise_()

    rows = aggregate_module.aggregate([pipeline.load_or_analyze(run_dir) for run_dir in run_dirs], keys)
    emit.emit(rows, typing.cast(emit.ReportFormat, fmt), out)
    typer.echo(f"{out}\t{len(run_dirs)} runs\t{len(rows)} rows")


@cli_util.exit_on_error
def timeline(
    run: typing.Annotated[pt.Path, typer.Option(help="Run directory holding manifest.json.")],
    out: typing.Annotated[pt.Path, typer.Option(help="CSV file to write.")],
    smooth: typing.Annotated[typing.Optional[int], typer.Option(min=1, help="Moving average width in samples.")] = None,
) -> None:
    """Export raw and smoothed power with phase and prompt annotations."""
    smoothing_n = smooth or project_config.get_melt_setting().report.timeline_smoothing_n
    manifest = pipeline.load_manifest(run)
    aligned = pipeline.load_timeline(run, manifest) if manifest.status == run_const.RunStatus.OK else None
    timeline_module.timeline_export(aligned, smoothing_n, out)
    typer.echo(str(out))


cli_patterns: list[typing.Callable] = [analyze, report, timeline]
