from __future__ import annotations

import json
import logging
import pathlib as pt
import typing

import pandas as pd

import melt.config.project as project_config
import melt.const.error as error_const
import melt.schema.report as report_schema
import melt.util.mu_file as file_util
import melt.util.mu_json as json_util

logger = logging.getLogger(__name__)

ReportFormat = typing.Literal["csv", "json"]
ROW_COLUMNS = ("level", "metric", "mean", "std", "n", "attrition")
PROMPT_COLUMNS_FIRST = ("prompt_index", "conversation_index", "prompt_tokens", "generated_tokens")
Emittable = typing.Sequence[report_schema.AggregateRow] | report_schema.RunReport


def format_number(value: float | None, digits: int | None = None) -> str:
    if value is None or value != value:
        return ""
    digits = digits or project_config.get_melt_setting().report.significant_digits
    return f"{value:.{digits}g}"


def _rounded(value: typing.Any, digits: int) -> typing.Any:
    match value:
        case bool() | int() | None:
            return value
        case float():
            return float(format_number(value, digits)) if value == value else None
        case dict():
            return {key: _rounded(item, digits) for key, item in value.items()}
        case list() | tuple():
            return [_rounded(item, digits) for item in value]
    return value


def table_frame(rows: typing.Sequence[report_schema.AggregateRow]) -> pd.DataFrame:
    """Group key columns in sorted order, then the fixed row columns."""
    key_columns = sorted({key for row in rows for key in row.keys})
    records = [{**row.keys, **row.model_dump(include=set(ROW_COLUMNS))} for row in rows]
    return pd.DataFrame(records, columns=[*key_columns, *ROW_COLUMNS])


def render_csv(frame: pd.DataFrame, digits: int | None = None) -> str:
    formatted = frame.copy()
    for column in formatted.columns:
        if pd.api.types.is_float_dtype(formatted[column]) or formatted[column].dtype == object:
            formatted[column] = [
                format_number(value, digits) if isinstance(value, float) else ("" if value is None else value)
                for value in formatted[column]
            ]
    return formatted.to_csv(index=False, lineterminator="\n")


def render_table(rows: typing.Sequence[report_schema.AggregateRow], fmt: ReportFormat) -> str:
    digits = project_config.get_melt_setting().report.significant_digits
    if fmt == "csv":
        return render_csv(table_frame(rows), digits)
    return json_util.dumps_stable([_rounded(row.model_dump(mode="json"), digits) for row in rows])


def prompts_frame(report: report_schema.RunReport) -> pd.DataFrame:
    records = [prompt.model_dump() for prompt in report.prompts]
    if not records:
        return pd.DataFrame(columns=list(PROMPT_COLUMNS_FIRST))
    frame = pd.DataFrame(records)
    return frame[[*PROMPT_COLUMNS_FIRST, *sorted(set(frame.columns) - set(PROMPT_COLUMNS_FIRST))]]


def render_report(report: report_schema.RunReport, fmt: ReportFormat) -> str:
    """JSON keeps every digit so that a report reads back unchanged; CSV lists its prompts."""
    if fmt == "csv":
        return render_csv(prompts_frame(report))
    return json_util.dumps_stable(report.model_dump(mode="json"))


def write_text(text: str, path: pt.Path) -> pt.Path:
    try:
        return file_util.save_bytes(text.encode("utf-8"), path)
    except OSError as e:
        error_const.ReportError.IO_ERROR.build(path=str(path), reason=e.strerror or str(e)).raise_()


def emit(obj: Emittable, fmt: ReportFormat, path: pt.Path) -> pt.Path:
    """Byte-stable output: equal inputs give identical files."""
    if isinstance(obj, report_schema.RunReport):
        text = render_report(obj, fmt)
    else:
        text = render_table(obj, fmt)
    logger.debug(f"Writing {fmt} to {path}")
    return write_text(text, path)


def load_report(path: pt.Path) -> report_schema.RunReport:
    try:
        return report_schema.RunReport.model_validate_json(path.read_bytes())
    except OSError as e:
        error_const.ReportError.IO_ERROR.build(path=str(path), reason=e.strerror or str(e)).raise_()
    except ValueError as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=str(path), reason=str(e)).raise_()


def load_table(path: pt.Path) -> list[report_schema.AggregateRow]:
    """Reads back a JSON table written by `emit`."""
    return [report_schema.AggregateRow.model_validate(row) for row in json.loads(path.read_text(encoding="utf-8"))]
