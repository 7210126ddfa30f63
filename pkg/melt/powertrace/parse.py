"""
Readers and writers for the three CSV wire formats of the monitoring channels.

- Monsoon: `ts_s,current_mA,voltage_V`
- SysFS:   `ts_s,rail,power_mW` (long format, one row per rail sample)
- Thermal: `ts_s,sensor,temp_C`

Writers emit shortest round-trip float reprs, so parse -> serialize -> parse is lossless.
"""

from __future__ import annotations

import io
import logging
import re
import typing

import numpy as np
import pandas as pd

import melt.config.project as project_config
import melt.const.device as device_const
import melt.const.error as error_const
import melt.schema.trace as trace_schema
import melt.util.mu_string as string_util

logger = logging.getLogger(__name__)

MONSOON_COLUMNS = ("ts_s", "current_mA", "voltage_V")
SYSFS_COLUMNS = ("ts_s", "rail", "power_mW")
TEMPERATURE_COLUMNS = ("ts_s", "sensor", "temp_C")
TEMP_SANITY_BAND_C = (-40.0, 150.0)

# Header is line 1, so the first data row is line 2.
FIRST_DATA_LINE = 2
PARSER_LINE_REGEX = re.compile(r"line (\d+)")

RawInput = bytes | str


def _as_text(raw: RawInput) -> str:
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def _malformed(line: int | None, reason: str) -> typing.NoReturn:
    error_const.TraceError.MALFORMED_ROW.build(line=line, reason=reason).raise_()


def read_header(raw: RawInput) -> tuple[str, ...]:
    header = _as_text(raw).split("\n", maxsplit=1)[0]
    return tuple(column.strip() for column in header.strip().split(","))


def _read_rows(raw: RawInput, columns: tuple[str, ...]) -> pd.DataFrame:
    text = _as_text(raw).replace("\r\n", "\n").rstrip("\n")
    header, _, body = text.partition("\n")
    if tuple(column.strip() for column in header.split(",")) != columns:
        _malformed(1, f"expected header '{','.join(columns)}', got '{header}'")
    if not body.strip():
        error_const.TraceError.EMPTY_TRACE().raise_()

    try:
        frame = pd.read_csv(
            io.StringIO(body),
            header=None,
            names=list(columns),
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.ParserError as e:
        body_line = int(match.group(1)) if (match := PARSER_LINE_REGEX.search(str(e))) else None
        _malformed(body_line + 1 if body_line is not None else None, str(e))

    logger.debug(f"Read {len(frame)} rows with columns {columns}")
    return frame


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    # to_numeric only locates bad cells; values go through float() so they round-trip exactly.
    probe = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
    if (bad := ~np.isfinite(probe)).any():
        row = int(np.argmax(bad))
        _malformed(row + FIRST_DATA_LINE, f"{column} is not a finite number: {frame[column].iat[row]!r}")
    return frame[column].to_numpy(dtype=object).astype(np.float64)


def _label_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    labels = frame[column].fillna("").astype(str).str.strip()
    if (bad := (labels == "").to_numpy()).any():
        _malformed(int(np.argmax(bad)) + FIRST_DATA_LINE, f"{column} is empty")
    return labels.to_numpy()


def _check_increasing(ts_s: np.ndarray, rows: np.ndarray | None = None, *, strict: bool = True) -> None:
    if len(ts_s) < 2:
        return
    gaps = np.diff(ts_s)
    if (bad := (gaps <= 0) if strict else (gaps < 0)).any():
        index = int(np.argmax(bad)) + 1
        row = int(rows[index]) if rows is not None else index
        error_const.TraceError.NON_MONOTONIC_TIMESTAMP.build(
            line=row + FIRST_DATA_LINE, ts=float(ts_s[index])
        ).raise_()


def _jitter_violations(ts_s: np.ndarray, rate_hz: float) -> int:
    tolerance = project_config.get_melt_setting().analysis.rate_jitter_tolerance
    if violations := trace_schema.count_jitter_violations(ts_s, rate_hz, tolerance):
        logger.warning(f"{violations} sample gaps fall outside +-{tolerance:.0%} of the {rate_hz:.3f} Hz period")
    return violations


def parse_monsoon(raw: RawInput, meta: trace_schema.TraceMeta = trace_schema.TraceMeta()) -> trace_schema.PowerTrace:
    frame = _read_rows(raw, MONSOON_COLUMNS)
    ts_s = _numeric_column(frame, "ts_s")
    current_ma = _numeric_column(frame, "current_mA")
    voltage_v = _numeric_column(frame, "voltage_V")
    if (bad := voltage_v <= 0).any():
        _malformed(int(np.argmax(bad)) + FIRST_DATA_LINE, f"voltage must be positive, got {voltage_v[bad][0]}")
    _check_increasing(ts_s)

    rate_hz = trace_schema.estimate_rate(ts_s)
    return trace_schema.PowerTrace(
        source=device_const.PowerSource.MONSOON,
        ts_s=ts_s,
        current_ma=current_ma,
        voltage_v=voltage_v,
        nominal_rate_hz=rate_hz,
        meta=meta,
        jitter_violations=_jitter_violations(ts_s, rate_hz),
    )


def _resolve_rail(name: str) -> device_const.Rail:
    if (rail := string_util.get_enum_item(device_const.Rail, name)) is not None:
        return rail
    logger.warning(error_const.TraceError.UNKNOWN_RAIL.build(rail=name).msg)
    return device_const.Rail.OTHER


def synthesize_total(rails: dict[device_const.Rail, trace_schema.RailSeries]) -> trace_schema.RailSeries:
    """
    Sum rails on the grid of the densest rail.
    Each rail contributes its nearest sample when that sample lies within one nominal period of the grid point.
    """
    reference = max(rails.values(), key=len)
    grid = reference.ts_s
    period = 1.0 / rate if (rate := trace_schema.estimate_rate(grid)) > 0 else 0.0

    total = np.zeros_like(grid)
    for series in rails.values():
        right = np.clip(np.searchsorted(series.ts_s, grid), 0, len(series.ts_s) - 1)
        left = np.clip(right - 1, 0, len(series.ts_s) - 1)
        nearest = np.where(np.abs(series.ts_s[left] - grid) <= np.abs(series.ts_s[right] - grid), left, right)
        close = np.abs(series.ts_s[nearest] - grid) <= period
        total += np.where(close, series.power_mw[nearest], 0.0)
    return trace_schema.RailSeries(ts_s=grid.copy(), power_mw=total)


def parse_sysfs(raw: RawInput, meta: trace_schema.TraceMeta = trace_schema.TraceMeta()) -> trace_schema.PowerTrace:
    frame = _read_rows(raw, SYSFS_COLUMNS)
    ts_s = _numeric_column(frame, "ts_s")
    names = _label_column(frame, "rail")
    power_mw = _numeric_column(frame, "power_mW")
    if (bad := power_mw < 0).any():
        _malformed(int(np.argmax(bad)) + FIRST_DATA_LINE, f"power must be non-negative, got {power_mw[bad][0]}")

    grouped: dict[device_const.Rail, list[tuple[np.ndarray, np.ndarray]]] = {}
    for name in pd.unique(names):
        rows = np.flatnonzero(names == name)
        _check_increasing(ts_s[rows], rows)
        grouped.setdefault(_resolve_rail(name), []).append((ts_s[rows], power_mw[rows]))

    rails: dict[device_const.Rail, trace_schema.RailSeries] = {}
    for rail, parts in grouped.items():
        if len(parts) == 1:
            rails[rail] = trace_schema.RailSeries(ts_s=parts[0][0], power_mw=parts[0][1])
            continue
        # Several unknown rails share the 'other' bucket; samples at equal timestamps add up.
        merged = pd.Series(np.concatenate([p for _, p in parts]), index=np.concatenate([t for t, _ in parts]))
        merged = merged.groupby(level=0).sum().sort_index()
        rails[rail] = trace_schema.RailSeries(ts_s=merged.index.to_numpy(dtype=float), power_mw=merged.to_numpy())

    if device_const.Rail.TOTAL not in rails:
        rails[device_const.Rail.TOTAL] = synthesize_total(rails)

    total = rails[device_const.Rail.TOTAL]
    rate_hz = trace_schema.estimate_rate(total.ts_s)
    return trace_schema.PowerTrace(
        source=device_const.PowerSource.SYSFS,
        ts_s=total.ts_s,
        rails=rails,
        nominal_rate_hz=rate_hz,
        meta=meta,
        jitter_violations=_jitter_violations(total.ts_s, rate_hz),
    )


def parse_power(raw: RawInput, meta: trace_schema.TraceMeta = trace_schema.TraceMeta()) -> trace_schema.PowerTrace:
    match read_header(raw):
        case header if header == MONSOON_COLUMNS:
            return parse_monsoon(raw, meta)
        case header if header == SYSFS_COLUMNS:
            return parse_sysfs(raw, meta)
        case header:
            _malformed(1, f"unknown power trace header '{','.join(header)}'")


def parse_temperature(
    raw: RawInput,
    source: device_const.PowerSource = device_const.PowerSource.SIM,
    meta: trace_schema.TraceMeta = trace_schema.TraceMeta(),
) -> trace_schema.TempTrace:
    frame = _read_rows(raw, TEMPERATURE_COLUMNS)
    ts_s = _numeric_column(frame, "ts_s")
    sensors = _label_column(frame, "sensor")
    temp_c = _numeric_column(frame, "temp_C")
    low, high = TEMP_SANITY_BAND_C
    if (bad := (temp_c < low) | (temp_c > high)).any():
        _malformed(int(np.argmax(bad)) + FIRST_DATA_LINE, f"temperature {temp_c[bad][0]} outside [{low}, {high}] C")

    series: dict[str, trace_schema.TempSeries] = {}
    for sensor in pd.unique(sensors):
        rows = np.flatnonzero(sensors == sensor)
        _check_increasing(ts_s[rows], rows, strict=False)
        series[str(sensor)] = trace_schema.TempSeries(ts_s=ts_s[rows], temp_c=temp_c[rows])
    return trace_schema.TempTrace(sensors=series, source=source, meta=meta)


def _join_lines(header: tuple[str, ...], rows: typing.Iterable[str]) -> bytes:
    return ("".join(f"{line}\n" for line in (",".join(header), *rows))).encode("utf-8")


def serialize_monsoon(trace: trace_schema.PowerTrace) -> bytes:
    if trace.current_ma is None or trace.voltage_v is None:
        raise ValueError("only electrical traces serialize to the Monsoon format")
    rows = zip(trace.ts_s.tolist(), trace.current_ma.tolist(), trace.voltage_v.tolist(), strict=True)
    return _join_lines(MONSOON_COLUMNS, (f"{ts!r},{current!r},{voltage!r}" for ts, current, voltage in rows))


def serialize_sysfs(trace: trace_schema.PowerTrace, include_total: bool = True) -> bytes:
    rails = {rail: series for rail, series in trace.rails.items() if include_total or rail != device_const.Rail.TOTAL}
    frame = pd.concat(
        [
            pd.DataFrame({"ts_s": series.ts_s, "order": order, "rail": rail.value, "power_mW": series.power_mw})
            for order, (rail, series) in enumerate(rails.items())
        ],
        ignore_index=True,
    ).sort_values(["ts_s", "order"], kind="stable")
    rows = zip(frame["ts_s"].tolist(), frame["rail"].tolist(), frame["power_mW"].tolist(), strict=True)
    return _join_lines(SYSFS_COLUMNS, (f"{ts!r},{rail},{power!r}" for ts, rail, power in rows))


def serialize_power(trace: trace_schema.PowerTrace) -> bytes:
    return serialize_monsoon(trace) if trace.is_electrical else serialize_sysfs(trace)


def serialize_temperature(trace: trace_schema.TempTrace) -> bytes:
    rows = (
        f"{ts!r},{sensor},{temp!r}"
        for sensor, series in trace.sensors.items()
        for ts, temp in zip(series.ts_s.tolist(), series.temp_c.tolist(), strict=True)
    )
    return _join_lines(TEMPERATURE_COLUMNS, rows)
