from __future__ import annotations

import dataclasses
import typing

import numpy as np
import pydantic

import melt.const.device as device_const
import melt.schema.core as core_schema

FloatArray = np.ndarray


@dataclasses.dataclass(frozen=True)
class TraceMeta:
    device_id: str | None = None
    run_id: str | None = None


@dataclasses.dataclass(frozen=True)
class RailSeries:
    ts_s: FloatArray
    power_mw: FloatArray

    def __len__(self) -> int:
        return len(self.ts_s)


@dataclasses.dataclass(frozen=True, eq=False)
class PowerTrace:
    """
    Sampled electrical timeseries in host timebase.
    Monsoon and simulated phone traces carry current and voltage per sample,
    SysFS traces carry per-rail power and always hold a TOTAL rail, whose timestamps are `ts_s`.
    Timestamps of captured runs are seconds since the run manifest's host_start.
    """

    source: device_const.PowerSource
    ts_s: FloatArray
    nominal_rate_hz: float
    current_ma: FloatArray | None = None
    voltage_v: FloatArray | None = None
    rails: dict[device_const.Rail, RailSeries] = dataclasses.field(default_factory=dict)
    meta: TraceMeta = TraceMeta()
    # Number of sample gaps outside the accepted jitter band around the nominal period.
    jitter_violations: int = 0
    baseline_mw: float | None = None

    def __post_init__(self) -> None:
        if self.is_electrical:
            if self.current_ma is None or self.voltage_v is None:
                raise ValueError("electrical traces need current and voltage per sample")
            if not (len(self.ts_s) == len(self.current_ma) == len(self.voltage_v)):
                raise ValueError("current, voltage and timestamps differ in length")
        elif device_const.Rail.TOTAL not in self.rails:
            raise ValueError("rail traces need a TOTAL rail")

    def __len__(self) -> int:
        return len(self.ts_s)

    @property
    def is_electrical(self) -> bool:
        return self.current_ma is not None or self.source == device_const.PowerSource.MONSOON

    @property
    def is_net(self) -> bool:
        return self.baseline_mw is not None

    @property
    def power_mw(self) -> FloatArray:
        if self.is_electrical:
            return typing.cast(FloatArray, self.current_ma) * typing.cast(FloatArray, self.voltage_v)
        return self.rails[device_const.Rail.TOTAL].power_mw

    @property
    def t_first(self) -> float:
        return float(self.ts_s[0])

    @property
    def t_last(self) -> float:
        return float(self.ts_s[-1])

    @property
    def observed_rate_hz(self) -> float:
        return estimate_rate(self.ts_s)

    def replace(self, **changes: typing.Any) -> PowerTrace:
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class TempSeries:
    ts_s: FloatArray
    temp_c: FloatArray


@dataclasses.dataclass(frozen=True, eq=False)
class TempTrace:
    sensors: dict[str, TempSeries]
    source: device_const.PowerSource
    meta: TraceMeta = TraceMeta()

    @property
    def t_first(self) -> float:
        return min(float(series.ts_s[0]) for series in self.sensors.values() if len(series.ts_s))

    @property
    def t_last(self) -> float:
        return max(float(series.ts_s[-1]) for series in self.sensors.values() if len(series.ts_s))

    @property
    def is_empty(self) -> bool:
        return not any(len(series.ts_s) for series in self.sensors.values())


class BaselinePower(core_schema.FrozenModel):
    mean_power_mw: float
    window: tuple[float, float]
    sample_count: pydantic.PositiveInt

    @pydantic.model_validator(mode="after")
    def validate_window(self) -> typing.Self:
        if not self.window[0] < self.window[1]:
            raise ValueError("baseline window must have t0 < t1")
        return self


def estimate_rate(ts_s: FloatArray) -> float:
    if len(ts_s) < 2 or ts_s[-1] <= ts_s[0]:
        return 0.0
    return float((len(ts_s) - 1) / (ts_s[-1] - ts_s[0]))


def count_jitter_violations(ts_s: FloatArray, nominal_rate_hz: float, tolerance: float) -> int:
    if len(ts_s) < 2 or nominal_rate_hz <= 0:
        return 0
    period = 1.0 / nominal_rate_hz
    gaps = np.diff(ts_s)
    return int(np.count_nonzero((gaps < period * (1 - tolerance)) | (gaps > period * (1 + tolerance))))
