from __future__ import annotations

import dataclasses
import typing

import pydantic

import melt.const.time as time_const
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.schema.trace as trace_schema


@dataclasses.dataclass(frozen=True, eq=False)
class AlignedTimeline:
    """
    Events moved into host timebase next to the traces of the same run.
    `epoch_ns` is the host timestamp that trace second 0.0 refers to.
    """

    events: list[event_schema.Event]
    power: trace_schema.PowerTrace
    epoch_ns: int
    offset_ns: int
    temperature: trace_schema.TempTrace | None = None
    manifest: core_schema.RunManifest | None = None
    partial: bool = False
    out_of_range_count: int = 0

    def to_trace_s(self, host_ns: int) -> float:
        return (host_ns - self.epoch_ns) / time_const.NS_PER_S

    def event_s(self, event: event_schema.Event) -> float:
        return self.to_trace_s(event.ts_ns)


class EnergyWindow(core_schema.FrozenModel):
    label: str = ""
    window: tuple[float, float]
    energy_mwh_gross: float
    energy_mwh_net: float | None = None
    # Rail-only traces carry no current, so their charge is unknown.
    charge_mah_gross: float | None = None
    charge_mah_net: float | None = None
    negative_net_flag: bool = False

    @property
    def duration_s(self) -> float:
        return self.window[1] - self.window[0]

    @property
    def energy_mwh(self) -> float:
        return self.energy_mwh_gross if self.energy_mwh_net is None else self.energy_mwh_net

    @property
    def charge_mah(self) -> float | None:
        return self.charge_mah_gross if self.charge_mah_net is None else self.charge_mah_net


class PromptMetrics(core_schema.FrozenModel):
    prompt_index: pydantic.NonNegativeInt
    conversation_index: pydantic.NonNegativeInt = 0
    prompt_tokens: pydantic.PositiveInt
    generated_tokens: pydantic.NonNegativeInt
    prefill_s: pydantic.PositiveFloat
    decode_s: pydantic.PositiveFloat | None = None
    prefill_tps: pydantic.PositiveFloat
    generation_tps: pydantic.PositiveFloat | None = None

    # Net when a baseline is known, gross otherwise; the gross twins are always filled when measurable.
    discharge_mah_per_token: float | None = None
    discharge_mah_per_token_gross: float | None = None
    energy_mwh_per_token: float | None = None
    energy_mwh_per_token_gross: float | None = None

    prefill_energy_mwh: float | None = None
    prefill_energy_mwh_gross: float | None = None
    inference_energy_mwh: float | None = None
    inference_energy_mwh_gross: float | None = None
    inference_discharge_mah: float | None = None

    load_time_s: float | None = None
    max_temp_c: float | None = None


class DegradationReport(core_schema.FrozenModel):
    series: list[float]
    changepoints: list[pydantic.NonNegativeInt]
    window_w: pydantic.PositiveInt
    drop_threshold: float


class OpShare(core_schema.FrozenModel):
    total_us: float
    share: float


class SensorStats(core_schema.FrozenModel):
    max_c: float
    mean_c: float
    sample_count: pydantic.PositiveInt


class ThermalSummary(core_schema.FrozenModel):
    window: tuple[float, float]
    max_c: float
    mean_c: float
    sensors: dict[str, SensorStats]


class DataQuality(core_schema.FrozenModel):
    partial: bool = False
    negative_net: bool = False
    out_of_range_events: pydantic.NonNegativeInt = 0
    jitter_violations: pydantic.NonNegativeInt = 0

    @property
    def is_clean(self) -> bool:
        return not (self.partial or self.negative_net or self.jitter_violations)


MetricName = typing.Literal[
    "prefill_tps",
    "generation_tps",
    "discharge_mah_per_token",
    "discharge_mah_per_token_gross",
    "energy_mwh_per_token",
    "energy_mwh_per_token_gross",
    "prefill_energy_mwh",
    "inference_energy_mwh",
    "inference_energy_mwh_gross",
    "max_temp_c",
]
PROMPT_METRIC_NAMES: tuple[str, ...] = typing.get_args(MetricName)
