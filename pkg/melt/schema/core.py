from __future__ import annotations

import pathlib as pt
import re
import typing

import pydantic

import melt.const.device as device_const
import melt.const.model as model_const
import melt.const.run as run_const

DIGEST_REGEX = re.compile(r"^[0-9a-f]{64}$")


class FrozenModel(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", use_enum_values=False)


class ModelDescriptor(FrozenModel):
    name: str
    family: str
    param_count: pydantic.PositiveFloat  # billions
    quant_scheme: model_const.QuantScheme
    bitwidth: int
    format: model_const.ModelFormat
    artifact_uri: str | None = None
    artifact_digest: str | None = None

    @pydantic.field_validator("bitwidth", mode="after")
    @classmethod
    def validate_bitwidth(cls, value: int) -> int:
        if value not in model_const.ALLOWED_BITWIDTHS:
            raise ValueError(f"bitwidth must be one of {sorted(model_const.ALLOWED_BITWIDTHS)}, got {value}")
        return value

    @pydantic.field_validator("artifact_digest", mode="before")
    @classmethod
    def validate_digest(cls, value: str | None) -> str | None:
        if value is None:
            return None
        if not DIGEST_REGEX.match(value := value.lower()):
            raise ValueError("artifact_digest must be 64 hex chars")
        return value

    @property
    def weight_bytes(self) -> float:
        return self.param_count * 1e9 * self.bitwidth / 8


class DeviceDescriptor(FrozenModel):
    id: str
    lab: device_const.Lab
    platform: device_const.Platform
    soc: str
    mem_gb: pydantic.PositiveInt
    battery_capacity_mah: pydantic.PositiveFloat | None = None
    tier: device_const.Tier
    power_source: device_const.PowerSource
    energy_mode: str | None = None

    @pydantic.model_validator(mode="after")
    def validate_lab_wiring(self) -> typing.Self:
        if self.lab == device_const.Lab.PHONE and self.battery_capacity_mah is None:
            raise ValueError(f"phone device '{self.id}' needs battery_capacity_mah")
        if self.lab == device_const.Lab.EDGE and self.battery_capacity_mah is not None:
            raise ValueError(f"edge device '{self.id}' has no battery")
        if self.power_source != device_const.PowerSource.SIM:
            if (expected := device_const.LAB_POWER_SOURCE.get(self.lab)) and expected != self.power_source:
                raise ValueError(f"{self.lab} devices are measured with {expected}, not {self.power_source}")
        return self

    @property
    def is_phone_like(self) -> bool:
        # Simulated devices with a battery stand in for phones.
        return self.lab == device_const.Lab.PHONE or (
            self.lab == device_const.Lab.SIM and self.battery_capacity_mah is not None
        )

    @property
    def supports_power_control(self) -> bool:
        return self.lab != device_const.Lab.EDGE


class GridSpec(FrozenModel):
    contexts: list[pydantic.PositiveInt]
    max_gen_lengths: list[pydantic.PositiveInt]
    batch_sizes: list[pydantic.PositiveInt]


class GridPoint(typing.NamedTuple):
    context_size: int
    max_gen_length: int
    batch_size: int

    def label(self) -> str:
        return f"{self.context_size}/{self.max_gen_length}/{self.batch_size}"


class ExperimentSpec(FrozenModel):
    model: ModelDescriptor
    device: DeviceDescriptor
    backend: model_const.Backend
    context_size: pydantic.PositiveInt
    max_gen_length: pydantic.PositiveInt
    batch_size: pydantic.PositiveInt
    mode: model_const.ExperimentMode = model_const.ExperimentMode.MACRO
    conversations_uri: str
    # Left unconstrained so that validate_spec can report it instead of failing construction.
    iterations: int = 3
    sleep_between_s: pydantic.NonNegativeFloat = 5.0
    conversation_timeout_s: pydantic.PositiveFloat = 3600.0

    @property
    def grid_point(self) -> GridPoint:
        return GridPoint(self.context_size, self.max_gen_length, self.batch_size)

    @property
    def ignores_eos(self) -> bool:
        return self.mode == model_const.ExperimentMode.MICRO

    @property
    def label(self) -> str:
        return f"{self.device.id}:{self.model.name}:{self.backend}:{self.grid_point.label()}"


class ClockSync(FrozenModel):
    offset_ns: int  # device_clock - host_clock
    rtt_ns: pydantic.NonNegativeInt
    sampled_at: int  # host ns

    def to_host_ns(self, device_ts_ns: int) -> int:
        return device_ts_ns - self.offset_ns


class RunManifest(pydantic.BaseModel):
    run_id: str
    spec: ExperimentSpec
    iteration: pydantic.NonNegativeInt
    clock_sync: ClockSync
    host_start: int
    host_end: int
    artifact_paths: dict[run_const.ArtifactKind, str] = {}
    status: run_const.RunStatus = run_const.RunStatus.OK
    status_log: list[run_const.RunStep] = []
    error: str | None = None
    marks: dict[run_const.NotificationKind, int] = {}

    model_config = pydantic.ConfigDict(extra="forbid")

    @pydantic.model_validator(mode="after")
    def validate_ok_run(self) -> typing.Self:
        if self.status == run_const.RunStatus.OK:
            if self.host_start >= self.host_end:
                raise ValueError("host_start must precede host_end for a successful run")
            if missing := set(run_const.ArtifactKind) - set(self.artifact_paths):
                raise ValueError(f"successful run lacks artifacts: {sorted(missing)}")
        return self

    def artifact(self, run_dir: pt.Path, kind: run_const.ArtifactKind) -> pt.Path:
        return run_dir / self.artifact_paths.get(kind, run_const.ARTIFACT_FILENAMES[kind])


class RegistryManifest(pydantic.BaseModel):
    """Top-level `models` and `devices` arrays; unknown keys rejected."""

    models: list[ModelDescriptor] = []
    devices: list[DeviceDescriptor] = []

    model_config = pydantic.ConfigDict(extra="forbid")


class QueueEntry(pydantic.BaseModel):
    model: str
    backend: model_const.Backend
    mode: model_const.ExperimentMode = model_const.ExperimentMode.MACRO
    conversations_uri: str
    grid: GridSpec | None = None
    context_size: pydantic.PositiveInt | None = None
    max_gen_length: pydantic.PositiveInt | None = None
    batch_size: pydantic.PositiveInt | None = None
    iterations: int | None = None
    sleep_between_s: pydantic.NonNegativeFloat | None = None
    conversation_timeout_s: pydantic.PositiveFloat | None = None

    model_config = pydantic.ConfigDict(extra="forbid")

    @pydantic.model_validator(mode="after")
    def validate_grid_or_point(self) -> typing.Self:
        point = (self.context_size, self.max_gen_length, self.batch_size)
        if self.grid is None and None in point:
            raise ValueError("queue entry needs either a grid or context_size/max_gen_length/batch_size")
        return self


class QueueFile(pydantic.BaseModel):
    device: str | None = None
    experiments: list[QueueEntry]

    model_config = pydantic.ConfigDict(extra="forbid")
