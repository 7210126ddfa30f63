from __future__ import annotations

import pydantic

import melt.const.device as device_const
import melt.const.model as model_const
import melt.schema.event as event_schema


class AppConfig(pydantic.BaseModel):
    """Model and execution parameters applied on the device before the iterations of a spec."""

    model: str
    backend: model_const.Backend
    context_size: pydantic.PositiveInt
    max_gen_length: pydantic.PositiveInt
    batch_size: pydantic.PositiveInt
    mode: model_const.ExperimentMode = model_const.ExperimentMode.MACRO
    ignore_eos: bool = False
    energy_mode: str | None = None

    model_config = pydantic.ConfigDict(extra="forbid")


class PowerRequest(pydantic.BaseModel):
    action: device_const.PowerAction


class StatusResponse(pydantic.BaseModel):
    device_id: str
    powered: bool
    responsive: bool
    launched: bool
    run_index: int


class ClockProbeRequest(pydantic.BaseModel):
    host_ts_ns: int


class ClockProbeResponse(pydantic.BaseModel):
    device_ts_ns: int


class LaunchRequest(pydantic.BaseModel):
    backend: model_const.Backend


class PromptRequest(pydantic.BaseModel):
    conversation_index: pydantic.NonNegativeInt
    prompt_index: pydantic.NonNegativeInt
    tokens: pydantic.PositiveInt
    gen_tokens: pydantic.PositiveInt | None = None
    last_in_conversation: bool = True


class PromptReport(pydantic.BaseModel):
    conversation_index: pydantic.NonNegativeInt
    prompt_index: pydantic.NonNegativeInt
    prompt_tokens: pydantic.PositiveInt
    generated_tokens: pydantic.NonNegativeInt
    text: str = ""
    events: list[event_schema.Event] = []

    @property
    def response(self) -> dict:
        return self.model_dump(mode="json", exclude={"events"})


class SimTraceRequest(pydantic.BaseModel):
    host_start_ns: int
    host_end_ns: int
    sampling_frequency_hz: pydantic.PositiveFloat | None = None


class SimTraceResponse(pydantic.BaseModel):
    # CSV documents in the wire formats of the monitoring channel.
    power: str
    temperature: str
