from __future__ import annotations

import typing

import melt.const.device as device_const
import melt.const.model as model_const
import melt.schema.agent as agent_schema


@typing.runtime_checkable
class DeviceAgent(typing.Protocol):
    """
    Capability set the orchestrator drives a device through.
    Implemented in-process by the simulator and over HTTP by the agent client; ADB, Bluetooth-HID
    or SSH transports would be further implementations of the same protocol.
    """

    @property
    def device_id(self) -> str: ...

    async def power(self, action: device_const.PowerAction) -> None: ...

    async def status(self) -> agent_schema.StatusResponse: ...

    async def clock(self, host_ts_ns: int) -> int: ...

    async def unlock(self) -> None: ...

    async def push(self, name: str, content: bytes) -> None: ...

    async def apply(self, config: agent_schema.AppConfig) -> None: ...

    async def launch(self, backend: model_const.Backend) -> None: ...

    async def prompt(self, request: agent_schema.PromptRequest) -> agent_schema.PromptReport: ...

    async def interrupt(self) -> None: ...

    async def collect(self, name: str) -> bytes: ...


@typing.runtime_checkable
class SimTraceSource(typing.Protocol):
    """Simulated devices also synthesize what the power monitor and thermal probe would have recorded."""

    async def sim_trace(
        self, host_start_ns: int, host_end_ns: int, sampling_frequency_hz: float | None = None
    ) -> agent_schema.SimTraceResponse: ...
