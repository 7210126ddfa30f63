from __future__ import annotations

import abc
import dataclasses
import logging
import pathlib as pt

import melt.agent.__interface__ as agent_interface
import melt.config.project as project_config
import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.run as run_const
import melt.schema.core as core_schema
import melt.util.mu_file as file_util
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class MonitorSession:
    run_id: str
    device_id: str
    sampling_frequency_hz: float
    sinks: dict[run_const.ArtifactKind, pt.Path]
    state: run_const.MonitorState = run_const.MonitorState.ARMED
    host_start: int | None = None
    host_end: int | None = None

    @property
    def is_open(self) -> bool:
        return self.state != run_const.MonitorState.STOPPED


class PowerMonitor(abc.ABC):
    """
    Capture channel of one device: power (and temperature) recorded between start and stop.
    Only one session per device can be open at a time.
    """

    def __init__(self, device: core_schema.DeviceDescriptor, clock: time_util.HostClock | None = None) -> None:
        self.device = device
        self.clock: time_util.HostClock = clock or time_util.SystemClock()
        self._active: MonitorSession | None = None

    @property
    def default_rate_hz(self) -> float:
        return project_config.get_melt_setting().orchestrator.sampling_frequency_hz[self.device.power_source]

    def arm(self, run_id: str, sinks: dict[run_const.ArtifactKind, pt.Path]) -> MonitorSession:
        if self._active is not None and self._active.is_open:
            error_const.OrchestratorError.MONITOR_BUSY.build(device=self.device.id, run_id=self._active.run_id).raise_()
        self._active = MonitorSession(
            run_id=run_id, device_id=self.device.id, sampling_frequency_hz=self.default_rate_hz, sinks=sinks
        )
        logger.debug(f"[{self.device.id}] monitor armed for {run_id} at {self.default_rate_hz} Hz")
        return self._active

    async def start(self, session: MonitorSession) -> None:
        if session.state != run_const.MonitorState.ARMED:
            return
        session.host_start = self.clock.now_ns()
        session.state = run_const.MonitorState.RECORDING

    async def stop(self, session: MonitorSession) -> None:
        """Idempotent; a session that never recorded is closed without capture."""
        if session.state == run_const.MonitorState.STOPPED:
            return
        was_recording = session.state == run_const.MonitorState.RECORDING
        session.state = run_const.MonitorState.STOPPED
        if was_recording:
            session.host_end = self.clock.now_ns()
            await self._capture(session)

    @abc.abstractmethod
    async def _capture(self, session: MonitorSession) -> None: ...


class SimMonitor(PowerMonitor):
    """Asks the simulated device what the instruments would have recorded over the session."""

    def __init__(
        self,
        source: agent_interface.SimTraceSource,
        device: core_schema.DeviceDescriptor,
        clock: time_util.HostClock | None = None,
        sampling_frequency_hz: float | None = None,
    ) -> None:
        super().__init__(device, clock)
        self.source = source
        self._rate_hz = sampling_frequency_hz

    @property
    def default_rate_hz(self) -> float:
        if self._rate_hz is not None:
            return self._rate_hz
        rates = project_config.get_melt_setting().orchestrator.sampling_frequency_hz
        if (rate := rates.get(self.device.power_source)) is not None:
            return rate
        # In-process simulators know their own rate, remote ones are sampled like a Monsoon.
        profile = getattr(self.source, "profile", None)
        return profile.sample_rate_hz if profile is not None else rates[device_const.PowerSource.MONSOON]

    async def _capture(self, session: MonitorSession) -> None:
        assert session.host_start is not None and session.host_end is not None  # nosec: B101
        traces = await self.source.sim_trace(session.host_start, session.host_end, session.sampling_frequency_hz)
        await file_util.async_save_bytes(traces.power.encode("utf-8"), session.sinks[run_const.ArtifactKind.POWER])
        await file_util.async_save_bytes(
            traces.temperature.encode("utf-8"), session.sinks[run_const.ArtifactKind.TEMPERATURE]
        )
