import pydantic
import pydantic_settings

import melt.const.device as device_const


class OrchestratorSetting(pydantic_settings.BaseSettings):
    iterations: pydantic.PositiveInt = 3
    sleep_between_s: pydantic.NonNegativeFloat = 5.0
    conversation_timeout_s: pydantic.PositiveFloat = 3600.0

    clock_probe_count: int = pydantic.Field(default=5, ge=5)
    clock_max_rtt_ms: pydantic.PositiveFloat = 50.0

    power_timeout_s: pydantic.PositiveFloat = 120.0
    power_poll_interval_s: pydantic.PositiveFloat = 0.5
    agent_request_timeout_s: pydantic.PositiveFloat = 30.0

    notification_host: str = "127.0.0.1"
    notification_port: int = 8765

    # Monsoon captures at up to 5 kHz, SysFS probes are polled at roughly 100 Hz.
    # Simulated devices sample at the rate of their profile.
    sampling_frequency_hz: dict[device_const.PowerSource, pydantic.PositiveFloat] = {
        device_const.PowerSource.MONSOON: 5000.0,
        device_const.PowerSource.SYSFS: 100.0,
    }

    @property
    def api_address(self) -> str:
        return f"http://{self.notification_host}:{self.notification_port}"

    def to_uvicorn_config(self) -> dict:
        return {"host": self.notification_host, "port": self.notification_port, "log_level": "warning"}
