import typing

import pydantic
import pydantic_settings

SENTRY_MODE = typing.Literal["orchestrator", "agent"]


class SentrySetting(pydantic_settings.BaseSettings):
    orchestrator_dsn: pydantic.HttpUrl | None = None
    orchestrator_enable_tracing: bool = False
    orchestrator_traces_sample_rate: float = 1.0
    orchestrator_profiles_sample_rate: float = 0.0

    agent_dsn: pydantic.HttpUrl | None = None
    agent_enable_tracing: bool = True
    agent_traces_sample_rate: float = 1.0
    agent_profiles_sample_rate: float = 1.0

    MODE_LIST: typing.ClassVar[set[SENTRY_MODE]] = {"orchestrator", "agent"}
    ATTR_LIST: typing.ClassVar[set[str]] = {
        "dsn",
        "enable_tracing",
        "traces_sample_rate",
        "profiles_sample_rate",
    }

    def is_sentry_available(self, mode: SENTRY_MODE) -> bool:
        if mode not in self.MODE_LIST:
            raise ValueError(f"Invalid mode: {mode}")

        return bool(getattr(self, f"{mode}_dsn"))

    def build_config(self, mode: SENTRY_MODE) -> dict[str, str | float | bool]:
        if mode not in self.MODE_LIST:
            raise ValueError(f"Invalid mode: {mode}")

        config = {attr: getattr(self, f"{mode}_{attr}") for attr in self.ATTR_LIST}
        config["dsn"] = str(config["dsn"])
        return config

    def init_sentry(self, mode: SENTRY_MODE) -> bool:
        if not self.is_sentry_available(mode):
            return False

        import sentry_sdk

        sentry_sdk.init(**self.build_config(mode))
        return True
