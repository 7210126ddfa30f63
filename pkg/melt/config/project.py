from __future__ import annotations

import functools
import logging
import pathlib as pt
import typing

import pydantic_settings

import melt.config.agent as agent_config
import melt.config.analysis as analysis_config
import melt.config.monitor as monitor_config
import melt.config.orchestrator as orchestrator_config
import melt.config.report as report_config

LOGLEVEL = typing.Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class MeltSetting(pydantic_settings.BaseSettings):
    debug: bool = False
    log_level: LOGLEVEL = "INFO"
    registry_path: pt.Path = pt.Path("registry.toml")

    orchestrator: orchestrator_config.OrchestratorSetting = orchestrator_config.OrchestratorSetting()
    agent: agent_config.AgentSetting = agent_config.AgentSetting()
    analysis: analysis_config.AnalysisSetting = analysis_config.AnalysisSetting()
    report: report_config.ReportSetting = report_config.ReportSetting()
    sentry: monitor_config.SentrySetting = monitor_config.SentrySetting()

    model_config = pydantic_settings.SettingsConfigDict(extra="ignore")

    def configure_logging(self) -> None:
        logging.basicConfig(
            level=logging.DEBUG if self.debug else self.log_level,
            format="%(asctime)s %(levelname)-5.5s [%(name)s] %(message)s",
        )


@functools.lru_cache(maxsize=1)
def get_melt_setting() -> MeltSetting:
    return MeltSetting(
        _env_file=".env",
        _env_file_encoding="utf-8",
        _env_nested_delimiter="__",
        _case_sensitive=False,
    )
