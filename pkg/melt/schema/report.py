from __future__ import annotations

import pydantic

import melt.const.run as run_const
import melt.schema.analysis as analysis_schema
import melt.schema.core as core_schema
import melt.schema.trace as trace_schema

# Kept in every report so readers do not compare the two energy figures as if they shared a window.
PER_INFERENCE_NOTE = (
    "inference_energy_mwh spans prefill start to the last decode token, energy_mwh_per_token only the decode "
    "window divided by generated tokens; the two are not expected to agree as inference/token_count."
)


class RunReport(pydantic.BaseModel):
    manifest: core_schema.RunManifest
    prompts: list[analysis_schema.PromptMetrics] = []
    windows: list[analysis_schema.EnergyWindow] = []
    baseline: trace_schema.BaselinePower | None = None
    degradation: analysis_schema.DegradationReport | None = None
    thermal: analysis_schema.ThermalSummary | None = None
    ops: dict[str, dict[str, analysis_schema.OpShare]] = {}
    load_time_s: float | None = None
    battery_prompts_to_depletion: float | None = None
    quality: analysis_schema.DataQuality = analysis_schema.DataQuality()
    notes: list[str] = []

    model_config = pydantic.ConfigDict(extra="forbid")

    @property
    def is_ok(self) -> bool:
        return self.manifest.status == run_const.RunStatus.OK

    @property
    def run_window(self) -> analysis_schema.EnergyWindow | None:
        return next((window for window in self.windows if window.label == "run"), None)


class AggregateRow(pydantic.BaseModel):
    keys: dict[str, str]
    level: str  # "run" spreads across iterations, "prompt" across all prompts of the group
    metric: str
    mean: float | None
    std: float | None
    n: pydantic.NonNegativeInt
    attrition: pydantic.NonNegativeInt = 0

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")
