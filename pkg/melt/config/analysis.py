import pydantic
import pydantic_settings


class AnalysisSetting(pydantic_settings.BaseSettings):
    # Weights-only estimate times this factor must fit in device memory (KV cache, activations).
    memory_overhead_factor: pydantic.PositiveFloat = 1.4

    alignment_epsilon_s: pydantic.NonNegativeFloat = 1.0
    baseline_min_samples: pydantic.PositiveInt = 10
    rate_jitter_tolerance: float = pydantic.Field(default=0.5, gt=0, lt=1)

    degradation_window: pydantic.PositiveInt = 5
    degradation_drop_frac: float = pydantic.Field(default=0.05, gt=0, lt=1)
