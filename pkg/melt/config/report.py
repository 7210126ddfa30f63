import pydantic
import pydantic_settings


class ReportSetting(pydantic_settings.BaseSettings):
    significant_digits: pydantic.PositiveInt = 6
    timeline_smoothing_n: pydantic.PositiveInt = 500
    group_by: list[str] = ["device", "model", "backend", "quant", "energy_mode", "grid_point"]
