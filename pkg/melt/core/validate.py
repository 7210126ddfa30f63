from __future__ import annotations

import enum
import logging

import melt.config.project as project_config
import melt.const.model as model_const
import melt.schema.core as core_schema

logger = logging.getLogger(__name__)

BYTES_PER_GB = 1e9


class ViolationCode(enum.StrEnum):
    INSUFFICIENT_MEMORY = enum.auto()
    MICRO_GEN_LENGTH = enum.auto()
    MICRO_CONTEXT = enum.auto()
    ZERO_ITERATIONS = enum.auto()
    DEVICE_MISMATCH = enum.auto()


class Violation(core_schema.FrozenModel):
    code: ViolationCode
    msg: str


def estimate_memory_gb(model: core_schema.ModelDescriptor, overhead_factor: float) -> float:
    return model.weight_bytes * overhead_factor / BYTES_PER_GB


def validate_spec(
    spec: core_schema.ExperimentSpec,
    device: core_schema.DeviceDescriptor,
    overhead_factor: float | None = None,
) -> list[Violation]:
    """
    Pre-flight heuristics only, nothing here refuses to run a spec.
    An empty list means the spec looks sound.
    """
    if overhead_factor is None:
        overhead_factor = project_config.get_melt_setting().analysis.memory_overhead_factor

    violations: list[Violation] = []
    if spec.device.id != device.id:
        violations.append(
            Violation(
                code=ViolationCode.DEVICE_MISMATCH,
                msg=f"spec targets '{spec.device.id}' but is validated against '{device.id}'",
            )
        )

    if (needed_gb := estimate_memory_gb(spec.model, overhead_factor)) > device.mem_gb:
        violations.append(
            Violation(
                code=ViolationCode.INSUFFICIENT_MEMORY,
                msg=(
                    f"insufficient memory: {spec.model.name} needs ~{needed_gb:.2f} GB, "
                    f"{device.id} has {device.mem_gb} GB"
                ),
            )
        )

    if spec.mode == model_const.ExperimentMode.MICRO:
        if spec.max_gen_length != model_const.MICRO_GEN_TOKENS:
            violations.append(
                Violation(
                    code=ViolationCode.MICRO_GEN_LENGTH,
                    msg=f"micro mode generates exactly {model_const.MICRO_GEN_TOKENS} tokens, "
                    f"max_gen_length is {spec.max_gen_length}",
                )
            )
        if spec.context_size < model_const.MICRO_PREFILL_TOKENS + model_const.MICRO_GEN_TOKENS:
            violations.append(
                Violation(
                    code=ViolationCode.MICRO_CONTEXT,
                    msg=f"context of {spec.context_size} tokens cannot hold the micro prefill and generation",
                )
            )

    if spec.iterations < 1:
        violations.append(
            Violation(code=ViolationCode.ZERO_ITERATIONS, msg=f"iterations must be >= 1, got {spec.iterations}")
        )

    for violation in violations:
        logger.warning(f"{spec.label}: {violation.msg}")
    return violations
