from __future__ import annotations

import json
import typing

import pydantic

import melt.const.device as device_const
import melt.const.event as event_const


class Event(pydantic.BaseModel):
    ts_ns: int
    kind: event_const.EventKind
    phase: event_const.EventPhase
    attrs: dict[str, typing.Any] = {}

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    def to_jsonl(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def shifted(self, delta_ns: int) -> Event:
        return self.model_copy(update={"ts_ns": self.ts_ns + delta_ns})


def dump_events(events: typing.Iterable[Event]) -> bytes:
    return "".join(f"{event.to_jsonl()}\n" for event in events).encode("utf-8")


def load_events(raw: bytes | str) -> list[Event]:
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    return [Event.model_validate_json(line) for line in text.splitlines() if line.strip()]


class PromptSpec(pydantic.BaseModel):
    tokens: pydantic.PositiveInt
    # When omitted, macro runs draw the generation length from the profile distribution.
    gen_tokens: pydantic.PositiveInt | None = None

    model_config = pydantic.ConfigDict(extra="forbid")


class Conversation(pydantic.BaseModel):
    prompts: list[PromptSpec]

    model_config = pydantic.ConfigDict(extra="forbid")


class ConversationSet(pydantic.BaseModel):
    conversations: list[Conversation] = []

    model_config = pydantic.ConfigDict(extra="forbid")

    @property
    def prompt_count(self) -> int:
        return sum(len(conversation.prompts) for conversation in self.conversations)


class PowerState(pydantic.BaseModel):
    """Prompts with 0-based index >= after_prompt run with scaled rates and power."""

    after_prompt: pydantic.NonNegativeInt
    rate_scale: float = pydantic.Field(gt=0, le=1)
    power_scale: pydantic.PositiveFloat = 1.0

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")


FaultKind = typing.Literal["oom", "stall", "crash", "never_boot", "unlock_fail", "unreachable"]
PROMPT_FAULTS: frozenset[str] = frozenset({"oom", "stall", "crash"})


class FaultSpec(pydantic.BaseModel):
    kind: FaultKind
    # Prompt index within the run; prompt-level faults default to the first prompt.
    prompt_index: pydantic.NonNegativeInt | None = None
    # Counts launches of the backend app since the agent started (0-based); None means every run.
    run_index: pydantic.NonNegativeInt | None = None
    stall_s: pydantic.PositiveFloat = 3600.0

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    @property
    def is_prompt_level(self) -> bool:
        return self.kind in PROMPT_FAULTS

    def matches(self, run_index: int, prompt_index: int | None = None) -> bool:
        if self.run_index is not None and self.run_index != run_index:
            return False
        if prompt_index is None:
            return not self.is_prompt_level
        return self.is_prompt_level and (self.prompt_index or 0) == prompt_index


class SimProfile(pydantic.BaseModel):
    prefill_rate_tps: pydantic.PositiveFloat = 80.0
    decode_rate_tps: pydantic.PositiveFloat = 25.0
    load_time_s: pydantic.NonNegativeFloat = 2.41
    launch_idle_s: pydantic.NonNegativeFloat = 5.0
    inter_prompt_gap_s: pydantic.NonNegativeFloat = 0.0
    power_states: list[PowerState] = []

    idle_power_mw: pydantic.NonNegativeFloat = 380.0
    load_power_mw: pydantic.NonNegativeFloat = 3000.0
    prefill_power_mw: pydantic.NonNegativeFloat = 6000.0
    decode_power_mw: pydantic.NonNegativeFloat = 5000.0
    tail_tau_s: pydantic.NonNegativeFloat = 1.0
    voltage_v: pydantic.PositiveFloat = 3.8
    sample_rate_hz: pydantic.PositiveFloat = 5000.0
    noise_std_mw: pydantic.NonNegativeFloat = 0.0

    # Per-rail split for sysfs-style (edge) simulation; shares must sum to 1.
    rail_shares: dict[device_const.Rail, pydantic.NonNegativeFloat] = {
        device_const.Rail.CPU: 0.35,
        device_const.Rail.GPU: 0.45,
        device_const.Rail.SOC: 0.1,
        device_const.Rail.DDR: 0.1,
    }

    ambient_c: float = 25.0
    thermal_k_c_per_w: pydantic.NonNegativeFloat = 4.5
    thermal_tau_s: pydantic.PositiveFloat = 30.0
    temp_sample_rate_hz: pydantic.PositiveFloat = 10.0
    temp_noise_std_c: pydantic.NonNegativeFloat = 0.0

    macro_gen_mean: pydantic.PositiveFloat = 135.0
    macro_gen_std: pydantic.NonNegativeFloat = 40.0

    # Per-op kernel split of each prefill and decode step, as fractions of the phase duration.
    op_shares: dict[str, dict[str, pydantic.NonNegativeFloat]] = {}

    clock_offset_ns: int = 0
    clock_rtt_ns: pydantic.NonNegativeInt = 2_000_000
    boot_time_s: pydantic.NonNegativeFloat = 1.0
    faults: list[FaultSpec] = []
    seed: pydantic.NonNegativeInt = 0

    model_config = pydantic.ConfigDict(extra="forbid")

    @pydantic.model_validator(mode="after")
    def validate_profile(self) -> typing.Self:
        if self.rail_shares and abs(sum(self.rail_shares.values()) - 1.0) > 1e-9:
            raise ValueError("rail_shares must sum to 1")
        if device_const.Rail.TOTAL in self.rail_shares:
            raise ValueError("TOTAL is synthesized, not simulated")
        self.power_states = sorted(self.power_states, key=lambda state: state.after_prompt)
        return self

    def state_for(self, prompt_index: int) -> PowerState | None:
        """The most recent power state that has kicked in by this (0-based) prompt."""
        active: PowerState | None = None
        for state in self.power_states:
            if prompt_index >= state.after_prompt:
                active = state
        return active

    def with_seed(self, seed: int) -> SimProfile:
        return self.model_copy(update={"seed": seed})
