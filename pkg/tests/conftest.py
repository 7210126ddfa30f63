from __future__ import annotations

import pathlib as pt
import typing

import numpy as np
import pytest

import melt.agent.serve as serve
import melt.agent.sim as sim
import melt.agent.synth as synth
import melt.analysis.align as align
import melt.const.device as device_const
import melt.const.model as model_const
import melt.const.time as time_const
import melt.core.registry as registry_module
import melt.schema.analysis as analysis_schema
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.schema.trace as trace_schema
import melt.util.time_util as time_util

START_NS = 1_700_000_000 * time_const.NS_PER_S

PROMPTS_TOML = """
[[conversations]]
prompts = [{tokens = 160, gen_tokens = 50}, {tokens = 160, gen_tokens = 50}, {tokens = 160, gen_tokens = 50}]

[[conversations]]
prompts = [{tokens = 160, gen_tokens = 50}, {tokens = 160, gen_tokens = 50}, {tokens = 160, gen_tokens = 50}]
"""


@pytest.fixture
def sim_device() -> core_schema.DeviceDescriptor:
    return serve.DEFAULT_SIM_DEVICE


@pytest.fixture
def sim_model() -> core_schema.ModelDescriptor:
    return serve.DEFAULT_SIM_MODEL


@pytest.fixture
def quiet_profile() -> event_schema.SimProfile:
    """Noise-free simulator sampled at 1 kHz."""
    return event_schema.SimProfile(sample_rate_hz=1000.0, temp_sample_rate_hz=5.0)


@pytest.fixture
def conversations_path(tmp_path: pt.Path) -> pt.Path:
    path = tmp_path / "prompts.toml"
    path.write_text(PROMPTS_TOML, encoding="utf-8")
    return path


@pytest.fixture
def registry(
    sim_device: core_schema.DeviceDescriptor, sim_model: core_schema.ModelDescriptor
) -> registry_module.Registry:
    return registry_module.Registry(models={sim_model.name: sim_model}, devices={sim_device.id: sim_device})


@pytest.fixture
def make_spec(
    sim_device: core_schema.DeviceDescriptor, sim_model: core_schema.ModelDescriptor, conversations_path: pt.Path
) -> typing.Callable[..., core_schema.ExperimentSpec]:
    def factory(**changes: typing.Any) -> core_schema.ExperimentSpec:
        fields: dict[str, typing.Any] = {
            "model": sim_model,
            "device": sim_device,
            "backend": model_const.Backend.SIM,
            "context_size": 2048,
            "max_gen_length": 256,
            "batch_size": 1,
            "conversations_uri": str(conversations_path),
            "iterations": 1,
            "sleep_between_s": 0.0,
        }
        return core_schema.ExperimentSpec(**(fields | changes))

    return factory


@pytest.fixture
def make_trace() -> typing.Callable[..., trace_schema.PowerTrace]:
    """Electrical trace with constant voltage, built from power samples."""

    def factory(ts_s: np.ndarray, power_mw: np.ndarray, voltage_v: float = 3.8) -> trace_schema.PowerTrace:
        voltage = np.full(len(ts_s), voltage_v)
        return trace_schema.PowerTrace(
            source=device_const.PowerSource.SIM,
            ts_s=np.asarray(ts_s, dtype=float),
            current_ma=np.asarray(power_mw, dtype=float) / voltage,
            voltage_v=voltage,
            nominal_rate_hz=trace_schema.estimate_rate(np.asarray(ts_s, dtype=float)),
        )

    return factory


@pytest.fixture
def build_timeline() -> typing.Callable[..., analysis_schema.AlignedTimeline]:
    """Launch plus the given (prompt_tokens, gen_tokens) prompts, synthesized and aligned with a zero clock offset."""

    def factory(
        profile: event_schema.SimProfile, prompts: list[tuple[int, int]], tail_s: float = 1.0
    ) -> analysis_schema.AlignedTimeline:
        events, now_ns = sim.launch_events(profile, START_NS)
        state = sim.SimState(now_ns=now_ns)
        for prompt_tokens, gen_tokens in prompts:
            prompt_events, state = sim.sim_execute_prompt(profile, prompt_tokens, gen_tokens, state)
            events += prompt_events

        host_end_ns = state.now_ns + time_util.s_to_ns(tail_s)
        power = synth.sim_power_trace(profile, events, host_start_ns=START_NS, host_end_ns=host_end_ns)
        temperature = synth.sim_temperature_trace(profile, events, host_start_ns=START_NS, host_end_ns=host_end_ns)
        clock_sync = core_schema.ClockSync(offset_ns=0, rtt_ns=0, sampled_at=START_NS)
        return align.align(events, clock_sync, power, START_NS, temperature)

    return factory
