import json

import pytest

import melt.agent.sim as sim
import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.event as event_const
import melt.const.model as model_const
import melt.const.time as time_const
import melt.schema.agent as agent_schema
import melt.schema.event as event_schema
import melt.util.time_util as time_util

START_NS = 1_700_000_000 * time_const.NS_PER_S
SIM_CONFIG = agent_schema.AppConfig(
    model="sim-model", backend=model_const.Backend.SIM, context_size=2048, max_gen_length=256, batch_size=1
)


def _prompt(prompt_index: int, tokens: int = 160, gen_tokens: int | None = 50, **kwargs) -> agent_schema.PromptRequest:
    return agent_schema.PromptRequest(
        conversation_index=0, prompt_index=prompt_index, tokens=tokens, gen_tokens=gen_tokens, **kwargs
    )


def _agent(profile: event_schema.SimProfile, device) -> tuple[sim.SimAgent, time_util.VirtualClock]:
    clock = time_util.VirtualClock(START_NS)
    return sim.SimAgent(profile, device, clock=clock, simulate_network=False), clock


async def _launched(profile, device, config=SIM_CONFIG) -> tuple[sim.SimAgent, time_util.VirtualClock]:
    agent, clock = _agent(profile, device)
    await agent.apply(config)
    await agent.launch(model_const.Backend.SIM)
    return agent, clock


def _of_kind(events: list[event_schema.Event], kind: event_const.EventKind) -> list[event_schema.Event]:
    return [event for event in events if event.kind == kind]


class TestTimingModel:
    def test_prefill_and_decode_spans(self, quiet_profile):
        events, state = sim.sim_execute_prompt(quiet_profile, 160, 50, sim.SimState(now_ns=START_NS))

        begin, end = _of_kind(events, event_const.EventKind.PREFILL)
        tokens = _of_kind(events, event_const.EventKind.DECODE_TOKEN)
        assert end.ts_ns - begin.ts_ns == 2 * time_const.NS_PER_S
        assert len(tokens) == 50
        assert [token.attrs["token_index"] for token in tokens] == list(range(50))
        assert tokens[0].ts_ns - end.ts_ns == 40 * time_const.NS_PER_MS
        assert state.now_ns == tokens[-1].ts_ns == START_NS + 4 * time_const.NS_PER_S
        assert state.prompt_index == 1

    def test_times_depend_on_profile_and_state_only(self, quiet_profile):
        first = sim.sim_execute_prompt(quiet_profile, 97, 31, sim.SimState(now_ns=START_NS))
        second = sim.sim_execute_prompt(quiet_profile, 97, 31, sim.SimState(now_ns=START_NS))
        assert first == second

    def test_power_state_slows_later_prompts(self, quiet_profile):
        profile = quiet_profile.model_copy(
            update={"power_states": [event_schema.PowerState(after_prompt=1, rate_scale=0.5, power_scale=1.2)]}
        )
        _, state = sim.sim_execute_prompt(profile, 160, 50, sim.SimState(now_ns=START_NS))
        events, _ = sim.sim_execute_prompt(profile, 160, 50, state)

        begin, end = _of_kind(events, event_const.EventKind.PREFILL)
        assert end.ts_ns - begin.ts_ns == 4 * time_const.NS_PER_S
        assert begin.attrs["rate_scale"] == 0.5
        assert begin.attrs["power_scale"] == 1.2

    def test_inter_prompt_gap_is_idle(self, quiet_profile):
        profile = quiet_profile.model_copy(update={"inter_prompt_gap_s": 1.5})
        events, state = sim.sim_execute_prompt(profile, 160, 50, sim.SimState(now_ns=START_NS))
        idle_begin, idle_end = _of_kind(events, event_const.EventKind.IDLE)
        assert idle_end.ts_ns - idle_begin.ts_ns == 1500 * time_const.NS_PER_MS
        assert state.now_ns == idle_end.ts_ns

    def test_launch_settles_then_loads(self, quiet_profile):
        events, ready_ns = sim.launch_events(quiet_profile, START_NS)
        load_begin, load_end = _of_kind(events, event_const.EventKind.MODEL_LOAD)
        assert load_begin.ts_ns == START_NS + 5 * time_const.NS_PER_S
        assert load_end.ts_ns == ready_ns == load_begin.ts_ns + 2_410 * time_const.NS_PER_MS

    @pytest.mark.parametrize(("tokens", "gen_tokens"), [(0, 10), (10, 0)])
    def test_token_counts_must_be_positive(self, quiet_profile, tokens, gen_tokens):
        with pytest.raises(error_const.MeltError) as exc_info:
            sim.sim_execute_prompt(quiet_profile, tokens, gen_tokens, sim.SimState(now_ns=START_NS))
        assert exc_info.value.is_(error_const.AnalysisError.NON_POSITIVE_INPUT)

    def test_faults_fire_on_their_prompt_and_run(self, quiet_profile):
        profile = quiet_profile.model_copy(
            update={"faults": [event_schema.FaultSpec(kind="oom", prompt_index=1, run_index=2)]}
        )
        sim.sim_execute_prompt(profile, 10, 10, sim.SimState(now_ns=START_NS, run_index=2, prompt_index=0))
        sim.sim_execute_prompt(profile, 10, 10, sim.SimState(now_ns=START_NS, run_index=1, prompt_index=1))
        with pytest.raises(error_const.MeltError) as exc_info:
            sim.sim_execute_prompt(profile, 10, 10, sim.SimState(now_ns=START_NS, run_index=2, prompt_index=1))
        assert exc_info.value.is_(error_const.AgentError.SIM_FAULT)
        assert exc_info.value.ctx["fault"] == "oom"


class TestSimAgent:
    async def test_launch_and_prompt_advance_the_clock(self, quiet_profile, sim_device):
        agent, clock = await _launched(quiet_profile, sim_device)
        assert clock.now_ns() == START_NS + 7_410 * time_const.NS_PER_MS

        report = await agent.prompt(_prompt(0))

        assert report.generated_tokens == 50
        assert report.prompt_tokens == 160
        assert clock.now_ns() == START_NS + 11_410 * time_const.NS_PER_MS
        status = await agent.status()
        assert status.launched and status.responsive and status.run_index == 0

    async def test_event_file_mirrors_the_run(self, quiet_profile, sim_device):
        agent, _ = await _launched(quiet_profile, sim_device)
        await agent.prompt(_prompt(0, last_in_conversation=False))
        await agent.prompt(_prompt(1))

        events = event_schema.load_events(await agent.collect(sim.EVENTS_FILE))
        assert events == agent.events
        conversation = _of_kind(events, event_const.EventKind.CONVERSATION)
        assert [event.phase for event in conversation] == [event_const.EventPhase.BEGIN, event_const.EventPhase.END]
        assert len(_of_kind(events, event_const.EventKind.PREFILL)) == 4

    async def test_responses_and_config_are_stored(self, quiet_profile, sim_device):
        agent, _ = await _launched(quiet_profile, sim_device)
        await agent.prompt(_prompt(0))
        (response,) = json.loads(await agent.collect(sim.RESPONSES_FILE))
        assert response["generated_tokens"] == 50
        assert json.loads(await agent.collect("config.json"))["max_gen_length"] == 256

    async def test_generation_is_capped_by_the_config(self, quiet_profile, sim_device):
        agent, _ = await _launched(quiet_profile, sim_device, SIM_CONFIG.model_copy(update={"max_gen_length": 20}))
        assert (await agent.prompt(_prompt(0, gen_tokens=50))).generated_tokens == 20

    async def test_micro_mode_ignores_eos_and_traces_ops(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(
            update={"op_shares": {"prefill": {"dequantize_matmul": 0.97, "softmax": 0.03}}}
        )
        config = SIM_CONFIG.model_copy(update={"mode": model_const.ExperimentMode.MICRO, "ignore_eos": True})
        agent, _ = await _launched(profile, sim_device, config)

        report = await agent.prompt(_prompt(0, tokens=256, gen_tokens=12))

        assert report.generated_tokens == 256
        ops = _of_kind(report.events, event_const.EventKind.OP)
        assert [op.attrs["op_name"] for op in ops] == ["dequantize_matmul", "softmax"]

    async def test_macro_lengths_repeat_per_seed(self, sim_device):
        profile = event_schema.SimProfile(sample_rate_hz=100.0, seed=9)
        lengths = []
        for _ in range(2):
            agent, _ = await _launched(profile, sim_device)
            lengths.append([(await agent.prompt(_prompt(k, gen_tokens=None))).generated_tokens for k in range(3)])
        assert lengths[0] == lengths[1]
        assert all(1 <= length <= 256 for length in lengths[0])

    async def test_prompt_before_launch_crashes(self, quiet_profile, sim_device):
        agent, _ = _agent(quiet_profile, sim_device)
        with pytest.raises(error_const.MeltError) as exc_info:
            await agent.prompt(_prompt(0))
        assert exc_info.value.is_(error_const.AgentError.AGENT_CRASH)
        assert exc_info.value.ctx["reason"] == "app not running"

    async def test_oom_crashes_the_app(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="oom", prompt_index=1)]})
        agent, _ = await _launched(profile, sim_device)
        await agent.prompt(_prompt(0, last_in_conversation=False))

        with pytest.raises(error_const.MeltError) as exc_info:
            await agent.prompt(_prompt(1))

        assert exc_info.value.is_(error_const.AgentError.AGENT_CRASH)
        assert exc_info.value.ctx["reason"] == "oom"
        assert not (await agent.status()).launched
        # the open conversation is closed in the event log
        assert agent.events[-1].kind == event_const.EventKind.CONVERSATION
        assert agent.events[-1].phase == event_const.EventPhase.END

    async def test_stall_ends_after_its_duration(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(
            update={"faults": [event_schema.FaultSpec(kind="stall", prompt_index=0, stall_s=0.01)]}
        )
        agent, _ = await _launched(profile, sim_device)
        with pytest.raises(error_const.MeltError) as exc_info:
            await agent.prompt(_prompt(0))
        assert exc_info.value.ctx["reason"] == "interrupted after stall"

    async def test_power_cycle(self, quiet_profile, sim_device):
        agent, clock = _agent(quiet_profile, sim_device)
        await agent.power(device_const.PowerAction.OFF)
        assert not (await agent.status()).powered
        with pytest.raises(error_const.MeltError) as exc_info:
            await agent.apply(SIM_CONFIG)
        assert exc_info.value.is_(error_const.AgentError.DEVICE_OFF)

        await agent.power(device_const.PowerAction.ON)
        assert not (await agent.status()).responsive
        clock.advance(2 * time_const.NS_PER_S)
        assert (await agent.status()).responsive

    async def test_device_that_never_boots(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="never_boot")]})
        agent, clock = _agent(profile, sim_device)
        await agent.power(device_const.PowerAction.OFF)
        await agent.power(device_const.PowerAction.ON)
        clock.advance(60 * time_const.NS_PER_S)
        assert not (await agent.status()).responsive

    async def test_unlock_failure(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="unlock_fail")]})
        agent, _ = _agent(profile, sim_device)
        with pytest.raises(error_const.MeltError) as exc_info:
            await agent.unlock()
        assert exc_info.value.is_(error_const.AgentError.UNLOCK_FAILED)

    async def test_unreachable_agent_is_lost_for_good(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="unreachable", run_index=1)]})
        agent, _ = await _launched(profile, sim_device)
        with pytest.raises(ConnectionError):
            await agent.launch(model_const.Backend.SIM)
        with pytest.raises(ConnectionError):
            await agent.status()

    async def test_clock_reads_device_time(self, quiet_profile, sim_device):
        profile = quiet_profile.model_copy(update={"clock_offset_ns": 123 * time_const.NS_PER_MS})
        agent, clock = _agent(profile, sim_device)
        assert await agent.clock(clock.now_ns()) == START_NS + 123 * time_const.NS_PER_MS

    async def test_simulated_network_delays_the_probe(self, quiet_profile, sim_device):
        clock = time_util.VirtualClock(START_NS)
        agent = sim.SimAgent(quiet_profile, sim_device, clock=clock)
        device_ts = await agent.clock(START_NS)
        assert START_NS <= device_ts <= clock.now_ns()
        assert clock.now_ns() - START_NS >= quiet_profile.clock_rtt_ns - 1

    async def test_missing_artifact(self, quiet_profile, sim_device):
        agent, _ = _agent(quiet_profile, sim_device)
        with pytest.raises(error_const.MeltError) as exc_info:
            await agent.collect("nothing.bin")
        assert exc_info.value.is_(error_const.AgentError.ARTIFACT_NOT_FOUND)

    async def test_sim_trace_is_reproducible(self, sim_device):
        profile = event_schema.SimProfile(sample_rate_hz=200.0, noise_std_mw=50.0, temp_noise_std_c=0.2, seed=4)
        traces = []
        for _ in range(2):
            agent, clock = await _launched(profile, sim_device)
            await agent.prompt(_prompt(0))
            traces.append(await agent.sim_trace(START_NS, clock.now_ns()))
        assert traces[0] == traces[1]
        assert traces[0].power.startswith("ts_s,current_mA,voltage_V\n")

    async def test_edge_devices_report_rails(self, quiet_profile, sim_device):
        device = sim_device.model_copy(update={"id": "sim-edge", "battery_capacity_mah": None})
        agent, clock = await _launched(quiet_profile, device)
        assert agent.emits_rails
        trace = await agent.sim_trace(START_NS, clock.now_ns())
        assert trace.power.startswith("ts_s,rail,power_mW\n")
        assert ",TOTAL," not in trace.power
