"""Deterministic simulated device: token-rate timing model, fault injection and the agent capability set."""

from __future__ import annotations

import asyncio
import dataclasses
import logging
import pathlib as pt

import numpy as np

import melt.agent.storage as agent_storage
import melt.agent.synth as synth
import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.event as event_const
import melt.const.model as model_const
import melt.const.run as run_const
import melt.const.time as time_const
import melt.powertrace.parse as parse
import melt.schema.agent as agent_schema
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.schema.trace as trace_schema
import melt.util.mu_json as json_util
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)

EVENTS_FILE = run_const.ARTIFACT_FILENAMES[run_const.ArtifactKind.EVENTS]
RESPONSES_FILE = run_const.ARTIFACT_FILENAMES[run_const.ArtifactKind.RESPONSES]
# Probe round trips wobble upwards by up to this fraction of the configured rtt.
CLOCK_RTT_JITTER = 0.5


@dataclasses.dataclass(frozen=True)
class SimState:
    now_ns: int  # device timebase
    run_index: int = 0
    prompt_index: int = 0
    trace_ops: bool = False


def _span_ns(count: float, rate_tps: float) -> int:
    return round(count * time_const.NS_PER_S / rate_tps)


def _op_events(
    profile: event_schema.SimProfile,
    phase: event_const.OpPhase,
    begin_ns: int,
    span_ns: int,
    attrs: dict,
) -> list[event_schema.Event]:
    events, cursor = [], begin_ns
    for op_name, share in profile.op_shares.get(phase, {}).items():
        duration_ns = round(span_ns * share)
        events.append(
            event_schema.Event(
                ts_ns=cursor,
                kind=event_const.EventKind.OP,
                phase=event_const.EventPhase.INSTANT,
                attrs={**attrs, "op_name": op_name, "op_phase": phase.value, "duration_us": duration_ns / 1000},
            )
        )
        cursor += duration_ns
    return events


def sim_execute_prompt(
    profile: event_schema.SimProfile,
    prompt_tokens: int,
    gen_tokens: int,
    state: SimState,
    conversation_index: int = 0,
) -> tuple[list[event_schema.Event], SimState]:
    """
    Prefill spans prompt_tokens / prefill rate, then gen_tokens decode instants follow at 1 / decode rate,
    both slowed down by the power state active at this prompt. Times depend on the profile and state only.
    """
    if prompt_tokens <= 0 or gen_tokens <= 0:
        error_const.AnalysisError.NON_POSITIVE_INPUT.build(
            name="token count", value=min(prompt_tokens, gen_tokens)
        ).raise_()

    for fault in profile.faults:
        if fault.matches(state.run_index, state.prompt_index):
            error_const.AgentError.SIM_FAULT.build(
                fault=fault.kind, prompt_index=state.prompt_index, stall_s=fault.stall_s
            ).raise_()

    power_state = profile.state_for(state.prompt_index)
    rate_scale = power_state.rate_scale if power_state else 1.0
    power_scale = power_state.power_scale if power_state else 1.0
    attrs = {"prompt_index": state.prompt_index, "conversation_index": conversation_index}

    prefill_begin = state.now_ns
    prefill_span = _span_ns(prompt_tokens, profile.prefill_rate_tps * rate_scale)
    prefill_end = prefill_begin + prefill_span
    events = [
        event_schema.Event(
            ts_ns=prefill_begin,
            kind=event_const.EventKind.PREFILL,
            phase=event_const.EventPhase.BEGIN,
            attrs={**attrs, "tokens": prompt_tokens, "rate_scale": rate_scale, "power_scale": power_scale},
        ),
    ]
    if state.trace_ops:
        events += _op_events(profile, event_const.OpPhase.EMBED, prefill_begin, prefill_span, attrs)
        events += _op_events(profile, event_const.OpPhase.PREFILL, prefill_begin, prefill_span, attrs)
    events.append(
        event_schema.Event(
            ts_ns=prefill_end, kind=event_const.EventKind.PREFILL, phase=event_const.EventPhase.END, attrs=attrs
        )
    )

    decode_rate = profile.decode_rate_tps * rate_scale
    decode_ts = [prefill_end + _span_ns(k, decode_rate) for k in range(1, gen_tokens + 1)]
    if state.trace_ops:
        events += _op_events(profile, event_const.OpPhase.DECODE, prefill_end, decode_ts[-1] - prefill_end, attrs)
    events += [
        event_schema.Event(
            ts_ns=ts,
            kind=event_const.EventKind.DECODE_TOKEN,
            phase=event_const.EventPhase.INSTANT,
            attrs={**attrs, "token_index": token_index},
        )
        for token_index, ts in enumerate(decode_ts)
    ]

    end_ns = decode_ts[-1]
    if profile.inter_prompt_gap_s > 0:
        gap_end = end_ns + time_util.s_to_ns(profile.inter_prompt_gap_s)
        events += [
            event_schema.Event(ts_ns=end_ns, kind=event_const.EventKind.IDLE, phase=event_const.EventPhase.BEGIN),
            event_schema.Event(ts_ns=gap_end, kind=event_const.EventKind.IDLE, phase=event_const.EventPhase.END),
        ]
        end_ns = gap_end

    events.sort(key=lambda event: event.ts_ns)
    return events, dataclasses.replace(state, now_ns=end_ns, prompt_index=state.prompt_index + 1)


def launch_events(profile: event_schema.SimProfile, start_ns: int) -> tuple[list[event_schema.Event], int]:
    """Idle settle time after opening the app, then the model load."""
    load_begin = start_ns + time_util.s_to_ns(profile.launch_idle_s)
    load_end = load_begin + time_util.s_to_ns(profile.load_time_s)
    return [
        event_schema.Event(ts_ns=start_ns, kind=event_const.EventKind.IDLE, phase=event_const.EventPhase.BEGIN),
        event_schema.Event(ts_ns=load_begin, kind=event_const.EventKind.IDLE, phase=event_const.EventPhase.END),
        event_schema.Event(ts_ns=load_begin, kind=event_const.EventKind.MODEL_LOAD, phase=event_const.EventPhase.BEGIN),
        event_schema.Event(ts_ns=load_end, kind=event_const.EventKind.MODEL_LOAD, phase=event_const.EventPhase.END),
    ], load_end


def conversation_event(conversation_index: int, ts_ns: int, phase: event_const.EventPhase) -> event_schema.Event:
    return event_schema.Event(
        ts_ns=ts_ns,
        kind=event_const.EventKind.CONVERSATION,
        phase=phase,
        attrs={"conversation_index": conversation_index},
    )


class SimAgent:
    """
    In-process simulated device. Time passes through the host clock it is given: a VirtualClock replays
    runs instantly, the system clock makes the simulator behave in real time (as when it is served).
    """

    def __init__(
        self,
        profile: event_schema.SimProfile,
        device: core_schema.DeviceDescriptor,
        clock: time_util.HostClock | None = None,
        storage_dir: pt.Path | None = None,
        simulate_network: bool = True,
    ) -> None:
        self.profile = profile
        self.device = device
        self.host_clock: time_util.HostClock = clock or time_util.SystemClock()
        self.storage = agent_storage.AgentStorage(storage_dir)
        self.simulate_network = simulate_network

        self.powered = True
        self._boot_at_ns = 0
        self._never_boots = False
        self._lost = False
        self._launches = 0
        self._run_index = 0
        self._launched = False
        self._config: agent_schema.AppConfig | None = None
        self._state: SimState | None = None
        self._events: list[event_schema.Event] = []
        self._responses: list[dict] = []
        self._open_conversation: int | None = None
        self._gen_rng: np.random.Generator = synth.rng_for(profile.seed, 0, synth.STREAM_GEN_LENGTH)
        self._clock_rng = synth.rng_for(profile.seed, 0, synth.STREAM_CLOCK)
        self._interrupted = asyncio.Event()

    @property
    def device_id(self) -> str:
        return self.device.id

    @property
    def emits_rails(self) -> bool:
        if self.device.power_source == device_const.PowerSource.SYSFS:
            return True
        return self.device.power_source == device_const.PowerSource.SIM and not self.device.is_phone_like

    @property
    def events(self) -> list[event_schema.Event]:
        return list(self._events)

    def _device_now(self) -> int:
        return self.host_clock.now_ns() + self.profile.clock_offset_ns

    def _launch_faults(self, kind: str) -> bool:
        return any(fault.kind == kind and fault.matches(self._launches) for fault in self.profile.faults)

    def _ensure_reachable(self) -> None:
        if self._lost:
            raise ConnectionError(f"simulated agent '{self.device_id}' is unreachable")

    def _ensure_responsive(self) -> None:
        self._ensure_reachable()
        if not self._is_responsive():
            error_const.AgentError.DEVICE_OFF.build(device=self.device_id).raise_()

    def _is_responsive(self) -> bool:
        return self.powered and not self._never_boots and self.host_clock.now_ns() >= self._boot_at_ns

    async def power(self, action: device_const.PowerAction) -> None:
        self._ensure_reachable()
        match action:
            case device_const.PowerAction.OFF:
                self.powered = self._launched = False
                logger.info(f"[{self.device_id}] powered off")
            case device_const.PowerAction.ON if not self.powered:
                self.powered = True
                self._never_boots = self._launch_faults("never_boot")
                self._boot_at_ns = self.host_clock.now_ns() + time_util.s_to_ns(self.profile.boot_time_s)
                logger.info(f"[{self.device_id}] powered on")

    async def status(self) -> agent_schema.StatusResponse:
        self._ensure_reachable()
        return agent_schema.StatusResponse(
            device_id=self.device_id,
            powered=self.powered,
            responsive=self._is_responsive(),
            launched=self._launched,
            run_index=self._run_index,
        )

    async def clock(self, host_ts_ns: int) -> int:
        self._ensure_reachable()
        if not self.simulate_network:
            return self._device_now()

        rtt_ns = self.profile.clock_rtt_ns * (1.0 + self._clock_rng.uniform(0.0, CLOCK_RTT_JITTER))
        forward_ns = rtt_ns * self._clock_rng.uniform()
        await self.host_clock.sleep(time_util.ns_to_s(forward_ns))
        device_ts_ns = self._device_now()
        await self.host_clock.sleep(time_util.ns_to_s(rtt_ns - forward_ns))
        return device_ts_ns

    async def unlock(self) -> None:
        self._ensure_responsive()
        if self._launch_faults("unlock_fail"):
            error_const.AgentError.UNLOCK_FAILED.build(device=self.device_id).raise_()
        logger.info(f"[{self.device_id}] HID connected, screen unlocked")

    async def push(self, name: str, content: bytes) -> None:
        self._ensure_responsive()
        await self.storage.put(name, content)

    async def apply(self, config: agent_schema.AppConfig) -> None:
        self._ensure_responsive()
        self._config = config
        await self.storage.put("config.json", json_util.dumps_stable(config.model_dump(mode="json")).encode())

    async def launch(self, backend: model_const.Backend) -> None:
        self._ensure_responsive()
        if self._launch_faults("unreachable"):
            self._lost = True
            self._ensure_reachable()

        self._run_index, self._launches = self._launches, self._launches + 1
        self._gen_rng = synth.rng_for(self.profile.seed, self._run_index, synth.STREAM_GEN_LENGTH)
        self._interrupted = asyncio.Event()
        self._responses, self._open_conversation = [], None

        self._events, ready_ns = launch_events(self.profile, self._device_now())
        await self.host_clock.sleep(time_util.ns_to_s(ready_ns - self._device_now()))
        trace_ops = self._config is not None and self._config.mode == model_const.ExperimentMode.MICRO
        self._state = SimState(now_ns=ready_ns, run_index=self._run_index, trace_ops=trace_ops)
        self._launched = True

        await self.storage.put(EVENTS_FILE, event_schema.dump_events(self._events))
        await self.storage.put(RESPONSES_FILE, json_util.dumps_stable([]).encode())
        logger.info(f"[{self.device_id}] launched {backend} (run {self._run_index})")

    def _gen_tokens(self, request: agent_schema.PromptRequest) -> int:
        max_gen = self._config.max_gen_length if self._config else model_const.MICRO_GEN_TOKENS
        if self._config is not None and self._config.ignore_eos:
            return max_gen
        if request.gen_tokens is not None:
            return min(request.gen_tokens, max_gen)
        drawn = self._gen_rng.normal(self.profile.macro_gen_mean, self.profile.macro_gen_std)
        return int(np.clip(round(drawn), 1, max_gen))

    def _close_conversation(self, ts_ns: int) -> list[event_schema.Event]:
        if self._open_conversation is None:
            return []
        closing = conversation_event(self._open_conversation, ts_ns, event_const.EventPhase.END)
        self._open_conversation = None
        return [closing]

    async def _record_closing(self) -> None:
        closing = self._close_conversation(max(self._state.now_ns if self._state else 0, self._device_now()))
        self._events += closing
        await self.storage.append(EVENTS_FILE, event_schema.dump_events(closing))

    async def _stall(self, stall_s: float) -> None:
        # Wall-clock wait: only interrupt() or stall_s ends it, whatever the host clock does.
        try:
            await asyncio.wait_for(self._interrupted.wait(), timeout=stall_s)
        except asyncio.TimeoutError:
            pass

    async def prompt(self, request: agent_schema.PromptRequest) -> agent_schema.PromptReport:
        self._ensure_responsive()
        if not self._launched or self._state is None:
            error_const.AgentError.AGENT_CRASH.build(
                prompt_index=request.prompt_index, reason="app not running"
            ).raise_()

        start_ns = max(self._state.now_ns, self._device_now())
        leading: list[event_schema.Event] = []
        if self._open_conversation != request.conversation_index:
            leading += self._close_conversation(start_ns)
            leading.append(conversation_event(request.conversation_index, start_ns, event_const.EventPhase.BEGIN))
            self._open_conversation = request.conversation_index

        gen_tokens = self._gen_tokens(request)
        state = dataclasses.replace(self._state, now_ns=start_ns, prompt_index=request.prompt_index)
        try:
            events, state = sim_execute_prompt(
                self.profile, request.tokens, gen_tokens, state, conversation_index=request.conversation_index
            )
        except error_const.MeltError as e:
            self._events += leading
            await self.storage.append(EVENTS_FILE, event_schema.dump_events(leading))
            await self._handle_fault(e, request)
            raise

        await self.host_clock.sleep(time_util.ns_to_s(max(0, state.now_ns - self._device_now())))
        self._state = state
        events = leading + events
        if request.last_in_conversation:
            events += self._close_conversation(state.now_ns)
        self._events += events

        report = agent_schema.PromptReport(
            conversation_index=request.conversation_index,
            prompt_index=request.prompt_index,
            prompt_tokens=request.tokens,
            generated_tokens=gen_tokens,
            text=f"<{gen_tokens} simulated tokens>",
            events=events,
        )
        self._responses.append(report.response)
        await self.storage.put(f"reports/prompt-{request.prompt_index:04d}.jsonl", event_schema.dump_events(events))
        await self.storage.append(EVENTS_FILE, event_schema.dump_events(events))
        await self.storage.put(RESPONSES_FILE, json_util.dumps_stable(self._responses).encode())
        return report

    async def _handle_fault(self, err: error_const.MeltError, request: agent_schema.PromptRequest) -> None:
        if not err.is_(error_const.AgentError.SIM_FAULT):
            return

        fault = err.ctx["fault"]
        logger.warning(f"[{self.device_id}] injected {fault} at prompt {request.prompt_index}")
        if fault == "stall":
            await self._stall(err.ctx["stall_s"])
            reason = "interrupted after stall"
        else:
            reason = fault

        self._launched = False
        await self._record_closing()
        error_const.AgentError.AGENT_CRASH.build(prompt_index=request.prompt_index, reason=reason).raise_()

    async def interrupt(self) -> None:
        self._interrupted.set()
        self._launched = False
        await self._record_closing()
        logger.info(f"[{self.device_id}] app interrupted")

    async def collect(self, name: str) -> bytes:
        self._ensure_reachable()
        return await self.storage.get(name)

    async def sim_trace(
        self, host_start_ns: int, host_end_ns: int, sampling_frequency_hz: float | None = None
    ) -> agent_schema.SimTraceResponse:
        meta = trace_schema.TraceMeta(device_id=self.device_id)
        common = dict(
            host_start_ns=host_start_ns,
            host_end_ns=host_end_ns,
            offset_ns=self.profile.clock_offset_ns,
            run_index=self._run_index,
            meta=meta,
        )
        power = synth.sim_power_trace(
            self.profile, self._events, rate_hz=sampling_frequency_hz, rails=self.emits_rails, **common
        )
        temperature = synth.sim_temperature_trace(self.profile, self._events, **common)
        if self.emits_rails:
            power_csv = parse.serialize_sysfs(power, include_total=False)
        else:
            power_csv = parse.serialize_monsoon(power)
        return agent_schema.SimTraceResponse(
            power=power_csv.decode("utf-8"), temperature=parse.serialize_temperature(temperature).decode("utf-8")
        )
