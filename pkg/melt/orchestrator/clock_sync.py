from __future__ import annotations

import asyncio
import logging

import melt.agent.__interface__ as agent_interface
import melt.config.project as project_config
import melt.const.error as error_const
import melt.const.time as time_const
import melt.schema.core as core_schema
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)

MIN_PROBES = 5


async def _probe(agent: agent_interface.DeviceAgent, clock: time_util.HostClock) -> tuple[int, int]:
    """One request/response exchange: (offset estimate, round trip)."""
    host_send = clock.now_ns()
    device_ts = await agent.clock(host_send)
    host_recv = clock.now_ns()
    # Midpoint floored to whole ns.
    return device_ts - (host_send + host_recv) // 2, host_recv - host_send


async def sync_clocks(
    agent: agent_interface.DeviceAgent,
    clock: time_util.HostClock | None = None,
    probe_count: int | None = None,
    max_rtt_ms: float | None = None,
    timeout_s: float | None = None,
) -> core_schema.ClockSync:
    """
    NTP-style estimate: offset = device_ts - (host_send + host_recv) / 2 for every probe,
    keeping the one with the smallest round trip. Its error is bounded by half that round trip.
    """
    config_obj = project_config.get_melt_setting().orchestrator
    clock = clock or time_util.SystemClock()
    probe_count = max(MIN_PROBES, probe_count or config_obj.clock_probe_count)
    max_rtt_ms = max_rtt_ms or config_obj.clock_max_rtt_ms
    timeout_s = timeout_s or config_obj.agent_request_timeout_s

    probes: list[tuple[int, int]] = []
    for _ in range(probe_count):
        try:
            probes.append(await asyncio.wait_for(_probe(agent, clock), timeout=timeout_s))
        except (ConnectionError, asyncio.TimeoutError) as e:
            error_const.OrchestratorError.AGENT_UNREACHABLE.build(device=agent.device_id, reason=repr(e)).raise_()

    offset_ns, rtt_ns = min(probes, key=lambda probe: probe[1])
    rtt_ms = rtt_ns / time_const.NS_PER_MS
    if rtt_ms > max_rtt_ms:
        error_const.OrchestratorError.CLOCK_UNSTABLE.build(rtt_ms=rtt_ms, bound_ms=max_rtt_ms).raise_()

    logger.info(f"[{agent.device_id}] clock offset {offset_ns / time_const.NS_PER_MS:+.3f} ms (rtt {rtt_ms:.3f} ms)")
    return core_schema.ClockSync(offset_ns=offset_ns, rtt_ns=rtt_ns, sampled_at=clock.now_ns())
