from __future__ import annotations

import logging

import melt.agent.__interface__ as agent_interface
import melt.config.project as project_config
import melt.const.device as device_const
import melt.const.error as error_const
import melt.schema.core as core_schema
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)


async def _is_responsive(agent: agent_interface.DeviceAgent) -> bool:
    try:
        return (await agent.status()).responsive
    except ConnectionError:
        return False


async def power_control(
    agent: agent_interface.DeviceAgent,
    action: device_const.PowerAction,
    device: core_schema.DeviceDescriptor,
    clock: time_util.HostClock | None = None,
    timeout_s: float | None = None,
    poll_interval_s: float | None = None,
) -> None:
    """Toggle the device supply; on power-up, wait until the device answers."""
    if not device.supports_power_control:
        # Edge boards stay on, there is no rail to switch.
        logger.debug(f"[{device.id}] power {action} skipped, device is always on")
        return

    config_obj = project_config.get_melt_setting().orchestrator
    clock = clock or time_util.SystemClock()
    timeout_s = timeout_s or config_obj.power_timeout_s
    poll_interval_s = poll_interval_s or config_obj.power_poll_interval_s

    await agent.power(action)
    if action == device_const.PowerAction.OFF:
        return

    deadline_ns = clock.now_ns() + time_util.s_to_ns(timeout_s)
    while not await _is_responsive(agent):
        if clock.now_ns() >= deadline_ns:
            error_const.OrchestratorError.POWER_TIMEOUT.build(device=device.id, timeout_s=timeout_s).raise_()
        await clock.sleep(poll_interval_s)
    logger.info(f"[{device.id}] responsive")
