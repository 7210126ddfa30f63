import pytest

import melt.agent.sim as sim
import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.time as time_const
import melt.orchestrator.power as power
import melt.schema.event as event_schema
import melt.util.time_util as time_util


async def test_power_up_waits_for_boot(quiet_profile, sim_device):
    clock = time_util.VirtualClock()
    agent = sim.SimAgent(quiet_profile.model_copy(update={"boot_time_s": 3.0}), sim_device, clock=clock)
    await power.power_control(agent, device_const.PowerAction.OFF, sim_device, clock=clock)
    before = clock.now_ns()

    await power.power_control(agent, device_const.PowerAction.ON, sim_device, clock=clock, poll_interval_s=0.5)

    assert (await agent.status()).responsive
    assert clock.now_ns() - before == 3 * time_const.NS_PER_S


async def test_device_that_never_answers(quiet_profile, sim_device):
    clock = time_util.VirtualClock()
    profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="never_boot")]})
    agent = sim.SimAgent(profile, sim_device, clock=clock)
    await power.power_control(agent, device_const.PowerAction.OFF, sim_device, clock=clock)

    with pytest.raises(error_const.MeltError) as exc_info:
        await power.power_control(agent, device_const.PowerAction.ON, sim_device, clock=clock, timeout_s=5.0)
    assert exc_info.value.is_(error_const.OrchestratorError.POWER_TIMEOUT)


async def test_edge_boards_are_never_switched(registry):
    class Untouchable:
        device_id = "jetson"

        async def power(self, action):
            raise AssertionError("edge boards have no switchable rail")

    edge = registry.devices["sim-phone"].model_copy(update={"lab": device_const.Lab.EDGE, "battery_capacity_mah": None})
    await power.power_control(Untouchable(), device_const.PowerAction.OFF, edge)
