from __future__ import annotations

import logging
import pathlib as pt

import toml
import uvicorn

import melt
import melt.agent.sim as sim
import melt.config.project as project_config
import melt.const.error as error_const
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.util.network as network_util
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)

# Devices served without a registry entry look like a phone wired to a Monsoon.
DEFAULT_SIM_DEVICE = core_schema.DeviceDescriptor(
    id="sim-phone",
    lab="sim",
    platform="sim",
    soc="simulated",
    mem_gb=8,
    battery_capacity_mah=3785.0,
    tier="high",
    power_source="sim",
)
DEFAULT_SIM_MODEL = core_schema.ModelDescriptor(
    name="sim-model",
    family="sim",
    param_count=1.1,
    quant_scheme="group-quant",
    bitwidth=4,
    format="raw",
)


def load_profile(path: pt.Path) -> event_schema.SimProfile:
    try:
        return event_schema.SimProfile.model_validate(toml.loads(path.read_text(encoding="utf-8")))
    except (toml.TomlDecodeError, ValueError) as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=str(path), reason=str(e)).raise_()


def build_sim_agent(
    profile: event_schema.SimProfile,
    device: core_schema.DeviceDescriptor | None = None,
    storage_dir: pt.Path | None = None,
) -> sim.SimAgent:
    """A simulator that lives on the wall clock and answers clock probes without network delay."""
    return sim.SimAgent(
        profile,
        device or DEFAULT_SIM_DEVICE,
        clock=time_util.SystemClock(),
        storage_dir=storage_dir,
        simulate_network=False,
    )


def agent_serve(
    profile: event_schema.SimProfile,
    bind: str | None = None,
    device: core_schema.DeviceDescriptor | None = None,
    storage_dir: pt.Path | None = None,
) -> uvicorn.Server:
    config_obj = project_config.get_melt_setting()
    uvicorn_config = config_obj.agent.to_uvicorn_config()
    if bind:
        uvicorn_config["host"], uvicorn_config["port"] = network_util.split_bind(bind, uvicorn_config["host"])

    agent = build_sim_agent(profile, device, storage_dir or config_obj.agent.storage_dir)
    server = uvicorn.Server(uvicorn.Config(melt.create_agent_app(agent), **uvicorn_config))
    logger.info(f"serving simulated agent '{agent.device_id}' on {uvicorn_config['host']}:{uvicorn_config['port']}")
    return server
