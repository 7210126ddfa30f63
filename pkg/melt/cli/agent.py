from __future__ import annotations

import pathlib as pt
import typing

import typer

import melt.agent.serve as serve
import melt.core.registry as registry_module
import melt.util.mu_cli as cli_util


@cli_util.exit_on_error
def agent_sim(
    profile: typing.Annotated[pt.Path, typer.Option(help="Simulator profile (TOML).")],
    bind: typing.Annotated[typing.Optional[str], typer.Option(help="host:port to listen on.")] = None,
    seed: typing.Annotated[typing.Optional[int], typer.Option(help="Overrides the profile seed.")] = None,
    device: typing.Annotated[typing.Optional[str], typer.Option(help="Registry device to impersonate.")] = None,
    registry: typing.Annotated[typing.Optional[pt.Path], typer.Option(help="Model and device registry.")] = None,
    storage_dir: typing.Annotated[
        typing.Optional[pt.Path], typer.Option(help="Where finished traces are kept for pull_trace.")
    ] = None,
) -> None:
    """Serve the simulated agent over HTTP until interrupted."""
    sim_profile = serve.load_profile(profile)
    if seed is not None:
        sim_profile = sim_profile.with_seed(seed)

    device_descriptor = None
    if device is not None:
        if registry is None or not registry.is_file():
            cli_util.usage_error("--device needs --registry")
        loaded = registry_module.load_registry(registry)
        if device not in loaded.devices:
            cli_util.usage_error(f"device '{device}' is not in the registry")
        device_descriptor = loaded.devices[device]

    serve.agent_serve(sim_profile, bind, device_descriptor, storage_dir).run()


cli_patterns: list[typing.Callable] = [agent_sim]
