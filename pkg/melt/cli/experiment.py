from __future__ import annotations

import asyncio
import pathlib as pt
import typing

import typer

import melt.agent.serve as serve
import melt.agent.sim as sim
import melt.config.project as project_config
import melt.const.model as model_const
import melt.core.conversation as conversation_module
import melt.core.registry as registry_module
import melt.core.validate as validate_module
import melt.orchestrator.client as client
import melt.orchestrator.monitor as monitor_module
import melt.orchestrator.queue as queue_module
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.util.mu_cli as cli_util
import melt.util.time_util as time_util


def _load_registry(path: typing.Optional[pt.Path]) -> typing.Optional[registry_module.Registry]:
    path = path or project_config.get_melt_setting().registry_path
    return registry_module.load_registry(path) if path.is_file() else None


def _sim_profile(path: typing.Optional[pt.Path], seed: typing.Optional[int]) -> event_schema.SimProfile:
    profile = serve.load_profile(path) if path is not None else event_schema.SimProfile()
    return profile if seed is None else profile.with_seed(seed)


async def _run_simulated(
    queue: queue_module.JobQueue, profile: event_schema.SimProfile, out: pt.Path
) -> list[core_schema.RunManifest]:
    clock = time_util.VirtualClock()
    agent = sim.SimAgent(profile, queue.device, clock=clock)
    monitor = monitor_module.SimMonitor(agent, queue.device, clock)
    return await queue_module.run_queue(queue, agent, monitor, out, clock)


async def _run_remote(queue: queue_module.JobQueue, base_url: str, out: pt.Path) -> list[core_schema.RunManifest]:
    timeout_s = project_config.get_melt_setting().orchestrator.agent_request_timeout_s
    async with client.HttpAgent(queue.device.id, base_url, timeout_s) as agent:
        monitor = monitor_module.SimMonitor(agent, queue.device)
        return await queue_module.run_queue(queue, agent, monitor, out)


def _print_runs(manifests: list[core_schema.RunManifest], out: pt.Path) -> None:
    for manifest in manifests:
        typer.echo(f"{out / manifest.spec.device.id / manifest.run_id}\t{manifest.status}")


@cli_util.exit_on_error
def run(
    queue: typing.Annotated[pt.Path, typer.Option(help="Queue file listing the experiments of one device.")],
    out: typing.Annotated[pt.Path, typer.Option(help="Runs land in <out>/<device>/<run_id>.")] = pt.Path("runs"),
    device: typing.Annotated[typing.Optional[str], typer.Option(help="Device id, overrides the queue file.")] = None,
    agent: typing.Annotated[
        typing.Optional[str], typer.Option(help="Base URL of a served agent; simulated in-process when omitted.")
    ] = None,
    profile: typing.Annotated[
        typing.Optional[pt.Path], typer.Option(help="Profile of the in-process simulator.")
    ] = None,
    seed: typing.Annotated[typing.Optional[int], typer.Option(help="Seed of the in-process simulator.")] = None,
    iterations: typing.Annotated[typing.Optional[int], typer.Option(help="Iterations per spec.")] = None,
    sleep: typing.Annotated[typing.Optional[float], typer.Option(help="Seconds between iterations.")] = None,
    timeout: typing.Annotated[typing.Optional[float], typer.Option(help="Conversation timeout in seconds.")] = None,
    registry: typing.Annotated[typing.Optional[pt.Path], typer.Option(help="Model and device registry.")] = None,
) -> None:
    """Execute a queue file against one device."""
    if (loaded := _load_registry(registry)) is None:
        cli_util.usage_error("no registry found, pass --registry")
    overrides = queue_module.QueueOverrides(
        iterations=iterations, sleep_between_s=sleep, conversation_timeout_s=timeout
    )
    job_queue = queue_module.load_queue(queue, loaded, device, overrides)

    if agent is not None:
        manifests = asyncio.run(_run_remote(job_queue, agent, out))
    else:
        manifests = asyncio.run(_run_simulated(job_queue, _sim_profile(profile, seed), out))
    _print_runs(manifests, out)


@cli_util.exit_on_error
def simulate(
    profile: typing.Annotated[pt.Path, typer.Option(help="Simulator profile (TOML).")],
    prompts: typing.Annotated[pt.Path, typer.Option(help="Conversation set (TOML or JSON).")],
    out: typing.Annotated[pt.Path, typer.Option(help="Runs land in <out>/<device>/<run_id>.")],
    seed: typing.Annotated[typing.Optional[int], typer.Option(help="Overrides the profile seed.")] = None,
    device: typing.Annotated[str, typer.Option(help="Device id to simulate.")] = serve.DEFAULT_SIM_DEVICE.id,
    model: typing.Annotated[typing.Optional[str], typer.Option(help="Registry model name.")] = None,
    backend: typing.Annotated[model_const.Backend, typer.Option()] = model_const.Backend.SIM,
    mode: typing.Annotated[model_const.ExperimentMode, typer.Option()] = model_const.ExperimentMode.MACRO,
    context_size: typing.Annotated[int, typer.Option(min=1)] = 2048,
    max_gen_length: typing.Annotated[int, typer.Option(min=1)] = model_const.MICRO_GEN_TOKENS,
    iterations: typing.Annotated[int, typer.Option(min=1)] = 1,
    sleep: typing.Annotated[float, typer.Option(min=0.0, help="Seconds between iterations.")] = 0.0,
    timeout: typing.Annotated[float, typer.Option(help="Conversation timeout in seconds.")] = 3600.0,
    registry: typing.Annotated[typing.Optional[pt.Path], typer.Option(help="Model and device registry.")] = None,
) -> None:
    """Run a conversation set on the in-process simulator, replayed on a virtual clock."""
    loaded = _load_registry(registry)
    if loaded is not None and device in loaded.devices:
        device_descriptor = loaded.devices[device]
    elif device == serve.DEFAULT_SIM_DEVICE.id:
        device_descriptor = serve.DEFAULT_SIM_DEVICE
    else:
        cli_util.usage_error(f"device '{device}' is not in the registry")
    if model is None:
        model_descriptor = serve.DEFAULT_SIM_MODEL
    elif loaded is None:
        cli_util.usage_error("--model needs a registry")
    else:
        model_descriptor = registry_module.resolve_model(loaded, model)

    conversation_module.load_conversations(prompts)
    spec = core_schema.ExperimentSpec(
        model=model_descriptor,
        device=device_descriptor,
        backend=backend,
        context_size=context_size,
        max_gen_length=max_gen_length,
        batch_size=1,
        mode=mode,
        conversations_uri=str(prompts.resolve()),
        iterations=iterations,
        sleep_between_s=sleep,
        conversation_timeout_s=timeout,
    )
    validate_module.validate_spec(spec, device_descriptor)
    job_queue = queue_module.JobQueue(device=device_descriptor, specs=[spec])
    manifests = asyncio.run(_run_simulated(job_queue, _sim_profile(profile, seed), out))
    _print_runs(manifests, out)


cli_patterns: list[typing.Callable] = [run, simulate]
