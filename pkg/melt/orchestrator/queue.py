"""The experiment loop of one device, and the farm of devices running side by side."""

from __future__ import annotations

import asyncio
import dataclasses
import json
import logging
import pathlib as pt
import typing

import toml

import melt.agent.__interface__ as agent_interface
import melt.config.orchestrator as orchestrator_config
import melt.config.project as project_config
import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.run as run_const
import melt.core.conversation as conversation_module
import melt.core.grid as grid_module
import melt.core.registry as registry_module
import melt.core.validate as validate_module
import melt.orchestrator.clock_sync as clock_sync
import melt.orchestrator.monitor as monitor_module
import melt.orchestrator.notification as notification
import melt.orchestrator.power as power_module
import melt.orchestrator.runner as runner
import melt.schema.agent as agent_schema
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.util.mu_file as file_util
import melt.util.mu_json as json_util
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class JobQueue:
    """Experiments of one device, executed strictly in order."""

    device: core_schema.DeviceDescriptor
    specs: list[core_schema.ExperimentSpec]
    cursor: int = 0
    status_log: list[tuple[str, run_const.RunStep]] = dataclasses.field(default_factory=list)
    manifests: list[core_schema.RunManifest] = dataclasses.field(default_factory=list)

    @property
    def is_done(self) -> bool:
        return self.cursor >= len(self.specs)


@dataclasses.dataclass
class QueueOverrides:
    iterations: int | None = None
    sleep_between_s: float | None = None
    conversation_timeout_s: float | None = None


def make_run_id(device_id: str, spec_index: int, iteration: int) -> str:
    return f"{device_id}-s{spec_index:03d}-i{iteration:02d}"


def run_status(err: error_const.MeltError) -> run_const.RunStatus:
    if err.is_(error_const.AgentError.CONVERSATION_TIMEOUT):
        return run_const.RunStatus.TIMEOUT
    if err.is_(error_const.AgentError.AGENT_CRASH) and err.ctx.get("reason") == "oom":
        return run_const.RunStatus.OOM
    return run_const.RunStatus.DEVICE_ERROR


# ---------- Queue files ----------
def parse_queue_file(text: str, suffix: str = ".toml", source: str = "<string>") -> core_schema.QueueFile:
    try:
        document = json.loads(text) if suffix == ".json" else toml.loads(text)
        return core_schema.QueueFile.model_validate(document)
    except (toml.TomlDecodeError, ValueError) as e:
        error_const.CoreError.MANIFEST_INVALID.build(path=source, reason=str(e)).raise_()


def build_specs(
    entry: core_schema.QueueEntry,
    registry: registry_module.Registry,
    device: core_schema.DeviceDescriptor,
    base_dir: pt.Path,
    overrides: QueueOverrides,
    config_obj: orchestrator_config.OrchestratorSetting,
) -> list[core_schema.ExperimentSpec]:
    model = registry_module.resolve_model(registry, entry.model)
    if entry.grid is not None:
        points = grid_module.expand_grid(entry.grid)
    else:
        point = (entry.context_size, entry.max_gen_length, entry.batch_size)
        points = [core_schema.GridPoint(*point)]  # type: ignore[arg-type]

    conversations_path = pt.Path(entry.conversations_uri)
    if not conversations_path.is_absolute():
        conversations_path = (base_dir / conversations_path).resolve()

    def pick(override: typing.Any, value: typing.Any, default: typing.Any) -> typing.Any:
        return next(item for item in (override, value, default) if item is not None)

    return [
        core_schema.ExperimentSpec(
            model=model,
            device=device,
            backend=entry.backend,
            context_size=point.context_size,
            max_gen_length=point.max_gen_length,
            batch_size=point.batch_size,
            mode=entry.mode,
            conversations_uri=str(conversations_path),
            iterations=pick(overrides.iterations, entry.iterations, config_obj.iterations),
            sleep_between_s=pick(overrides.sleep_between_s, entry.sleep_between_s, config_obj.sleep_between_s),
            conversation_timeout_s=pick(
                overrides.conversation_timeout_s, entry.conversation_timeout_s, config_obj.conversation_timeout_s
            ),
        )
        for point in points
    ]


def load_queue(
    path: pt.Path,
    registry: registry_module.Registry,
    device_id: str | None = None,
    overrides: QueueOverrides | None = None,
) -> JobQueue:
    config_obj = project_config.get_melt_setting()
    queue_file = parse_queue_file(path.read_text(encoding="utf-8"), path.suffix.lower(), str(path))
    device_id = device_id or queue_file.device
    if device_id is None:
        error_const.CoreError.MANIFEST_INVALID.build(path=str(path), reason="no device given").raise_()
    if not queue_file.experiments:
        error_const.OrchestratorError.EMPTY_QUEUE_FILE.build(path=str(path), device=device_id).raise_()

    device = registry_module.resolve_device(registry, device_id)
    specs = [
        spec
        for entry in queue_file.experiments
        for spec in build_specs(
            entry, registry, device, path.parent, overrides or QueueOverrides(), config_obj.orchestrator
        )
    ]
    for spec in specs:
        validate_module.validate_spec(spec, device, config_obj.analysis.memory_overhead_factor)
    return JobQueue(device=device, specs=specs)


# ---------- Experiment loop ----------
@dataclasses.dataclass
class _QueueContext:
    queue: JobQueue
    agent: agent_interface.DeviceAgent
    monitor: monitor_module.PowerMonitor
    out_dir: pt.Path
    clock: time_util.HostClock
    notifier: notification.Notifier
    listener: notification.NotificationListener | None
    config_obj: orchestrator_config.OrchestratorSetting

    def log(self, run_id: str, step: run_const.RunStep) -> None:
        self.queue.status_log.append((run_id, step))
        logger.info(f"[{self.queue.device.id}] {run_id}: {step}")


async def bring_up(
    agent: agent_interface.DeviceAgent,
    device: core_schema.DeviceDescriptor,
    clock: time_util.HostClock,
    config_obj: orchestrator_config.OrchestratorSetting,
) -> core_schema.ClockSync:
    """Power on, unlock iOS screens over HID, then sync clocks."""
    await power_module.power_control(
        agent,
        device_const.PowerAction.ON,
        device,
        clock=clock,
        timeout_s=config_obj.power_timeout_s,
        poll_interval_s=config_obj.power_poll_interval_s,
    )
    if device.platform == device_const.Platform.IOS:
        # No retry: a locked phone stays locked.
        await agent.unlock()
    return await clock_sync.sync_clocks(
        agent,
        clock=clock,
        probe_count=config_obj.clock_probe_count,
        max_rtt_ms=config_obj.clock_max_rtt_ms,
        timeout_s=config_obj.agent_request_timeout_s,
    )


async def _push_dependencies(ctx: _QueueContext, spec: core_schema.ExperimentSpec) -> None:
    model_path = registry_module.local_artifact_path(spec.model.artifact_uri, pt.Path("."))
    if model_path is not None and model_path.is_file():
        model_bytes = await file_util.async_read_bytes(model_path)
    else:
        model_bytes = json_util.dumps_stable(spec.model.model_dump(mode="json")).encode()
    await ctx.agent.push(f"models/{spec.model.name}", model_bytes)

    conversations_path = pt.Path(spec.conversations_uri)
    await ctx.agent.push(
        f"conversations/{conversations_path.name}", await file_util.async_read_bytes(conversations_path)
    )


def _app_config(spec: core_schema.ExperimentSpec) -> agent_schema.AppConfig:
    return agent_schema.AppConfig(
        model=spec.model.name,
        backend=spec.backend,
        context_size=spec.context_size,
        max_gen_length=spec.max_gen_length,
        batch_size=spec.batch_size,
        mode=spec.mode,
        ignore_eos=spec.ignores_eos,
        energy_mode=spec.device.energy_mode,
    )


async def _collect(ctx: _QueueContext, run_dir: pt.Path, names: list[str]) -> dict[run_const.ArtifactKind, str]:
    """Copy device-side artifacts into the run directory; missing files are skipped."""
    collected: dict[run_const.ArtifactKind, str] = {}
    wanted = {
        run_const.ArtifactKind.EVENTS: run_const.ARTIFACT_FILENAMES[run_const.ArtifactKind.EVENTS],
        run_const.ArtifactKind.RESPONSES: run_const.ARTIFACT_FILENAMES[run_const.ArtifactKind.RESPONSES],
    }
    for kind, name in [*wanted.items(), *((None, name) for name in names)]:
        try:
            content = await ctx.agent.collect(name)
        except error_const.MeltError as e:
            if not e.is_(error_const.AgentError.ARTIFACT_NOT_FOUND):
                raise
            continue
        await file_util.async_save_bytes(content, run_dir / name)
        if kind is not None:
            collected[kind] = name

    for kind in (run_const.ArtifactKind.POWER, run_const.ArtifactKind.TEMPERATURE):
        if (run_dir / run_const.ARTIFACT_FILENAMES[kind]).is_file():
            collected[kind] = run_const.ARTIFACT_FILENAMES[kind]
    return collected


async def _save_manifest(manifest: core_schema.RunManifest, run_dir: pt.Path) -> None:
    payload = json_util.dumps_stable(manifest.model_dump(mode="json")).encode("utf-8")
    await file_util.async_save_bytes(payload, run_dir / run_const.MANIFEST_FILENAME)


async def _run_iteration(
    ctx: _QueueContext,
    spec: core_schema.ExperimentSpec,
    conversations: event_schema.ConversationSet,
    run_id: str,
    iteration: int,
    clock_sync_result: core_schema.ClockSync,
) -> core_schema.RunManifest:
    run_dir = ctx.out_dir / ctx.queue.device.id / run_id
    sinks = {
        kind: run_dir / run_const.ARTIFACT_FILENAMES[kind]
        for kind in (run_const.ArtifactKind.POWER, run_const.ArtifactKind.TEMPERATURE)
    }
    status, error, report_names = run_const.RunStatus.OK, None, []

    session = ctx.monitor.arm(run_id, sinks)
    await ctx.monitor.start(session)
    ctx.log(run_id, run_const.RunStep.ARM)

    try:
        artifacts = await runner.run_experiment(spec, ctx.agent, conversations, run_id, ctx.notifier, ctx.clock)
        report_names = artifacts.report_names
    except error_const.MeltError as e:
        status, error = run_status(e), e.error.msg
        report_names = [runner.prompt_report_name(index) for index in range(conversations.prompt_count)]
        logger.warning(f"[{ctx.queue.device.id}] {run_id}: run failed with {status} ({error})")
    finally:
        ctx.log(run_id, run_const.RunStep.RUN)
        await ctx.monitor.stop(session)
        ctx.log(run_id, run_const.RunStep.STOP_MONITOR)

    artifact_paths = await _collect(ctx, run_dir, report_names)
    ctx.log(run_id, run_const.RunStep.COLLECT)

    host_start = session.host_start if session.host_start is not None else ctx.clock.now_ns()
    manifest = core_schema.RunManifest(
        run_id=run_id,
        spec=spec,
        iteration=iteration,
        clock_sync=clock_sync_result,
        host_start=host_start,
        host_end=session.host_end if session.host_end is not None else host_start,
        artifact_paths=artifact_paths,
        status=status,
        error=error,
        marks=ctx.listener.marks(run_id) if ctx.listener and ctx.listener.window(run_id) else {},
    )
    await _save_manifest(manifest, run_dir)

    await ctx.clock.sleep(spec.sleep_between_s)
    ctx.log(run_id, run_const.RunStep.SLEEP)
    return manifest


async def _run_spec(
    ctx: _QueueContext, spec_index: int, spec: core_schema.ExperimentSpec, clock_sync_result: core_schema.ClockSync
) -> list[core_schema.RunManifest]:
    conversations = conversation_module.load_conversations(spec.conversations_uri)
    first_run_id = make_run_id(ctx.queue.device.id, spec_index, 0)
    log_start = len(ctx.queue.status_log)

    await _push_dependencies(ctx, spec)
    ctx.log(first_run_id, run_const.RunStep.PUSH)
    await ctx.agent.apply(_app_config(spec))
    ctx.log(first_run_id, run_const.RunStep.APPLY)

    manifests = []
    for iteration in range(spec.iterations):
        run_id = make_run_id(ctx.queue.device.id, spec_index, iteration)
        manifests.append(await _run_iteration(ctx, spec, conversations, run_id, iteration, clock_sync_result))

    # Every run of a spec carries the whole step sequence of that spec.
    steps = [step for _, step in ctx.queue.status_log[log_start:]]
    manifests = [manifest.model_copy(update={"status_log": steps}) for manifest in manifests]
    for manifest in manifests:
        await _save_manifest(manifest, ctx.out_dir / ctx.queue.device.id / manifest.run_id)
    return manifests


async def run_queue(
    queue: JobQueue,
    agent: agent_interface.DeviceAgent,
    monitor: monitor_module.PowerMonitor,
    out_dir: pt.Path,
    clock: time_util.HostClock | None = None,
    notifier: notification.Notifier | None = None,
    listener: notification.NotificationListener | None = None,
    config_obj: orchestrator_config.OrchestratorSetting | None = None,
) -> list[core_schema.RunManifest]:
    """
    push -> apply -> (arm -> run -> stop-monitor -> collect -> sleep) x iterations, for every spec in order.
    Failed runs are recorded and the queue moves on; losing the agent aborts it.
    """
    if not queue.specs:
        return []

    clock = clock or time_util.SystemClock()
    config_obj = config_obj or project_config.get_melt_setting().orchestrator
    if notifier is None:
        listener = listener or notification.NotificationListener(clock)
        notifier = notification.LocalNotifier(listener)
    ctx = _QueueContext(queue, agent, monitor, out_dir, clock, notifier, listener, config_obj)

    try:
        clock_sync_result = await bring_up(agent, queue.device, clock, config_obj)
        while not queue.is_done:
            queue.manifests += await _run_spec(ctx, queue.cursor, queue.specs[queue.cursor], clock_sync_result)
            queue.cursor += 1
    except ConnectionError as e:
        logger.error(f"[{queue.device.id}] agent lost: {e}")
        error_const.OrchestratorError.AGENT_LOST.build(device=queue.device.id, completed=len(queue.manifests)).raise_()
    return queue.manifests


@dataclasses.dataclass
class FarmDevice:
    queue: JobQueue
    agent: agent_interface.DeviceAgent
    monitor: monitor_module.PowerMonitor


async def run_farm(
    devices: list[FarmDevice],
    out_dir: pt.Path,
    clock: time_util.HostClock | None = None,
    listener: notification.NotificationListener | None = None,
) -> dict[str, list[core_schema.RunManifest]]:
    """One coordinator task per device; a device that aborts keeps the manifests it already produced."""
    listener = listener or notification.NotificationListener(clock)
    notifier = notification.LocalNotifier(listener)

    async def coordinate(entry: FarmDevice) -> list[core_schema.RunManifest]:
        try:
            return await run_queue(
                entry.queue, entry.agent, entry.monitor, out_dir, clock, notifier=notifier, listener=listener
            )
        except error_const.MeltError as e:
            logger.error(f"[{entry.queue.device.id}] queue aborted: {e}")
            return entry.queue.manifests

    results = await asyncio.gather(*(coordinate(entry) for entry in devices))
    return {entry.queue.device.id: manifests for entry, manifests in zip(devices, results)}
