import json
import pathlib as pt

import numpy as np
import pytest

import melt.agent.sim as sim
import melt.analysis.metrics as metrics
import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.run as run_const
import melt.const.time as time_const
import melt.core.registry as registry_module
import melt.orchestrator.monitor as monitor_module
import melt.orchestrator.notification as notification
import melt.orchestrator.queue as queue_module
import melt.report.pipeline as pipeline
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.util.time_util as time_util

QUEUE_TOML = """
device = "sim-phone"

[[experiments]]
model = "sim-model"
backend = "sim"
conversations_uri = "prompts.toml"
context_size = 2048
max_gen_length = 256
batch_size = 1
iterations = 3
sleep_between_s = 0.0

[[experiments]]
model = "sim-model"
backend = "sim"
conversations_uri = "prompts.toml"
context_size = 1024
max_gen_length = 128
batch_size = 1
iterations = 3
sleep_between_s = 0.0
"""

SPEC_STEPS = [run_const.RunStep.PUSH, run_const.RunStep.APPLY] + [
    run_const.RunStep.ARM,
    run_const.RunStep.RUN,
    run_const.RunStep.STOP_MONITOR,
    run_const.RunStep.COLLECT,
    run_const.RunStep.SLEEP,
] * 3


@pytest.fixture
def queue_path(conversations_path: pt.Path) -> pt.Path:
    path = conversations_path.parent / "queue.toml"
    path.write_text(QUEUE_TOML, encoding="utf-8")
    return path


async def _run(
    queue: queue_module.JobQueue, profile: event_schema.SimProfile, out: pt.Path
) -> list[core_schema.RunManifest]:
    clock = time_util.VirtualClock()
    agent = sim.SimAgent(profile, queue.device, clock=clock)
    return await queue_module.run_queue(queue, agent, monitor_module.SimMonitor(agent, queue.device, clock), out, clock)


def _saved(out: pt.Path, run_id: str) -> core_schema.RunManifest:
    path = out / "sim-phone" / run_id / run_const.MANIFEST_FILENAME
    return core_schema.RunManifest.model_validate(json.loads(path.read_text(encoding="utf-8")))


class TestLoadQueue:
    def test_entries_become_specs(self, queue_path, registry):
        queue = queue_module.load_queue(queue_path, registry)
        assert queue.device.id == "sim-phone"
        assert [spec.context_size for spec in queue.specs] == [2048, 1024]
        assert all(spec.iterations == 3 for spec in queue.specs)
        assert pt.Path(queue.specs[0].conversations_uri) == (queue_path.parent / "prompts.toml").resolve()

    def test_overrides_win(self, queue_path, registry):
        overrides = queue_module.QueueOverrides(iterations=1, conversation_timeout_s=9.0)
        queue = queue_module.load_queue(queue_path, registry, overrides=overrides)
        assert {(spec.iterations, spec.conversation_timeout_s) for spec in queue.specs} == {(1, 9.0)}

    def test_grid_entries_expand(self, tmp_path, conversations_path, registry):
        path = tmp_path / "grid.toml"
        path.write_text(
            'device = "sim-phone"\n[[experiments]]\nmodel = "sim-model"\nbackend = "sim"\n'
            'conversations_uri = "prompts.toml"\n'
            "grid = {contexts = [512, 1024], max_gen_lengths = [64, 128], batch_sizes = [1, 2]}\n",
            encoding="utf-8",
        )
        queue = queue_module.load_queue(path, registry)
        assert [spec.grid_point for spec in queue.specs] == [
            (512, 64, 1),
            (512, 64, 2),
            (1024, 128, 1),
            (1024, 128, 2),
        ]

    @pytest.mark.parametrize(
        ("text", "member"),
        [
            ("experiments = []\n", error_const.CoreError.MANIFEST_INVALID),
            ('device = "sim-phone"\nexperiments = []\n', error_const.OrchestratorError.EMPTY_QUEUE_FILE),
            ('device = "nokia"\n[[experiments]]\nmodel = "sim-model"\n', error_const.CoreError.MANIFEST_INVALID),
        ],
    )
    def test_bad_queue_files(self, tmp_path, registry, text, member):
        path = tmp_path / "queue.toml"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(error_const.MeltError) as exc_info:
            queue_module.load_queue(path, registry)
        assert exc_info.value.is_(member)


class TestRunQueue:
    async def test_every_run_gets_a_manifest(self, queue_path, registry, quiet_profile, tmp_path):
        queue = queue_module.load_queue(queue_path, registry)
        out = tmp_path / "out"

        manifests = await _run(queue, quiet_profile, out)

        assert [manifest.run_id for manifest in manifests] == [
            f"sim-phone-s{spec:03d}-i{iteration:02d}" for spec in range(2) for iteration in range(3)
        ]
        assert queue.is_done
        for manifest in manifests:
            assert manifest.status == run_const.RunStatus.OK
            assert manifest.status_log == SPEC_STEPS
            assert set(manifest.artifact_paths) == set(run_const.ArtifactKind)
            start = manifest.marks[run_const.NotificationKind.START]
            stop = manifest.marks[run_const.NotificationKind.STOP]
            assert manifest.host_start <= start < stop <= manifest.host_end
            assert _saved(out, manifest.run_id) == manifest
        for earlier, later in zip(manifests, manifests[1:]):
            assert earlier.host_start < later.host_start
            assert earlier.host_end <= later.host_start

        run_dir = out / "sim-phone" / "sim-phone-s001-i02"
        events = event_schema.load_events((run_dir / "events.jsonl").read_bytes())
        assert sum(event.kind == "prefill" for event in events) == 2 * 6
        assert (run_dir / "reports" / "prompt-0005.jsonl").is_file()

    async def test_status_log_keeps_the_order_of_steps(self, make_spec, sim_device, quiet_profile, tmp_path):
        queue = queue_module.JobQueue(device=sim_device, specs=[make_spec(iterations=2)])
        await _run(queue, quiet_profile, tmp_path)
        assert queue.status_log[:3] == [
            ("sim-phone-s000-i00", run_const.RunStep.PUSH),
            ("sim-phone-s000-i00", run_const.RunStep.APPLY),
            ("sim-phone-s000-i00", run_const.RunStep.ARM),
        ]
        assert queue.status_log[-1] == ("sim-phone-s000-i01", run_const.RunStep.SLEEP)

    async def test_oom_fails_one_run_only(self, make_spec, sim_device, quiet_profile, tmp_path):
        profile = quiet_profile.model_copy(
            update={"faults": [event_schema.FaultSpec(kind="oom", prompt_index=1, run_index=1)]}
        )
        queue = queue_module.JobQueue(device=sim_device, specs=[make_spec(iterations=3)])

        manifests = await _run(queue, profile, tmp_path)

        assert [manifest.status for manifest in manifests] == [
            run_const.RunStatus.OK,
            run_const.RunStatus.OOM,
            run_const.RunStatus.OK,
        ]
        failed = manifests[1]
        assert "oom" in failed.error
        assert failed.status_log == manifests[0].status_log
        assert run_const.ArtifactKind.EVENTS in failed.artifact_paths
        assert run_const.ArtifactKind.POWER in failed.artifact_paths
        assert not failed.marks

    async def test_stuck_conversation_times_out(self, make_spec, sim_device, quiet_profile, tmp_path):
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="stall", prompt_index=0)]})
        queue = queue_module.JobQueue(device=sim_device, specs=[make_spec(conversation_timeout_s=0.2)])

        (manifest,) = await _run(queue, profile, tmp_path)

        assert manifest.status == run_const.RunStatus.TIMEOUT
        assert manifest.status_log[-1] == run_const.RunStep.SLEEP

    async def test_lost_agent_aborts_the_queue(self, make_spec, sim_device, quiet_profile, tmp_path):
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="unreachable", run_index=1)]})
        queue = queue_module.JobQueue(device=sim_device, specs=[make_spec(iterations=3)])

        with pytest.raises(error_const.MeltError) as exc_info:
            await _run(queue, profile, tmp_path)

        assert exc_info.value.is_(error_const.OrchestratorError.AGENT_LOST)
        assert _saved(tmp_path, "sim-phone-s000-i00").status == run_const.RunStatus.OK
        assert not (tmp_path / "sim-phone" / "sim-phone-s000-i02").exists()

    async def test_locked_iphone_stops_before_any_run(self, make_spec, sim_device, quiet_profile, tmp_path):
        iphone = sim_device.model_copy(update={"platform": device_const.Platform.IOS})
        profile = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="unlock_fail")]})
        queue = queue_module.JobQueue(device=iphone, specs=[make_spec(device=iphone)])

        with pytest.raises(error_const.MeltError) as exc_info:
            await _run(queue, profile, tmp_path)

        assert exc_info.value.is_(error_const.AgentError.UNLOCK_FAILED)
        assert not queue.status_log
        assert not (tmp_path / "sim-phone").exists()

    async def test_empty_queue_does_nothing(self, sim_device, quiet_profile, tmp_path):
        assert await _run(queue_module.JobQueue(device=sim_device, specs=[]), quiet_profile, tmp_path) == []

    async def test_runs_never_overlap_and_sleep_between_them(self, make_spec, sim_device, quiet_profile, tmp_path):
        specs = [
            make_spec(iterations=2, sleep_between_s=0.5),
            make_spec(context_size=1024, iterations=2, sleep_between_s=0.5),
        ]
        queue = queue_module.JobQueue(device=sim_device, specs=specs)

        manifests = await _run(queue, quiet_profile, tmp_path)

        assert len(manifests) == 4
        for earlier, later in zip(manifests, manifests[1:]):
            assert earlier.host_start < earlier.host_end < later.host_start
        gap_ns = manifests[1].host_start - manifests[0].host_end
        assert gap_ns >= 0.5 * time_const.NS_PER_S

    @pytest.mark.parametrize("offset_ms", [-500, 0, 123])
    async def test_phase_boundaries_land_on_power_steps(
        self, make_spec, sim_device, quiet_profile, tmp_path, offset_ms
    ):
        offset_ns = offset_ms * time_const.NS_PER_MS
        profile = quiet_profile.model_copy(update={"clock_offset_ns": offset_ns, "tail_tau_s": 0.0})
        queue = queue_module.JobQueue(device=sim_device, specs=[make_spec()])

        (manifest,) = await _run(queue, profile, tmp_path)
        timeline = pipeline.load_timeline(tmp_path / "sim-phone" / manifest.run_id, manifest)

        sync = manifest.clock_sync
        assert abs(sync.offset_ns - offset_ns) <= sync.rtt_ns / 2 + 10
        ts, power_mw = timeline.power.ts_s, timeline.power.power_mw
        jumps = np.flatnonzero(np.abs(np.diff(power_mw)) > 100.0)
        steps = (ts[jumps] + ts[jumps + 1]) / 2
        tolerance = float(np.median(np.diff(ts))) + sync.rtt_ns / 2 / time_const.NS_PER_S + 1e-8

        spans, _ = metrics.collect_spans(timeline)
        boundaries = [edge for span in spans for edge in (span.prefill_begin, span.prefill_end)]
        assert len(boundaries) == 12
        for boundary in boundaries:
            assert np.min(np.abs(steps - boundary)) <= tolerance, f"{boundary:.6f}s has no power step nearby"

    async def test_model_artifact_is_found_from_any_working_directory(
        self, queue_path, sim_device, sim_model, quiet_profile, tmp_path, monkeypatch
    ):
        zoo = tmp_path / "zoo"
        (zoo / "weights").mkdir(parents=True)
        weights = b"GGUF" + bytes(range(64))
        (zoo / "weights" / "sim.gguf").write_bytes(weights)
        model = sim_model.model_copy(update={"artifact_uri": "weights/sim.gguf"})
        registry = registry_module.Registry(
            models={model.name: model}, devices={sim_device.id: sim_device}, base_dir=zoo
        )
        elsewhere = tmp_path / "elsewhere"
        elsewhere.mkdir()
        monkeypatch.chdir(elsewhere)

        queue = queue_module.load_queue(queue_path, registry, overrides=queue_module.QueueOverrides(iterations=1))
        clock = time_util.VirtualClock()
        agent = sim.SimAgent(quiet_profile, queue.device, clock=clock)
        monitor = monitor_module.SimMonitor(agent, queue.device, clock)
        await queue_module.run_queue(queue, agent, monitor, tmp_path, clock)

        assert await agent.collect(f"models/{model.name}") == weights


async def test_farm_runs_devices_side_by_side(make_spec, sim_device, quiet_profile, tmp_path):
    clock = time_util.VirtualClock()
    edge = sim_device.model_copy(update={"id": "sim-edge", "battery_capacity_mah": None})
    locked = sim_device.model_copy(update={"id": "sim-iphone", "platform": device_const.Platform.IOS})

    def farm_device(device, profile) -> queue_module.FarmDevice:
        agent = sim.SimAgent(profile, device, clock=clock)
        queue = queue_module.JobQueue(device=device, specs=[make_spec(device=device, iterations=2)])
        return queue_module.FarmDevice(queue, agent, monitor_module.SimMonitor(agent, device, clock))

    unlock_fails = quiet_profile.model_copy(update={"faults": [event_schema.FaultSpec(kind="unlock_fail")]})
    listener = notification.NotificationListener(clock)
    results = await queue_module.run_farm(
        [farm_device(sim_device, quiet_profile), farm_device(edge, quiet_profile), farm_device(locked, unlock_fails)],
        tmp_path,
        clock,
        listener,
    )

    assert {device: len(manifests) for device, manifests in results.items()} == {
        "sim-phone": 2,
        "sim-edge": 2,
        "sim-iphone": 0,
    }
    assert listener.window("sim-edge-s000-i01") is not None
    edge_power = (tmp_path / "sim-edge" / "sim-edge-s000-i00" / "power.csv").read_text(encoding="utf-8")
    assert edge_power.startswith("ts_s,rail,power_mW\n")
