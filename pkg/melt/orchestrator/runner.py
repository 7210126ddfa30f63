from __future__ import annotations

import asyncio
import dataclasses
import logging

import melt.agent.__interface__ as agent_interface
import melt.const.error as error_const
import melt.const.model as model_const
import melt.const.run as run_const
import melt.orchestrator.notification as notification
import melt.schema.agent as agent_schema
import melt.schema.core as core_schema
import melt.schema.event as event_schema
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)


def prompt_report_name(prompt_index: int) -> str:
    return f"reports/prompt-{prompt_index:04d}.jsonl"


@dataclasses.dataclass
class RawRunArtifacts:
    """What one monitored run left behind before collection."""

    run_id: str
    reports: list[agent_schema.PromptReport] = dataclasses.field(default_factory=list)

    @property
    def report_names(self) -> list[str]:
        return [prompt_report_name(report.prompt_index) for report in self.reports]


def build_requests(
    spec: core_schema.ExperimentSpec, conversations: event_schema.ConversationSet
) -> list[list[agent_schema.PromptRequest]]:
    """Prompt requests per conversation, with prompt indices running across the whole run."""
    micro = spec.mode == model_const.ExperimentMode.MICRO
    requests: list[list[agent_schema.PromptRequest]] = []
    prompt_index = 0
    for conversation_index, conversation in enumerate(conversations.conversations):
        batch = []
        for position, prompt in enumerate(conversation.prompts):
            batch.append(
                agent_schema.PromptRequest(
                    conversation_index=conversation_index,
                    prompt_index=prompt_index,
                    tokens=model_const.MICRO_PREFILL_TOKENS if micro else prompt.tokens,
                    gen_tokens=spec.max_gen_length if micro else prompt.gen_tokens,
                    last_in_conversation=position == len(conversation.prompts) - 1,
                )
            )
            prompt_index += 1
        requests.append(batch)
    return requests


async def _run_conversation(
    agent: agent_interface.DeviceAgent,
    batch: list[agent_schema.PromptRequest],
    clock: time_util.HostClock,
    timeout_s: float,
) -> list[agent_schema.PromptReport]:
    # Bounded twice: on the wall clock, and on the host clock which may run virtually ahead of it.
    started_ns = clock.now_ns()
    reports = []
    async with asyncio.timeout(timeout_s):
        for request in batch:
            reports.append(await agent.prompt(request))
            if clock.now_ns() - started_ns > time_util.s_to_ns(timeout_s):
                raise TimeoutError
    return reports


async def run_experiment(
    spec: core_schema.ExperimentSpec,
    agent: agent_interface.DeviceAgent,
    conversations: event_schema.ConversationSet,
    run_id: str,
    notifier: notification.Notifier,
    clock: time_util.HostClock | None = None,
) -> RawRunArtifacts:
    """
    Open the backend app, post the start mark, feed every prompt of every conversation and post the stop mark.
    The device writes one trace report per prompt to its filesystem.
    """
    clock = clock or time_util.SystemClock()
    artifacts = RawRunArtifacts(run_id=run_id)

    await agent.launch(spec.backend)
    await notifier.notify(run_const.NotificationKind.START, run_id)
    for conversation_index, batch in enumerate(build_requests(spec, conversations)):
        try:
            artifacts.reports += await _run_conversation(agent, batch, clock, spec.conversation_timeout_s)
        except TimeoutError:
            logger.warning(f"[{agent.device_id}] {run_id}: conversation {conversation_index} timed out")
            await agent.interrupt()
            error_const.AgentError.CONVERSATION_TIMEOUT.build(
                conversation_index=conversation_index, timeout_s=spec.conversation_timeout_s
            ).raise_()
    await notifier.notify(run_const.NotificationKind.STOP, run_id)

    logger.info(f"[{agent.device_id}] {run_id}: {len(artifacts.reports)} prompts done")
    return artifacts
