import json

import pytest

import melt.const.error as error_const
import melt.const.run as run_const
import melt.orchestrator.client as client
import melt.orchestrator.queue as queue_module


def test_structured_errors_come_back_as_they_were_raised():
    raised = error_const.AgentError.AGENT_CRASH.build(prompt_index=2, reason="oom")

    error = client.HttpAgent._to_error(500, json.loads(raised.response().body))

    assert error.type == raised.type
    assert error.ctx == {"prompt_index": 2, "reason": "oom"}
    assert error.status_code == 500
    assert queue_module.run_status(error.exception()) == run_const.RunStatus.OOM


@pytest.mark.parametrize("payload", [{"detail": "Not Found"}, "upstream exploded", {"detail": []}])
def test_unstructured_errors(payload):
    error = client.HttpAgent._to_error(502, payload)
    assert error.type == "agent_http_error"
    assert error.status_code == 502


@pytest.mark.parametrize(
    ("raised", "status"),
    [
        (
            error_const.AgentError.CONVERSATION_TIMEOUT.build(conversation_index=0, timeout_s=1),
            run_const.RunStatus.TIMEOUT,
        ),
        (error_const.AgentError.AGENT_CRASH.build(prompt_index=0, reason="crash"), run_const.RunStatus.DEVICE_ERROR),
        (error_const.AgentError.DEVICE_OFF.build(device="x"), run_const.RunStatus.DEVICE_ERROR),
    ],
)
def test_run_status_of_failures(raised, status):
    assert queue_module.run_status(raised.exception()) == status


async def test_unreachable_agent_raises_connection_error():
    async with client.HttpAgent("nowhere", "http://127.0.0.1:9", timeout_s=1.0) as agent:
        with pytest.raises(ConnectionError):
            await agent.status()
