import logging

import fastapi

import melt.const.tag as tag_const
import melt.dependency.common as common_dep
import melt.schema.agent as agent_schema
import melt.util.fastapi as fastapi_util

logger = logging.getLogger(__name__)
router = fastapi.APIRouter(tags=[tag_const.OpenAPITag.AGENT])


@router.post("/power", response_model=fastapi_util.AckResponse)
async def power(body: agent_schema.PowerRequest, agent: common_dep.serialAgentDI) -> fastapi_util.AckResponse:
    await agent.power(body.action)
    return fastapi_util.AckResponse(device_id=agent.device_id)


@router.get("/status", response_model=agent_schema.StatusResponse)
async def status(agent: common_dep.agentDI) -> agent_schema.StatusResponse:
    return await agent.status()


@router.post("/clock", response_model=agent_schema.ClockProbeResponse)
async def clock(body: agent_schema.ClockProbeRequest, agent: common_dep.agentDI) -> agent_schema.ClockProbeResponse:
    return agent_schema.ClockProbeResponse(device_ts_ns=await agent.clock(body.host_ts_ns))


@router.post("/unlock", response_model=fastapi_util.AckResponse)
async def unlock(agent: common_dep.serialAgentDI) -> fastapi_util.AckResponse:
    await agent.unlock()
    return fastapi_util.AckResponse(device_id=agent.device_id)


@router.post("/push", response_model=fastapi_util.AckResponse)
async def push(request: fastapi.Request, name: str, agent: common_dep.serialAgentDI) -> fastapi_util.AckResponse:
    await agent.push(name, await request.body())
    return fastapi_util.AckResponse(device_id=agent.device_id)


@router.post("/apply", response_model=fastapi_util.AckResponse)
async def apply(body: agent_schema.AppConfig, agent: common_dep.serialAgentDI) -> fastapi_util.AckResponse:
    await agent.apply(body)
    return fastapi_util.AckResponse(device_id=agent.device_id)


@router.post("/launch", response_model=fastapi_util.AckResponse)
async def launch(body: agent_schema.LaunchRequest, agent: common_dep.serialAgentDI) -> fastapi_util.AckResponse:
    await agent.launch(body.backend)
    return fastapi_util.AckResponse(device_id=agent.device_id)


@router.post("/prompt", response_model=agent_schema.PromptReport)
async def prompt(body: agent_schema.PromptRequest, agent: common_dep.serialAgentDI) -> agent_schema.PromptReport:
    return await agent.prompt(body)


# Not serialized: it has to reach a prompt that is stuck holding the device.
@router.post("/interrupt", response_model=fastapi_util.AckResponse)
async def interrupt(agent: common_dep.agentDI) -> fastapi_util.AckResponse:
    await agent.interrupt()
    return fastapi_util.AckResponse(device_id=agent.device_id)


@router.get("/collect/{name:path}")
async def collect(name: str, agent: common_dep.serialAgentDI) -> fastapi.Response:
    return fastapi.Response(content=await agent.collect(name), media_type="application/octet-stream")
