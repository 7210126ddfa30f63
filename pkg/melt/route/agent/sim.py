import fastapi

import melt.agent.__interface__ as agent_interface
import melt.const.tag as tag_const
import melt.dependency.common as common_dep
import melt.schema.agent as agent_schema

router = fastapi.APIRouter(prefix="/sim", tags=[tag_const.OpenAPITag.SIMULATOR])


@router.post("/trace", response_model=agent_schema.SimTraceResponse)
async def trace(body: agent_schema.SimTraceRequest, agent: common_dep.serialAgentDI) -> agent_schema.SimTraceResponse:
    if not isinstance(agent, agent_interface.SimTraceSource):
        raise fastapi.HTTPException(status_code=fastapi.status.HTTP_404_NOT_FOUND, detail="agent is not simulated")
    return await agent.sim_trace(body.host_start_ns, body.host_end_ns, body.sampling_frequency_hz)
