import fastapi

import melt.const.tag as tag_const
import melt.util.fastapi as fastapi_util

router = fastapi.APIRouter(tags=[tag_const.OpenAPITag.HEALTH_CHECK])


@router.get("/livez", response_model=fastapi_util.AckResponse, response_model_exclude_none=True)
async def livez(request: fastapi.Request) -> fastapi_util.AckResponse:
    return fastapi_util.ack(request)
