import logging

import fastapi
import pydantic

import melt.const.run as run_const
import melt.const.tag as tag_const
import melt.dependency.common as common_dep

logger = logging.getLogger(__name__)
router = fastapi.APIRouter(tags=[tag_const.OpenAPITag.NOTIFICATION])


class RunIdRequest(pydantic.BaseModel):
    run_id: str


class MarkResponse(pydantic.BaseModel):
    run_id: str
    kind: run_const.NotificationKind
    ts_ns: int


class WindowResponse(pydantic.BaseModel):
    run_id: str
    start_ns: int
    stop_ns: int | None = None


@router.post("/start", response_model=MarkResponse)
async def start(body: RunIdRequest, listener: common_dep.listenerDI) -> MarkResponse:
    ts_ns = listener.start(body.run_id)
    return MarkResponse(run_id=body.run_id, kind=run_const.NotificationKind.START, ts_ns=ts_ns)


@router.post("/stop", response_model=MarkResponse)
async def stop(body: RunIdRequest, listener: common_dep.listenerDI) -> MarkResponse:
    ts_ns = listener.stop(body.run_id)
    return MarkResponse(run_id=body.run_id, kind=run_const.NotificationKind.STOP, ts_ns=ts_ns)


@router.get("/marks/{run_id}", response_model=WindowResponse)
async def marks(run_id: str, listener: common_dep.listenerDI) -> WindowResponse:
    marks = listener.marks(run_id)
    return WindowResponse(
        run_id=run_id,
        start_ns=marks[run_const.NotificationKind.START],
        stop_ns=marks.get(run_const.NotificationKind.STOP),
    )
