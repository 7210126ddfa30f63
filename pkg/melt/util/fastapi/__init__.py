import typing

import fastapi
import pydantic


class AckResponse(pydantic.BaseModel):
    """Reply to a command that returns nothing but its acceptance, stamped with the answering device."""

    message: typing.Literal["ok"] = "ok"
    device_id: str | None = None


def ack(request: fastapi.Request) -> AckResponse:
    return AckResponse(device_id=getattr(request.app.state, "device_id", None))
