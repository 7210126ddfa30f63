from __future__ import annotations

import fastapi.responses
import pydantic_core

import melt.error_handler.__type__ as err_type


def pydantic_validationerror_handler(req: err_type.ReqType, err: pydantic_core.ValidationError) -> err_type.RespType:
    status_code = fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY
    content = {"detail": err.errors(include_context=False, include_url=False)}
    return fastapi.responses.JSONResponse(status_code=status_code, content=content)


error_handler_patterns = {pydantic_core.ValidationError: pydantic_validationerror_handler}
