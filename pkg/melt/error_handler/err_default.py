from __future__ import annotations

import json

import fastapi

import melt.const.error as error_const
import melt.error_handler.__type__ as err_type


def valueerror_handler(req: err_type.ReqType, err: ValueError) -> err_type.RespType:
    error = error_const.ErrorStruct.from_exception(err)
    return error(status_code=fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY).response()


def jsondecodeerror_handler(req: err_type.ReqType, err: json.JSONDecodeError) -> err_type.RespType:
    return error_const.ErrorStruct(
        type="json_decode_error",
        msg="request body is not valid JSON",
        input=err.doc,
        ctx={"pos": err.pos, "lineno": err.lineno, "colno": err.colno, "msg": err.msg},
        status_code=fastapi.status.HTTP_400_BAD_REQUEST,
    ).response()


def exception_handler(req: err_type.ReqType, err: Exception) -> err_type.RespType:
    return error_const.ErrorStruct(type="unknown_server_error", msg="unexpected server error").response()


error_handler_patterns = {
    ValueError: valueerror_handler,
    json.JSONDecodeError: jsondecodeerror_handler,
    Exception: exception_handler,
}
