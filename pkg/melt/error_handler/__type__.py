import typing

import fastapi.responses
import starlette.requests

ReqType: typing.TypeAlias = starlette.requests.Request
RespType: typing.TypeAlias = fastapi.responses.JSONResponse
# Handlers narrow the exception type they accept, and answer with an ErrorStruct response, sync or async.
ErrHandlerType: typing.TypeAlias = typing.Callable[[ReqType, typing.Any], RespType | typing.Awaitable[RespType]]
ErrHandlersDef: typing.TypeAlias = dict[type[Exception], ErrHandlerType]
