from __future__ import annotations

import asyncio
import logging
import pathlib as pt

import melt.const.error as error_const
import melt.error_handler.__type__ as err_type
import melt.util.import_util as import_util
import melt.util.mu_exception as exception_util

logger = logging.getLogger(__name__)


def _log_failure(req: err_type.ReqType, err: Exception) -> None:
    where = f"[{getattr(req.app.state, 'device_id', req.app.title)}] {req.method} {req.url.path}"
    if isinstance(err, error_const.MeltError):
        # ErrorStruct.raise_ has logged the details already.
        logger.info(f"{where} answered {err.error.status_code}: {err.type}")
        return
    logger.warning(f"{where} failed\n{exception_util.get_traceback_msg(err)}")


def get_error_handlers() -> err_type.ErrHandlersDef:
    """Collect `error_handler_patterns` from the err_* modules, each wrapped to log the failed request."""
    error_handler_collection: list[err_type.ErrHandlersDef] = import_util.auto_import_patterns(
        "error_handler_patterns",
        "err_",
        pt.Path(__file__).parent,
    )

    def with_request_log(err_handler: err_type.ErrHandlerType) -> err_type.ErrHandlerType:
        async def wrapper(req: err_type.ReqType, err: Exception) -> err_type.RespType:
            _log_failure(req, err)
            return (await response) if asyncio.iscoroutine(response := err_handler(req, err)) else response

        return wrapper

    return {k: with_request_log(v) for d in error_handler_collection for k, v in d.items()}
