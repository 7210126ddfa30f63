from __future__ import annotations

import melt.const.error as error_const
import melt.error_handler.__type__ as err_type


def melt_error_handler(req: err_type.ReqType, err: error_const.MeltError) -> err_type.RespType:
    return err.error.response()


def connection_error_handler(req: err_type.ReqType, err: ConnectionError) -> err_type.RespType:
    device = getattr(req.app.state, "device_id", "unknown")
    return error_const.OrchestratorError.AGENT_UNREACHABLE.build(device=device, reason=str(err)).response()


error_handler_patterns = {
    error_const.MeltError: melt_error_handler,
    ConnectionError: connection_error_handler,
}
