import traceback
import typing

BaseExceptionType = BaseException | typing.Type[BaseException]


def get_traceback_msg(err: BaseExceptionType) -> str:
    return "".join(traceback.format_exception(err))
