from __future__ import annotations

import enum
import logging
import typing

import fastapi
import pydantic
import typing_extensions as tx

import melt.util.mu_string as string_util

logger = logging.getLogger(__name__)


class ExitCode(enum.IntEnum):
    OK = 0
    USAGE = 1
    DATA_ERROR = 2
    IO_ERROR = 3


class ErrorStructDict(typing.TypedDict):
    type: typing.NotRequired[str]
    msg: typing.NotRequired[str]
    loc: typing.NotRequired[list[str]]
    input: typing.NotRequired[typing.Any]
    ctx: typing.NotRequired[dict[str, typing.Any]]

    status_code: typing.NotRequired[int]
    exit_code: typing.NotRequired[ExitCode]
    should_log: typing.NotRequired[bool]


class ErrorStruct(pydantic.BaseModel):
    type: str
    msg: str
    loc: list[str] | None = None
    input: typing.Any | None = None
    ctx: dict[str, typing.Any] | None = None

    status_code: int = pydantic.Field(default=fastapi.status.HTTP_500_INTERNAL_SERVER_ERROR, exclude=True)
    exit_code: ExitCode = pydantic.Field(default=ExitCode.DATA_ERROR, exclude=True)
    should_log: bool = pydantic.Field(default=True, exclude=True)

    @classmethod
    def from_exception(cls, err: Exception) -> ErrorStruct:
        if isinstance(err, MeltError):
            return err.error
        return cls(
            type=string_util.camel_to_snake_case(err.__class__.__name__),
            msg=str(err),
            loc=getattr(err, "loc", None),
            input=getattr(err, "input", None),
            ctx=getattr(err, "ctx", None),
        )

    def __call__(self, **kwargs: tx.Unpack[ErrorStructDict]) -> ErrorStruct:
        return self.model_copy(update=kwargs)

    def __repr__(self) -> str:
        result = f"{self.type}:{self.status_code}:{self.msg}"
        result += f"({self.ctx=})" if self.ctx else ""
        result += f"({self.loc=})" if self.loc else ""
        return result

    def format_msg(self, *args: object, **kwargs: object) -> ErrorStruct:
        return self(msg=self.msg.format(*args, **kwargs))

    def dump(self) -> ErrorStructDict:
        return self.model_dump(mode="json", exclude_none=True, exclude_defaults=True)

    def exception(self) -> MeltError:
        return MeltError(self)

    def raise_(self) -> typing.NoReturn:
        if self.should_log:
            logger.error(repr(self))
        raise MeltError(self)

    def response(self) -> fastapi.responses.JSONResponse:
        content = {"detail": [self.dump()]}
        return fastapi.responses.JSONResponse(status_code=self.status_code, content=content)


class MeltError(Exception):
    """Every failure the toolkit raises on purpose; carries the ErrorStruct describing it."""

    def __init__(self, error: ErrorStruct) -> None:
        super().__init__(error.msg)
        self.error = error

    @property
    def type(self) -> str:
        return self.error.type

    @property
    def ctx(self) -> dict[str, typing.Any]:
        return self.error.ctx or {}

    def is_(self, member: ErrorEnum) -> bool:
        return self.type == member.type_name


class ErrorEnumMixin:
    __default_args__: dict[str, typing.Any] = {}
    __additional_args__: dict[str, typing.Any] = {}


class ErrorEnum(ErrorEnumMixin, enum.StrEnum):
    _ignore_ = ["__default_args__", "__additional_args__"]

    @property
    def type_name(self) -> str:
        return string_util.camel_to_snake_case(f"{self.__class__.__name__}.{self.name}")

    def build(self, **ctx: typing.Any) -> ErrorStruct:
        """Fill the message placeholders from ctx and keep ctx on the struct."""
        return self(ctx=ctx).format_msg(**ctx)

    def __call__(self, **kwargs: tx.Unpack[ErrorStructDict]) -> ErrorStruct:
        return ErrorStruct(
            **{
                "type": self.type_name,
                "msg": self.value,
                **self.__default_args__,
                **self.__additional_args__.get(self.name, {}),
                **kwargs,
            }
        )


class CoreError(ErrorEnum):
    __default_args__ = {"status_code": fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY, "should_log": False}
    __additional_args__ = {
        "MODEL_NOT_FOUND": ErrorStructDict(status_code=fastapi.status.HTTP_404_NOT_FOUND),
        "DEVICE_NOT_FOUND": ErrorStructDict(status_code=fastapi.status.HTTP_404_NOT_FOUND),
        "DIGEST_MISMATCH": ErrorStructDict(should_log=True),
    }

    LENGTH_MISMATCH = "contexts ({contexts}) and max_gen_lengths ({max_gen_lengths}) must pair elementwise"
    MODEL_NOT_FOUND = "model '{name}' is not in the registry"
    DEVICE_NOT_FOUND = "device '{name}' is not in the registry"
    DIGEST_MISMATCH = "artifact of '{name}' hashes to {actual}, registry says {expected}"
    MANIFEST_INVALID = "manifest file {path} is invalid: {reason}"


class OrchestratorError(ErrorEnum):
    __default_args__ = {"status_code": fastapi.status.HTTP_503_SERVICE_UNAVAILABLE, "should_log": True}
    __additional_args__ = {
        "UNKNOWN_RUN_ID": ErrorStructDict(status_code=fastapi.status.HTTP_404_NOT_FOUND),
        "DUPLICATE_START": ErrorStructDict(status_code=fastapi.status.HTTP_409_CONFLICT),
        "MONITOR_BUSY": ErrorStructDict(status_code=fastapi.status.HTTP_409_CONFLICT),
        "EMPTY_QUEUE_FILE": ErrorStructDict(status_code=fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY),
    }

    AGENT_UNREACHABLE = "agent of device '{device}' did not answer: {reason}"
    AGENT_LOST = "agent of device '{device}' was lost mid-queue, aborting"
    CLOCK_UNSTABLE = "minimum clock probe round trip {rtt_ms:.3f} ms exceeds the {bound_ms:.3f} ms bound"
    POWER_TIMEOUT = "device '{device}' did not become responsive within {timeout_s} s"
    UNKNOWN_RUN_ID = "no monitoring window was started for run '{run_id}'"
    DUPLICATE_START = "run '{run_id}' was already started"
    MONITOR_BUSY = "device '{device}' is already recording run '{run_id}'"
    EMPTY_QUEUE_FILE = "queue file {path} lists no experiments for device '{device}'"


class AgentError(ErrorEnum):
    __default_args__ = {"status_code": fastapi.status.HTTP_500_INTERNAL_SERVER_ERROR, "should_log": True}
    __additional_args__ = {
        "ARTIFACT_NOT_FOUND": ErrorStructDict(status_code=fastapi.status.HTTP_404_NOT_FOUND),
        "CONVERSATION_TIMEOUT": ErrorStructDict(status_code=fastapi.status.HTTP_504_GATEWAY_TIMEOUT),
        "DEVICE_OFF": ErrorStructDict(status_code=fastapi.status.HTTP_503_SERVICE_UNAVAILABLE),
    }

    SIM_FAULT = "simulated {fault} at prompt {prompt_index}"
    AGENT_CRASH = "agent crashed at prompt {prompt_index} ({reason})"
    CONVERSATION_TIMEOUT = "conversation {conversation_index} exceeded {timeout_s} s"
    ARTIFACT_NOT_FOUND = "agent has no file named '{name}'"
    DEVICE_OFF = "device '{device}' is powered off"
    UNLOCK_FAILED = "could not unlock the screen of '{device}' over HID"


class TraceError(ErrorEnum):
    __default_args__ = {"status_code": fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY, "should_log": False}

    MALFORMED_ROW = "line {line}: {reason}"
    NON_MONOTONIC_TIMESTAMP = "line {line}: timestamp {ts} does not increase"
    EMPTY_TRACE = "trace has no samples"
    WINDOW_OUT_OF_RANGE = "window ({t0}, {t1}) is outside the trace span ({t_first}, {t_last})"
    TOO_FEW_SAMPLES = "window ({t0}, {t1}) holds {count} samples, at least {minimum} required"
    INVALID_RATE = "target rate must be positive, got {rate}"
    UNKNOWN_RAIL = "unknown rail '{rail}' kept under 'other'"


class AnalysisError(ErrorEnum):
    __default_args__ = {"status_code": fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY, "should_log": False}

    DEGENERATE_WINDOW = "window start {t0} must be before its end {t1}"
    MALFORMED_TRACE = "event trace is malformed: {reason}"
    NON_POSITIVE_INPUT = "{name} must be positive, got {value}"
    SERIES_TOO_SHORT = "series of {length} values is shorter than 2*w+1 = {required}"
    INVALID_PARAMETER = "{name} is out of range: {value}"


class ReportError(ErrorEnum):
    __default_args__ = {"status_code": fastapi.status.HTTP_422_UNPROCESSABLE_ENTITY, "should_log": True}
    __additional_args__ = {
        "IO_ERROR": ErrorStructDict(exit_code=ExitCode.IO_ERROR, status_code=500),
        "RUN_NOT_FOUND": ErrorStructDict(exit_code=ExitCode.IO_ERROR, status_code=404),
        "UNKNOWN_GROUP_KEY": ErrorStructDict(exit_code=ExitCode.USAGE, should_log=False),
    }

    EMPTY_GROUP = "group {group} has no runs"
    UNKNOWN_GROUP_KEY = "cannot group by '{key}', known keys are {known}"
    IO_ERROR = "could not write {path}: {reason}"
    RUN_NOT_FOUND = "no run artifacts under {path}"
