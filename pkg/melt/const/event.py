import enum


class EventKind(enum.StrEnum):
    MODEL_LOAD = enum.auto()
    CONVERSATION = enum.auto()
    PREFILL = enum.auto()
    DECODE_TOKEN = enum.auto()
    OP = enum.auto()
    IDLE = enum.auto()


class EventPhase(enum.StrEnum):
    BEGIN = enum.auto()
    END = enum.auto()
    INSTANT = enum.auto()


class PhaseLabel(enum.StrEnum):
    LOAD = enum.auto()
    PREFILL = enum.auto()
    DECODE = enum.auto()
    IDLE = enum.auto()


class OpPhase(enum.StrEnum):
    PREFILL = enum.auto()
    EMBED = enum.auto()
    DECODE = enum.auto()


# Kinds that come as begin/end pairs and must nest.
SPAN_KINDS: frozenset[EventKind] = frozenset(
    {EventKind.MODEL_LOAD, EventKind.CONVERSATION, EventKind.PREFILL, EventKind.IDLE}
)
