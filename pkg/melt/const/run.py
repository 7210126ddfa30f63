import enum


class RunStatus(enum.StrEnum):
    OK = enum.auto()
    OOM = enum.auto()
    TIMEOUT = enum.auto()
    DEVICE_ERROR = enum.auto()


class RunStep(enum.StrEnum):
    """Externally observable steps of the experiment loop, in the order they are logged."""

    PUSH = enum.auto()
    APPLY = enum.auto()
    ARM = enum.auto()
    RUN = enum.auto()
    STOP_MONITOR = "stop-monitor"
    COLLECT = enum.auto()
    SLEEP = enum.auto()


class MonitorState(enum.StrEnum):
    ARMED = enum.auto()
    RECORDING = enum.auto()
    STOPPED = enum.auto()


class NotificationKind(enum.StrEnum):
    START = enum.auto()
    STOP = enum.auto()


class ArtifactKind(enum.StrEnum):
    EVENTS = enum.auto()
    POWER = enum.auto()
    TEMPERATURE = enum.auto()
    RESPONSES = enum.auto()


ARTIFACT_FILENAMES: dict[ArtifactKind, str] = {
    ArtifactKind.EVENTS: "events.jsonl",
    ArtifactKind.POWER: "power.csv",
    ArtifactKind.TEMPERATURE: "temperature.csv",
    ArtifactKind.RESPONSES: "responses.json",
}
MANIFEST_FILENAME = "manifest.json"
REPORT_FILENAME = "report.json"
