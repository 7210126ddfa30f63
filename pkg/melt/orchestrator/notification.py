"""
Start/stop marks posted by the benchmark app. The marks bound the run-level energy accounting,
so the inter-run sleep never lands inside a window.
"""

from __future__ import annotations

import logging
import typing

import melt.const.error as error_const
import melt.const.run as run_const
import melt.util.time_util as time_util

logger = logging.getLogger(__name__)


class NotificationListener:
    """Append-only record of host-timestamped marks, one pair per run_id."""

    def __init__(self, clock: time_util.HostClock | None = None) -> None:
        self.clock: time_util.HostClock = clock or time_util.SystemClock()
        self._marks: dict[str, dict[run_const.NotificationKind, int]] = {}

    def start(self, run_id: str) -> int:
        if run_id in self._marks:
            error_const.OrchestratorError.DUPLICATE_START.build(run_id=run_id).raise_()
        ts_ns = self.clock.now_ns()
        self._marks[run_id] = {run_const.NotificationKind.START: ts_ns}
        logger.debug(f"start mark for {run_id} at {ts_ns}")
        return ts_ns

    def stop(self, run_id: str) -> int:
        if run_id not in self._marks:
            error_const.OrchestratorError.UNKNOWN_RUN_ID.build(run_id=run_id).raise_()
        marks = self._marks[run_id]
        if run_const.NotificationKind.STOP not in marks:
            marks[run_const.NotificationKind.STOP] = self.clock.now_ns()
            logger.debug(f"stop mark for {run_id} at {marks[run_const.NotificationKind.STOP]}")
        return marks[run_const.NotificationKind.STOP]

    def marks(self, run_id: str) -> dict[run_const.NotificationKind, int]:
        if run_id not in self._marks:
            error_const.OrchestratorError.UNKNOWN_RUN_ID.build(run_id=run_id).raise_()
        return dict(self._marks[run_id])

    def window(self, run_id: str) -> tuple[int, int] | None:
        """(start, stop) once both marks exist."""
        marks = self._marks.get(run_id, {})
        if run_const.NotificationKind.STOP not in marks:
            return None
        return marks[run_const.NotificationKind.START], marks[run_const.NotificationKind.STOP]


class Notifier(typing.Protocol):
    async def notify(self, kind: run_const.NotificationKind, run_id: str) -> None: ...


class LocalNotifier:
    """Posts straight into an in-process listener."""

    def __init__(self, listener: NotificationListener) -> None:
        self.listener = listener

    async def notify(self, kind: run_const.NotificationKind, run_id: str) -> None:
        match kind:
            case run_const.NotificationKind.START:
                self.listener.start(run_id)
            case run_const.NotificationKind.STOP:
                self.listener.stop(run_id)
