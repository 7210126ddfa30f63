import asyncio
import time
import typing

import melt.const.time as time_const


class HostClock(typing.Protocol):
    """Host timebase as seen by the coordinator."""

    def now_ns(self) -> int: ...

    async def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now_ns(self) -> int:
        return time.time_ns()

    async def sleep(self, seconds: float) -> None:
        await asyncio.sleep(seconds)


class VirtualClock:
    """
    Manually advanced clock for desk-scale simulation.
    Sleeping advances time instantly, so a whole queue replays in milliseconds.
    """

    def __init__(self, start_ns: int = 1_700_000_000 * time_const.NS_PER_S) -> None:
        self._now_ns = start_ns

    def now_ns(self) -> int:
        return self._now_ns

    def advance(self, delta_ns: int) -> int:
        if delta_ns < 0:
            raise ValueError("A clock cannot run backwards")
        self._now_ns += delta_ns
        return self._now_ns

    async def sleep(self, seconds: float) -> None:
        self.advance(s_to_ns(seconds))
        await asyncio.sleep(0)


def s_to_ns(seconds: float) -> int:
    return round(seconds * time_const.NS_PER_S)


def ns_to_s(ns: int) -> float:
    return ns / time_const.NS_PER_S
