from __future__ import annotations

import logging
import pathlib as pt

import melt.const.error as error_const
import melt.util.mu_file as file_util

logger = logging.getLogger(__name__)


class AgentStorage:
    """The device filesystem as seen by push/collect, mirrored to disk when a root is given."""

    def __init__(self, root: pt.Path | None = None) -> None:
        self.root = root
        self._files: dict[str, bytes] = {}

    def _path(self, name: str) -> pt.Path:
        assert self.root is not None  # nosec: B101
        path = (self.root / name).resolve()
        if not path.is_relative_to(self.root.resolve()):
            raise ValueError(f"'{name}' escapes the agent storage root")
        return path

    async def put(self, name: str, content: bytes) -> None:
        self._files[name] = content
        if self.root is not None:
            await file_util.async_save_bytes(content, self._path(name))

    async def append(self, name: str, content: bytes) -> None:
        await self.put(name, self._files.get(name, b"") + content)

    async def get(self, name: str) -> bytes:
        if name in self._files:
            return self._files[name]
        if self.root is not None and (path := self._path(name)).is_file():
            return await file_util.async_read_bytes(path)
        error_const.AgentError.ARTIFACT_NOT_FOUND.build(name=name).raise_()

    def names(self) -> list[str]:
        return sorted(self._files)
