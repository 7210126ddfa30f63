from __future__ import annotations

import asyncio
import logging
import typing

import aiohttp

import melt.const.device as device_const
import melt.const.error as error_const
import melt.const.model as model_const
import melt.schema.agent as agent_schema

logger = logging.getLogger(__name__)


class HttpAgent:
    """Drives an agent served over HTTP; failures come back as the same MeltErrors the agent raised."""

    def __init__(self, device_id: str, base_url: str, timeout_s: float = 30.0) -> None:
        self._device_id = device_id
        self.base_url = base_url.rstrip("/")
        self.timeout = aiohttp.ClientTimeout(total=timeout_s)
        self._session: aiohttp.ClientSession | None = None

    @property
    def device_id(self) -> str:
        return self._device_id

    async def __aenter__(self) -> HttpAgent:
        self._session = aiohttp.ClientSession(timeout=self.timeout)
        return self

    async def __aexit__(self, *args: typing.Any) -> None:
        await self.close()

    async def close(self) -> None:
        if self._session is not None:
            await self._session.close()
            self._session = None

    def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None:
            self._session = aiohttp.ClientSession(timeout=self.timeout)
        return self._session

    @staticmethod
    def _to_error(status: int, payload: typing.Any) -> error_const.ErrorStruct:
        detail = payload.get("detail") if isinstance(payload, dict) else None
        if isinstance(detail, list) and detail and isinstance(detail[0], dict) and "type" in detail[0]:
            return error_const.ErrorStruct(**detail[0], status_code=status)
        return error_const.ErrorStruct(type="agent_http_error", msg=str(detail or payload), status_code=status)

    async def _request(self, method: str, path: str, **kwargs: typing.Any) -> bytes:
        try:
            async with self._get_session().request(method, f"{self.base_url}{path}", **kwargs) as resp:
                body = await resp.read()
                if resp.status < 400:
                    return body
                try:
                    payload = await resp.json(content_type=None)
                except ValueError:
                    payload = body.decode("utf-8", errors="replace")
        except (aiohttp.ClientConnectionError, asyncio.TimeoutError) as e:
            raise ConnectionError(f"agent '{self.device_id}' at {self.base_url}: {e!r}") from e

        error = self._to_error(resp.status, payload)
        if error.type == error_const.OrchestratorError.AGENT_UNREACHABLE.type_name:
            raise ConnectionError(error.msg)
        raise error.exception()

    async def power(self, action: device_const.PowerAction) -> None:
        await self._request("POST", "/power", json=agent_schema.PowerRequest(action=action).model_dump(mode="json"))

    async def status(self) -> agent_schema.StatusResponse:
        return agent_schema.StatusResponse.model_validate_json(await self._request("GET", "/status"))

    async def clock(self, host_ts_ns: int) -> int:
        body = agent_schema.ClockProbeRequest(host_ts_ns=host_ts_ns).model_dump()
        return agent_schema.ClockProbeResponse.model_validate_json(
            await self._request("POST", "/clock", json=body)
        ).device_ts_ns

    async def unlock(self) -> None:
        await self._request("POST", "/unlock")

    async def push(self, name: str, content: bytes) -> None:
        await self._request("POST", "/push", params={"name": name}, data=content)

    async def apply(self, config: agent_schema.AppConfig) -> None:
        await self._request("POST", "/apply", json=config.model_dump(mode="json"))

    async def launch(self, backend: model_const.Backend) -> None:
        await self._request("POST", "/launch", json=agent_schema.LaunchRequest(backend=backend).model_dump(mode="json"))

    async def prompt(self, request: agent_schema.PromptRequest) -> agent_schema.PromptReport:
        raw = await self._request("POST", "/prompt", json=request.model_dump(mode="json"))
        return agent_schema.PromptReport.model_validate_json(raw)

    async def interrupt(self) -> None:
        await self._request("POST", "/interrupt")

    async def collect(self, name: str) -> bytes:
        return await self._request("GET", f"/collect/{name}")

    async def sim_trace(
        self, host_start_ns: int, host_end_ns: int, sampling_frequency_hz: float | None = None
    ) -> agent_schema.SimTraceResponse:
        body = agent_schema.SimTraceRequest(
            host_start_ns=host_start_ns, host_end_ns=host_end_ns, sampling_frequency_hz=sampling_frequency_hz
        )
        raw = await self._request("POST", "/sim/trace", json=body.model_dump(mode="json"))
        return agent_schema.SimTraceResponse.model_validate_json(raw)
