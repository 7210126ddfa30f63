import asyncio
import typing

import fastapi

import melt.agent.__interface__ as agent_interface
import melt.orchestrator.notification as notification


def listener_di(request: fastapi.Request) -> typing.Generator[notification.NotificationListener, None, None]:
    fastapi_app: fastapi.FastAPI = request.app
    listener: notification.NotificationListener = fastapi_app.state.listener
    yield listener


def agent_di(request: fastapi.Request) -> typing.Generator[agent_interface.DeviceAgent, None, None]:
    fastapi_app: fastapi.FastAPI = request.app
    agent: agent_interface.DeviceAgent = fastapi_app.state.agent
    yield agent


async def serial_agent_di(request: fastapi.Request) -> typing.AsyncGenerator[agent_interface.DeviceAgent, None]:
    """The device handles one request at a time, in arrival order."""
    fastapi_app: fastapi.FastAPI = request.app
    lock: asyncio.Lock = fastapi_app.state.agent_lock
    async with lock:
        yield fastapi_app.state.agent


listenerDI = typing.Annotated[notification.NotificationListener, fastapi.Depends(listener_di)]
agentDI = typing.Annotated[agent_interface.DeviceAgent, fastapi.Depends(agent_di)]
serialAgentDI = typing.Annotated[agent_interface.DeviceAgent, fastapi.Depends(serial_agent_di)]
