from __future__ import annotations

import asyncio
import typing

import fastapi

import melt.agent.__interface__ as agent_interface
import melt.config.monitor as monitor_config
import melt.config.project as project_config
import melt.error_handler as error_handler_module
import melt.orchestrator.notification as notification
import melt.route as route_module


def _create_app(
    surface: route_module.SURFACE,
    sentry_mode: monitor_config.SENTRY_MODE,
    config_obj: project_config.MeltSetting,
    **kwargs: typing.Any,
) -> fastapi.FastAPI:
    if config_obj.sentry.is_sentry_available(mode=sentry_mode):
        import sentry_sdk

        sentry_sdk.init(**config_obj.sentry.build_config(mode=sentry_mode))

    app = fastapi.FastAPI(
        **{"title": f"melt {surface}", "debug": config_obj.debug} | kwargs,
        exception_handlers=error_handler_module.get_error_handlers(),
    )
    app.state.config_obj = config_obj
    for route in route_module.get_routes(surface):
        app.include_router(route)
    return app


def create_notification_app(
    listener: notification.NotificationListener | None = None, **kwargs: typing.Any
) -> fastapi.FastAPI:
    """Endpoint the benchmark app posts its start/stop marks to."""
    config_obj = project_config.get_melt_setting()
    app = _create_app("notification", "orchestrator", config_obj, **kwargs)
    app.state.listener = listener or notification.NotificationListener()
    return app


def create_agent_app(agent: agent_interface.DeviceAgent, **kwargs: typing.Any) -> fastapi.FastAPI:
    config_obj = project_config.get_melt_setting()
    app = _create_app("agent", "agent", config_obj, **kwargs)
    app.state.agent = agent
    app.state.agent_lock = asyncio.Lock()
    app.state.device_id = agent.device_id
    return app
