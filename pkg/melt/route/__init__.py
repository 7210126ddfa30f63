from __future__ import annotations

import pathlib as pt
import typing

import fastapi

import melt.route.healthcheck as healthcheck_route
import melt.util.import_util as import_util

SURFACE = typing.Literal["agent", "notification"]


def get_routes(surface: SURFACE) -> list[fastapi.APIRouter]:
    return [healthcheck_route.router, *import_util.auto_import_objs("router", "", pt.Path(__file__).parent / surface)]
