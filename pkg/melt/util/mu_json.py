import datetime
import enum
import json
import pathlib as pt
import typing
import uuid

import numpy as np

PYTHON_JSON_TYPE = (bool, str, int, float, list, dict, type(None))


def obj_to_jsonable_type(obj: typing.Any) -> typing.Any:
    match obj:
        case enum.Enum():
            return obj.value
        case np.integer():
            return int(obj)
        case np.floating():
            return float(obj)
        case np.bool_():
            return bool(obj)
        case np.ndarray():
            return obj.tolist()
        case datetime.datetime() | datetime.date() | datetime.time():
            return obj.isoformat()
        case pt.PurePath() | uuid.UUID():
            return str(obj)
    return obj


class MuJSONEncoder(json.JSONEncoder):
    def default(self, obj: typing.Any) -> typing.Any:
        if isinstance((parse_result := obj_to_jsonable_type(obj)), PYTHON_JSON_TYPE):
            return parse_result

        return json.JSONEncoder.default(self, obj)


def dumps_stable(obj: typing.Any) -> str:
    """Byte-stable JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, cls=MuJSONEncoder, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
