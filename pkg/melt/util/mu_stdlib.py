import contextlib
import importlib
import pathlib as pt
import types
import typing


def isiterable(a: typing.Any) -> bool:
    with contextlib.suppress(TypeError):
        return iter(a) is not None
    return False


def load_module(module_path: pt.Path) -> types.ModuleType:
    """Import a module of this package by its file path, under its dotted package name."""
    if not module_path.is_file():
        raise ValueError(f"module_path must be file path: {module_path}")

    module_path = module_path.resolve()
    package_root = pt.Path(__file__).resolve().parents[2]
    module_name = ".".join(module_path.relative_to(package_root).with_suffix("").parts)
    return importlib.import_module(module_name)
