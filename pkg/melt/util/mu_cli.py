import functools
import logging
import typing

import typer

import melt.const.error as error_const

logger = logging.getLogger(__name__)

P = typing.ParamSpec("P")
R = typing.TypeVar("R")


def exit_on_error(func: typing.Callable[P, R]) -> typing.Callable[P, R]:
    """Report MeltErrors on stderr and leave with their exit code instead of a traceback."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
        try:
            return func(*args, **kwargs)
        except error_const.MeltError as e:
            typer.echo(f"error [{e.type}]: {e.error.msg}", err=True)
            raise typer.Exit(code=e.error.exit_code) from e

    return wrapper


def usage_error(msg: str) -> typing.NoReturn:
    typer.echo(f"error: {msg}", err=True)
    raise typer.Exit(code=error_const.ExitCode.USAGE)
