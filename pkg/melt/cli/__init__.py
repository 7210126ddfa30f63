import pathlib as pt
import typing

import typer

import melt.config.project as project_config
import melt.util.mu_stdlib as utils

typer_app = typer.Typer(no_args_is_help=True, add_completion=False)


@typer_app.callback()
def setup() -> None:
    """Benchmark on-device LLM inference and analyze the traces it leaves behind."""
    project_config.get_melt_setting().configure_logging()


current_dir = pt.Path(__file__).parent
for module_path in sorted(current_dir.glob("*.py")):
    if module_path.stem.startswith("__"):
        continue
    module = utils.load_module(module_path)

    cli_patterns: list[typing.Callable]
    if not utils.isiterable(cli_patterns := getattr(module, "cli_patterns", None)):
        continue

    for cli_func in cli_patterns:
        typer_app.command()(cli_func)
