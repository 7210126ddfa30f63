import sys

import click

import melt.cli
import melt.const.error as error_const


def main() -> None:
    try:
        exit_code = melt.cli.typer_app(standalone_mode=False)
    except click.UsageError as e:
        e.show()
        sys.exit(error_const.ExitCode.USAGE)
    except click.Abort:
        sys.exit(error_const.ExitCode.USAGE)
    sys.exit(exit_code or error_const.ExitCode.OK)


if __name__ == "__main__":
    main()
