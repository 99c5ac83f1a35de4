# bpire/main.py
import logging
import sys

import click

from commands import classify, kernel, report, simulate, tail, verify
from exceptions import BpireError
from settings import APP_NAME, APP_VERSION, LOG_LEVEL


class BpireGroup(click.Group):
    """Maps library errors onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except BpireError as exc:
            click.echo(f"error: {exc.detail}", err=True)
            ctx.exit(exc.exit_code)


@click.group(cls=BpireGroup)
@click.version_option(APP_VERSION, prog_name=APP_NAME)
@click.option("--log-level", default=LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Life-period tails of subcritical branching processes with immigration in random environment."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


cli.add_command(classify.command)
cli.add_command(kernel.command)
cli.add_command(tail.command)
cli.add_command(simulate.command)
cli.add_command(verify.command)
cli.add_command(report.command)


if __name__ == "__main__":
    cli()
