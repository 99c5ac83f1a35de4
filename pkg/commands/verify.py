# bpire/commands/verify.py
import click

from acceptance import run_suite
from commands.common import experiment_options, prepare
from exceptions import AcceptanceFailure
from storage import write_json


@click.command("verify")
@experiment_options
@click.option("--profile", type=click.Choice(["quick", "full"]), default=None, help="Defaults to the config's profile.")
def command(config_path, out_dir, seed, workers, profile):
    """Run the acceptance suite on the built-in environments."""
    run = prepare("verify", config_path, out_dir, seed, workers, fallback_env="D1")
    report = run_suite(profile or run.config.profile, run.seed, run.workers)
    write_json(run.out / "verify.json", report, run.meta)
    for check in report.checks:
        click.echo(f"{'PASS' if check.passed else 'FAIL'}  {check.name}")
    if not report.passed:
        failed = ", ".join(c.name for c in report.checks if not c.passed)
        raise AcceptanceFailure(f"acceptance failed: {failed}")
