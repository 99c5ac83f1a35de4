# bpire/commands/classify.py
import click

import env as envs
from commands.common import experiment_options, prepare
from storage import write_json


@click.command("classify")
@experiment_options
def command(config_path, out_dir, seed, workers):
    """Classify the environment and report the hypothesis checks."""
    run = prepare("classify", config_path, out_dir, seed, workers)
    regime = envs.classify(run.env)
    write_json(run.out / "regime.json", regime, run.meta)
    click.echo(f"{run.env.label or 'env'}: {regime.kind} subcritical, delta={regime.delta:.10g}, gamma={regime.gamma:.10g}")
