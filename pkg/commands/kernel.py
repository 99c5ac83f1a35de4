# bpire/commands/kernel.py
import click

from commands.common import build_kernel, experiment_options, prepare
from storage import write_kernel_csv


@click.command("kernel")
@experiment_options
def command(config_path, out_dir, seed, workers):
    """Compute H_0..H_n and H*_1..H*_n."""
    run = prepare("kernel", config_path, out_dir, seed, workers)
    series = build_kernel(run, run.config.n_max)
    path = write_kernel_csv(run.out / "kernel.csv", series, run.meta)
    click.echo(f"{len(series.H)} kernel entries ({run.config.kernel_method}) -> {path}")
