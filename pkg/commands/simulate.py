# bpire/commands/simulate.py
import click

import sim
from commands.common import experiment_options, prepare, survival_horizon
from storage import write_samples_csv, write_survival_csv


@click.command("simulate")
@experiment_options
def command(config_path, out_dir, seed, workers):
    """Simulate life periods of the stopped process and tabulate P(zeta > n)."""
    run = prepare("simulate", config_path, out_dir, seed, workers)
    batch = sim.simulate(run.env, run.config.samples, run.seed, run.workers, run.config.cap)
    write_samples_csv(run.out / "samples.csv", batch.zeta, batch.censored, batch.peak, run.meta)
    curve = sim.empirical_survival(batch, min(survival_horizon(run), run.config.cap - 1))
    write_survival_csv(run.out / "empirical_survival.csv", curve, run.meta)
    click.echo(f"{len(batch)} life periods, {int(batch.censored.sum())} censored")
