# bpire/commands/report.py
import click

import tail
from commands.common import experiment_options, prepare
from schemas import FitResult, Regime, RootCertificate, Summary
from storage import read_json, write_json

ARTIFACTS = ("regime.json", "kernel.csv", "survival.csv", "root.json", "fit.json", "samples.csv", "empirical_survival.csv", "verify.json")


@click.command("report")
@experiment_options
def command(config_path, out_dir, seed, workers):
    """Merge earlier outputs in --out into report.json with the case verdict."""
    run = prepare("report", config_path, out_dir, seed, workers)
    present = [name for name in ARTIFACTS if (run.out / name).exists()]

    def load(name, model):
        if name not in present:
            return None
        return model.model_validate(read_json(run.out / name)["result"])

    regime = load("regime.json", Regime)
    root = load("root.json", RootCertificate)
    fit = load("fit.json", FitResult)
    summary = Summary(
        label=run.env.label,
        regime=regime,
        root=root,
        fit=fit,
        verdict=tail.verdict(regime, root) if root is not None else "undetermined",
        artifacts=present,
    )
    write_json(run.out / "report.json", summary, run.meta)
    click.echo(summary.verdict)
