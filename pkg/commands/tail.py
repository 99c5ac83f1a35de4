# bpire/commands/tail.py
import logging

import click

import kernel
import tail
from commands.common import build_kernel, experiment_options, prepare, survival_horizon
from exceptions import FitError
from settings import KERNEL_BUDGET, ROOT_MAX_N
from storage import write_json, write_survival_csv

logger = logging.getLogger(__name__)


@click.command("tail")
@experiment_options
def command(config_path, out_dir, seed, workers):
    """Survival curve from the renewal recurrence, root certificate and decay fit."""
    run = prepare("tail", config_path, out_dir, seed, workers)
    N = survival_horizon(run)
    series = build_kernel(run, max(run.config.n_max, N - 1))
    R1 = kernel.r1(run.env)
    curve = tail.survival_from_kernel(series, R1, N)
    write_survival_csv(run.out / "survival.csv", curve, run.meta)

    try:
        fit = tail.decay_fit(curve, run.config.fit_model, run.config.window, gamma=series.gamma)
    except FitError as exc:
        logger.warning("no decay fit: %s", exc.detail)
    else:
        write_json(run.out / "fit.json", fit, run.meta)

    # an undecided certificate propagates as exit code 2, after the curve is on disk
    if run.config.kernel_method == "exact":
        limit = max(kernel.max_exact_n(run.env, KERNEL_BUDGET, ROOT_MAX_N), series.n_max)
        series, cert = tail.refine_root(
            series, lambda n: kernel.kernel_exact(run.env, n, run.workers), limit, run.config.tail_model
        )
    else:
        cert = tail.find_root(series, run.config.tail_model)
    result = cert.model_dump(mode="json")
    result["n_max"] = series.n_max
    if cert.case == "case1":
        result["case1_constant"] = tail.case1_constant(series, R1, cert.r, run.config.tail_model)
    write_json(run.out / "root.json", result, run.meta)
    click.echo(f"{cert.case}" + (f": r = {cert.r:.10g}" if cert.r else ""))
