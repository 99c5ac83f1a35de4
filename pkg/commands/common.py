# bpire/commands/common.py
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

import catalog
import kernel
from schemas import ArtifactMeta, BuiltinEnvSpec, EnvModel, ExperimentConfig, KernelSeries
from settings import DEFAULT_SEED, DEFAULT_WORKERS, OUT_DIR
from storage import load_config, make_meta

logger = logging.getLogger(__name__)


def experiment_options(fn):
    fn = click.option("--workers", type=click.IntRange(1, 256), default=None, help="Worker threads; overrides the config.")(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Root seed; overrides the config.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=OUT_DIR, show_default=True)(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML experiment file.")(fn)
    return fn


@dataclass
class Run:
    config: ExperimentConfig
    env: Optional[EnvModel]
    seed: int
    workers: int
    out: Path
    meta: ArtifactMeta


def prepare(
    command: str,
    config_path: Optional[str],
    out_dir: str,
    seed: Optional[int],
    workers: Optional[int],
    fallback_env: Optional[str] = None,
) -> Run:
    """Resolve config, seed and workers: flag, then config file, then environment default."""
    if config_path is not None:
        config = load_config(config_path)
    elif fallback_env is not None:
        config = ExperimentConfig(env=BuiltinEnvSpec(builtin=fallback_env), command=command)
    else:
        raise click.UsageError(f"{command} needs --config")
    if config.command != command:
        logger.debug("config names command %r; running %r", config.command, command)
    seed = seed if seed is not None else config.seed if config.seed is not None else DEFAULT_SEED
    workers = workers if workers is not None else config.workers if config.workers is not None else DEFAULT_WORKERS
    env = catalog.resolve(config.env)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return Run(config=config, env=env, seed=seed, workers=workers, out=out, meta=make_meta(config, seed, workers))


def build_kernel(run: Run, n_max: int) -> KernelSeries:
    method = run.config.kernel_method
    if method == "exact":
        return kernel.kernel_exact(run.env, n_max, run.workers)
    if method == "hybrid":
        return kernel.kernel_hybrid(run.env, n_max, run.config.samples, run.seed, run.workers)
    mode = "tilted" if method == "tilted-mc" else "direct"
    return kernel.kernel_series_mc(run.env, n_max, run.config.samples, mode, run.seed, run.workers)


def survival_horizon(run: Run) -> int:
    return run.config.horizon or max(run.config.n_max, 1)
