import logging
import os
import time
import typing as t
from dataclasses import replace

import click
from click import echo

import rfdl.clickExt as clickExt
from rfdl.bench import run_bench
from rfdl.config import SWEEP_KINDS
from rfdl.config import SweepSpec
from rfdl.config import config_asdict
from rfdl.config import pass_userinfo
from rfdl.config import resolve_experiment
from rfdl.config import UserInfo
from rfdl.data import load_dataset
from rfdl.formatting import format_columns
from rfdl.formatting import format_mean_std
from rfdl.formatting import format_percent
from rfdl.fs import ensure_dir
from rfdl.results import aggregate
from rfdl.results import metadata_record
from rfdl.results import write_json
from rfdl.results import write_results
from rfdl.results import write_sweep
from rfdl.rfdl import cli
from rfdl.spec import CONFIGSPEC
from rfdl.spec import MANIFESTSPEC

logger = logging.getLogger(__name__)


@cli.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    metavar=CONFIGSPEC,
    help="Experiment configuration, or the metadata of a previous run.",
)
@click.option(
    "--dataset",
    type=click.Path(exists=True, dir_okay=False),
    metavar=MANIFESTSPEC,
    help="Dataset manifest, overriding the configuration.",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    help="Output directory, overriding the configuration.",
)
@click.option(
    "-j",
    "--jobs",
    type=click.IntRange(min=1),
    help="Number of runs executed in parallel. Defaults to the user configuration.",
)
@click.option(
    "--splits",
    "n_splits",
    type=click.IntRange(min=1),
    help="Number of random splits per sweep point.",
)
@click.option(
    "--sweep",
    "sweep_kind",
    type=click.Choice(SWEEP_KINDS),
    help="Quantity varied across the benchmark.",
)
@click.option(
    "--value",
    "sweep_values",
    type=clickExt.SweepValue(),
    multiple=True,
    help="A sweep value; repeat for every point of the sweep.",
)
@clickExt.hyperparam_options
@clickExt.split_options
@pass_userinfo
def bench(
    user_info: UserInfo,
    config_path: t.Optional[str],
    dataset: t.Optional[str],
    out: t.Optional[str],
    jobs: t.Optional[int],
    n_splits: t.Optional[int],
    sweep_kind: t.Optional[str],
    sweep_values: t.Tuple[t.Any, ...],
    method: t.Optional[str],
    alpha: t.Optional[float],
    beta: t.Optional[float],
    gamma: t.Optional[float],
    dict_size: t.Optional[int],
    factor_rank: t.Optional[int],
    max_iter: t.Optional[int],
    eps: t.Optional[float],
    seed: t.Optional[int],
    train_per_class: t.Optional[int],
    split_seed: t.Optional[int],
    pca_energy: t.Optional[float],
):
    """Train and test over random splits and an optional sweep.

    Every (sweep value, split) pair is an independent run. Results are
    aggregated into mean, standard deviation and best accuracy per sweep value
    ('results.json', 'results.csv') and listed per run in 'sweep.csv'. A run
    that fails is recorded with its error and the benchmark continues."""
    start = time.perf_counter()
    if sweep_values and not sweep_kind and not config_path:
        raise click.BadOptionUsage("sweep_values", "--value requires --sweep.")
    experiment, params = resolve_experiment(
        config_path,
        dataset,
        user_info.config.hyperparams,
        dict(
            alpha=alpha,
            beta=beta,
            gamma=gamma,
            dict_size=dict_size,
            factor_rank=factor_rank,
            max_iter=max_iter,
            eps=eps,
            seed=seed,
        ),
        method=method,
        split={
            "train_per_class": train_per_class,
            "seed": split_seed,
            "n_splits": n_splits,
        },
        pca_energy=pca_energy,
        out=out,
    )
    if sweep_kind or sweep_values:
        sweep = SweepSpec(
            sweep_kind or experiment.sweep.kind,
            list(sweep_values) or experiment.sweep.values,
        )
        experiment = replace(experiment, sweep=sweep).validate()

    jobs = jobs or user_info.config.jobs
    out_dir = ensure_dir(experiment.out)
    data = load_dataset(experiment.dataset, normalize=False)
    results = run_bench(experiment, params, data, out_dir, jobs)
    records = aggregate(results)

    write_results(
        out_dir,
        records,
        {
            "method": experiment.method,
            "sweep": experiment.sweep.kind,
            "n_splits": experiment.split.n_splits,
            "train_per_class": experiment.split.train_per_class,
        },
    )
    write_sweep(os.path.join(out_dir, "sweep.csv"), results)
    write_json(
        os.path.join(out_dir, "metadata.json"),
        metadata_record(
            "bench",
            config=config_asdict(experiment),
            seed=params.seed,
            jobs=jobs,
            wall_time_s=time.perf_counter() - start,
        ),
    )

    failed = sum(1 for result in results if not result.ok)
    if failed:
        logger.warning(f"{failed} of {len(results)} runs failed; see 'sweep.csv'.")
    echo(
        format_columns(
            {
                record.sweep_value if record.sweep_value is not None else "accuracy": (
                    format_mean_std(record.mean, record.std)  # type: ignore
                    + f"  best {format_percent(record.best)}"  # type: ignore
                    if record.mean is not None
                    else "failed"
                )
                for record in records
            }
        )
    )
