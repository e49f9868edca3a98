import logging
import os
import time
import typing as t
from dataclasses import asdict

import click
import numpy as np
from click import echo

import rfdl.clickExt as clickExt
from rfdl.bench import evaluate_split
from rfdl.bench import plan_split
from rfdl.bench import train_split
from rfdl.classify import embed
from rfdl.classify import predict_batch
from rfdl.config import MATRIX_FORMATS
from rfdl.config import config_asdict
from rfdl.config import pass_userinfo
from rfdl.config import resolve_experiment
from rfdl.config import UserInfo
from rfdl.data import MATRIX_EXTENSIONS
from rfdl.data import load_dataset
from rfdl.data import load_matrix
from rfdl.data import save_matrix
from rfdl.data import synth_classes
from rfdl.data import write_dataset
from rfdl.errors import NonConvergenceError
from rfdl.formatting import format_columns
from rfdl.formatting import format_percent
from rfdl.formatting import format_stop
from rfdl.fs import ensure_dir
from rfdl.fs import file_hash
from rfdl.logging import Stopwatch
from rfdl.model import load_model
from rfdl.model import read_sidecar
from rfdl.model import save_model
from rfdl.model import write_sidecar
from rfdl.results import ResultRecord
from rfdl.results import SplitResult
from rfdl.results import metadata_record
from rfdl.results import software_version
from rfdl.results import write_csv
from rfdl.results import write_json
from rfdl.results import write_results
from rfdl.rfdl import cli
from rfdl.solver import per_iteration_cost_report
from rfdl.spec import CONFIGSPEC
from rfdl.spec import MANIFESTSPEC
from rfdl.spec import MATRIXSPEC
from rfdl.spec import MODELSPEC

logger = logging.getLogger(__name__)


def _matrix_format(user_info: UserInfo, format: t.Optional[str]) -> str:
    return format or user_info.config.matrix_format


format_option = click.option(
    "--format",
    type=click.Choice(MATRIX_FORMATS),
    help="Matrix file format. Defaults to the user configuration.",
)


@cli.command()
@click.option("--classes", type=click.IntRange(min=1), default=3, show_default=True, help="Number of classes.")
@click.option("--dim", type=click.IntRange(min=1), default=30, show_default=True, help="Sample dimension n.")
@click.option("--per-class", type=click.IntRange(min=1), default=30, show_default=True, help="Samples per class.")
@click.option(
    "--separation",
    type=click.FloatRange(min=0),
    default=5.0,
    show_default=True,
    help="Distance between any two class means.",
)
@click.option(
    "--noise",
    type=click.FloatRange(min=0),
    default=0.5,
    show_default=True,
    help="Standard deviation of the Gaussian noise.",
)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Random seed.")
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default="synth",
    show_default=True,
    help="Directory to write the dataset to.",
)
@format_option
@click.option(
    "--geometry",
    type=clickExt.Geometry(),
    help="Record samples as HEIGHTxWIDTH images, e.g. '5x6'.",
)
@pass_userinfo
def synth(
    user_info: UserInfo,
    classes: int,
    dim: int,
    per_class: int,
    separation: float,
    noise: float,
    seed: int,
    out: str,
    format: t.Optional[str],
    geometry: t.Optional[t.Tuple[int, int]],
):
    """Generate a synthetic labelled dataset.

    Writes the features, labels and a dataset manifest to the output directory."""
    if geometry and geometry[0] * geometry[1] != dim:
        raise click.BadOptionUsage(
            "geometry",
            f"Geometry {geometry[0]}x{geometry[1]} does not match dimension {dim}.",
        )
    start = time.perf_counter()
    X, labels = synth_classes(classes, dim, per_class, separation, noise, seed)
    ensure_dir(out)
    manifest = write_dataset(
        out, X, labels, classes, _matrix_format(user_info, format), geometry
    )
    write_json(
        os.path.join(out, "metadata.json"),
        metadata_record(
            "synth",
            config={
                "classes": classes,
                "dim": dim,
                "per_class": per_class,
                "separation": separation,
                "noise": noise,
                "geometry": list(geometry) if geometry else None,
            },
            seed=seed,
            wall_time_s=time.perf_counter() - start,
        ),
    )
    logger.info(f"Wrote {X.shape[1]} samples of dimension {X.shape[0]}.")
    echo(manifest)


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
@clickExt.hyperparam_options
@clickExt.split_options
@pass_userinfo
def train(
    user_info: UserInfo,
    config_path: t.Optional[str],
    dataset: t.Optional[str],
    out: t.Optional[str],
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
    """Train a model.

    With --train-per-class only that many samples of each class are used for
    training; 'rfdl eval' then tests on the remaining samples by default.

    Exits with status 5 if the solver stops at --max-iter without converging.
    The model is saved regardless."""
    start = time.perf_counter()
    overrides = dict(
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        dict_size=dict_size,
        factor_rank=factor_rank,
        max_iter=max_iter,
        eps=eps,
        seed=seed,
    )
    experiment, params = resolve_experiment(
        config_path,
        dataset,
        user_info.config.hyperparams,
        overrides,
        method=method,
        split={"train_per_class": train_per_class, "seed": split_seed},
        pca_energy=pca_energy,
        out=out,
    )
    data = load_dataset(experiment.dataset)
    plan = plan_split(data.labels, data.classes, experiment.split.train_per_class, experiment.split.seed)
    logger.info(
        f"Training {experiment.method} on {plan.train.size} of {data.N} samples."
    )

    trained = train_split(
        experiment.method,
        data.X,
        data.labels,
        data.classes,
        plan.train,
        params,
        experiment.pca_energy,
        user_info.config.progress,
    )
    model, trace = trained.model, trained.trace

    out_dir = ensure_dir(experiment.out)
    model_path = os.path.join(out_dir, "model.bin")
    save_model(model_path, model)
    trace.to_csv(os.path.join(out_dir, "trace.csv"))

    train_accuracy = None
    if model.C is not None:
        train_accuracy = evaluate_split(model, data.X, data.labels, plan.train).accuracy
    cost = per_iteration_cost_report(
        params, (model.P.shape[1], plan.train.size), trace, data.classes
    )
    write_sidecar(
        model_path,
        {
            "method": model.method,
            "seed": params.seed,
            "dataset": experiment.dataset,
            "dataset_hash": data.hash(),
            "split": asdict(experiment.split),
            "train_accuracy": train_accuracy,
            "converged": trace.converged,
            "stop_reason": trace.stop_reason.value if trace.stop_reason else None,
            "iterations": trace.iterations,
            "final_residual": trace.final_residual,
            "dict_size": model.dict_size,
            "factor_rank": model.D.shape[0],
            "version": software_version(),
        },
    )
    write_json(
        os.path.join(out_dir, "metadata.json"),
        metadata_record(
            "train",
            config=config_asdict(experiment),
            seed=params.seed,
            wall_time_s=time.perf_counter() - start,
            model_hash=file_hash(model_path),
            cost={
                "formula": cost.formula,
                "terms": cost.terms,
                "estimate": cost.estimate,
                "mean_iteration_s": cost.mean_iteration_s,
            },
        ),
    )

    summary = {
        "model": model_path,
        "status": format_stop(trace.converged, trace.iterations, trace.final_residual),
        "train time": f"{trained.seconds:.2f}s",
    }
    if train_accuracy is not None:
        summary["train accuracy"] = format_percent(train_accuracy) + "%"
    echo(format_columns(summary))

    if not trace.converged:
        raise NonConvergenceError(
            f"Solver stopped at max_iter={params.max_iter} with residual "
            + f"{trace.final_residual:.3e}; the model was saved anyway."
        )


@cli.command(no_args_is_help=True)
@click.argument("model_path", metavar=MODELSPEC, type=click.Path(exists=True, dir_okay=False))
@click.argument("matrix", metavar=MATRIXSPEC, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default="out",
    show_default=True,
    help="Output directory.",
)
@click.option(
    "--embed",
    "write_embedding",
    is_flag=True,
    help="Also write the coefficients P*x of every sample.",
)
@format_option
@pass_userinfo
def predict(
    user_info: UserInfo,
    model_path: str,
    matrix: str,
    out: str,
    write_embedding: bool,
    format: t.Optional[str],
):
    """Classify every column of a matrix with a trained model.

    Writes 'predictions.csv' with the predicted label and soft scores of each
    sample."""
    start = time.perf_counter()
    model = load_model(model_path)
    Z = model.transform(load_matrix(matrix))
    out_dir = ensure_dir(out)

    if write_embedding:
        fmt = _matrix_format(user_info, format)
        save_matrix(
            os.path.join(out_dir, "embedding" + MATRIX_EXTENSIONS[fmt]), embed(model, Z), fmt
        )

    predicted = None
    if model.C is not None or not write_embedding:
        with Stopwatch() as watch:
            soft, hard = predict_batch(model, Z)
        logger.debug(f"Classified {hard.size} samples in {watch.elapsed:.3f}s.")
        predicted = hard
        write_csv(
            os.path.join(out_dir, "predictions.csv"),
            ["index", "label", *(f"score_{k}" for k in range(soft.shape[0]))],
            ([j, int(hard[j]), *soft[:, j]] for j in range(hard.size)),
        )
    else:
        logger.warning("Model has no classifier; only the embedding was written.")

    write_json(
        os.path.join(out_dir, "metadata.json"),
        metadata_record(
            "predict",
            config={
                "model": os.path.abspath(model_path),
                "matrix": os.path.abspath(matrix),
                "embed": write_embedding,
            },
            model_hash=file_hash(model_path),
            seed=model.params.seed,
            wall_time_s=time.perf_counter() - start,
        ),
    )
    if predicted is not None:
        counts = np.bincount(predicted, minlength=model.class_count or 0)
        echo(format_columns({f"class {k}": int(n) for k, n in enumerate(counts)}))


@cli.command(name="eval", no_args_is_help=True)
@click.argument("model_path", metavar=MODELSPEC, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--dataset",
    type=click.Path(exists=True, dir_okay=False),
    metavar=MANIFESTSPEC,
    help="Dataset manifest. Defaults to the dataset the model was trained on.",
)
@click.option(
    "--split",
    "subset",
    type=click.Choice(["test", "train", "all"]),
    default="test",
    show_default=True,
    help="Samples to evaluate on.",
)
@click.option(
    "--train-per-class",
    type=click.IntRange(min=1),
    help="Training samples per class of the split. Defaults to the training run's.",
)
@click.option(
    "--split-seed",
    type=click.IntRange(min=0),
    help="Seed of the split. Defaults to the training run's.",
)
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default="out",
    show_default=True,
    help="Output directory.",
)
@pass_userinfo
def evaluate(
    user_info: UserInfo,
    model_path: str,
    dataset: t.Optional[str],
    subset: str,
    train_per_class: t.Optional[int],
    split_seed: t.Optional[int],
    out: str,
):
    """Measure the accuracy of a trained model on a dataset split."""
    start = time.perf_counter()
    model = load_model(model_path)
    sidecar = read_sidecar(model_path)
    recorded_split = sidecar.get("split", {})
    dataset = dataset or sidecar.get("dataset")
    if not dataset:
        raise click.UsageError("No dataset was recorded with the model; pass --dataset.")
    if train_per_class is None:
        train_per_class = recorded_split.get("train_per_class")
    if split_seed is None:
        split_seed = recorded_split.get("seed", 0)
    assert split_seed is not None

    data = load_dataset(dataset)
    plan = plan_split(data.labels, data.classes, train_per_class, split_seed)
    indices = {
        "test": plan.test,
        "train": plan.train,
        "all": np.arange(data.N),
    }[subset]
    logger.info(f"Evaluating on {indices.size} {subset} samples.")
    result = evaluate_split(model, data.X, data.labels, indices)

    out_dir = ensure_dir(out)
    record = ResultRecord(
        subset,
        [
            SplitResult(
                sweep_value=subset,
                split=0,
                accuracy=result.accuracy,
                train_time_s=0.0,
                test_time_s=result.seconds,
                iterations=int(sidecar.get("iterations", 0)),
                converged=bool(sidecar.get("converged", True)),
            )
        ],
    )
    write_results(
        out_dir,
        [record],
        {"model": os.path.abspath(model_path), "method": model.method, "samples": int(indices.size)},
    )
    write_json(
        os.path.join(out_dir, "metadata.json"),
        metadata_record(
            "eval",
            config={
                "model": os.path.abspath(model_path),
                "dataset": os.path.abspath(dataset),
                "split": {"train_per_class": train_per_class, "seed": split_seed},
                "subset": subset,
            },
            seed=model.params.seed,
            wall_time_s=time.perf_counter() - start,
        ),
    )
    echo(format_columns({"accuracy": format_percent(result.accuracy) + "%", "samples": indices.size}))
