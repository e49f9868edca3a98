import json
import logging
import math
import os
import typing as t
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from dataclasses import is_dataclass
from dataclasses import replace

import yaml
from click import make_pass_decorator
from platformdirs import PlatformDirs

from rfdl.errors import ConfigError
from rfdl.errors import EmptyFileError
from rfdl.errors import ExceptionCount
from rfdl.errors import InvalidParameterError

logger = logging.getLogger(__name__)

T = t.TypeVar("T")

dirs = PlatformDirs("rfdl", False)
CONFIG_DIR = dirs.user_config_dir

CONFIG_FILE = os.path.join(CONFIG_DIR, "config.yaml")


METHODS = ("jrfdl", "djrfdl", "cf_baseline")
MATRIX_FORMATS = ("rawf64", "csv")
SWEEP_KINDS = (
    "dict_size",
    "corruption",
    "occlusion",
    "ablation",
    "alpha",
    "beta",
    "gamma",
)
ABLATIONS = ("full", "alpha0", "beta0", "gamma0")


@dataclass(frozen=True)
class HyperParams:
    """Parameters governing a single solver run."""

    alpha: float = 1.0
    """Weight of the dictionary reconstruction term and of the sparsity of V."""

    beta: float = 1e-3
    """Weight of the classification error and classifier norm.

    Used jointly by DJ-RFDL, and by the post-hoc classifier otherwise."""

    gamma: float = 1e-5
    """Weight of the nuclear and L1 norms on the coefficients PX."""

    dict_size: t.Optional[int] = None
    """Number of dictionary atoms K. Defaults to the number of training samples."""

    factor_rank: t.Optional[int] = None
    """Rank r of the concept factorization.

    Defaults to min(2c, N, n) for labelled data, else min(ceil(N/10), n)."""

    mu0: float = 1e-6
    """Initial penalty parameter."""

    mu_max: float = 1e6
    """Upper bound of the penalty parameter."""

    eta: float = 1.12
    """Growth factor of the penalty parameter per iteration."""

    eps: float = 1e-7
    """Stopping tolerance on the largest constraint residual."""

    tau: float = 1e-6
    """Ridge added to the Gram inverses of the D and P updates."""

    floor: float = 1e-8
    """Smallest row norm used when computing reweighting diagonals."""

    max_iter: int = 500
    """Maximum number of solver iterations."""

    seed: int = 0
    """Seed of the random initialization."""

    reweight: bool = True
    """Update the L2,1 reweighting diagonals Q and G. When disabled both stay
    at the identity."""

    divergence_limit: float = 1e12
    """Magnitude above which the solver state is considered diverged."""

    def validate(self) -> "HyperParams":
        problems = []
        for name in ("alpha", "beta", "gamma", "tau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                problems.append(f"{name} must be a finite nonnegative number")
        for name in ("mu0", "mu_max", "eps", "floor", "divergence_limit"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.mu0 > self.mu_max:
            problems.append("mu0 must not exceed mu_max")
        if not self.eta > 1:
            problems.append("eta must be greater than 1")
        if self.max_iter < 1:
            problems.append("max_iter must be at least 1")
        for name in ("dict_size", "factor_rank"):
            value = getattr(self, name)
            if value is not None and value < 1:
                problems.append(f"{name} must be at least 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be an unsigned 64-bit integer")
        if problems:
            raise InvalidParameterError("Invalid hyperparameters: " + "; ".join(problems))
        return self


# mu reaches 1e8 in about 145 iterations
FAST_SCHEDULE = {"mu0": 1e-6, "eta": 1.25, "mu_max": 1e8}

METHOD_DEFAULTS: t.Dict[str, HyperParams] = {
    "jrfdl": HyperParams(alpha=1.0, gamma=1e-5, beta=1e-3, **FAST_SCHEDULE),
    "djrfdl": HyperParams(alpha=0.1, beta=1e-3, gamma=1e-3, **FAST_SCHEDULE),
    "cf_baseline": HyperParams(alpha=0.0, gamma=0.0, beta=1e-3),
}


@dataclass(frozen=True)
class SplitSpec:
    train_per_class: t.Optional[int] = None
    """Number of training samples drawn from each class. If unset, every sample
    is used for training and no test set exists."""

    n_splits: int = 1
    """Number of random splits to average over."""

    seed: int = 0
    """Seed of the first split. Split i uses seed + i."""


@dataclass(frozen=True)
class SweepSpec:
    kind: t.Optional[str] = None
    """One of `dict_size`, `corruption`, `occlusion`, `ablation`, `alpha`,
    `beta` or `gamma`."""

    values: t.List[t.Any] = field(default_factory=list)
    """Values visited by the sweep, in order."""


@dataclass(frozen=True)
class ExperimentConfig:
    """An experiment configuration file uses the JSON (or YAML) format."""

    dataset: str
    """Path to the dataset manifest, relative to the configuration file."""

    method: str = "jrfdl"
    """Training method: `jrfdl`, `djrfdl` or `cf_baseline`."""

    hyperparams: t.Dict[str, t.Any] = field(default_factory=dict)
    """Overrides for the method's default :class:`HyperParams`."""

    split: SplitSpec = SplitSpec()
    """Train/test split protocol."""

    sweep: SweepSpec = SweepSpec()
    """Benchmark sweep. Ignored by `train`."""

    pca_energy: t.Optional[float] = None
    """If set, reduce the training data with PCA keeping this fraction of the
    spectral energy."""

    corruption_mode: str = "uniform"
    """Replacement values of corrupted pixels: `uniform` or `salt_pepper`."""

    out: str = "out"
    """Output directory."""

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.method not in METHODS:
            problems.append(f"unknown method '{self.method}'")
        if self.split.n_splits < 1:
            problems.append("split.n_splits must be at least 1")
        if self.split.train_per_class is not None and self.split.train_per_class < 1:
            problems.append("split.train_per_class must be at least 1")
        if self.sweep.kind is not None:
            if self.sweep.kind not in SWEEP_KINDS:
                problems.append(f"unknown sweep kind '{self.sweep.kind}'")
            elif not self.sweep.values:
                problems.append("sweep.values must not be empty")
            elif self.sweep.kind == "ablation":
                bad = [v for v in self.sweep.values if v not in ABLATIONS]
                if bad:
                    problems.append(f"unknown ablation(s) {bad}")
            elif any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in self.sweep.values):
                problems.append(f"{self.sweep.kind} values must be numbers")
            elif self.sweep.kind == "corruption":
                if any(not 0 <= v <= 1 for v in self.sweep.values):
                    problems.append("corruption fractions must lie in [0, 1]")
            elif self.sweep.kind in ("dict_size", "occlusion"):
                if any(int(v) != v or v < 0 for v in self.sweep.values):
                    problems.append(f"{self.sweep.kind} values must be nonnegative integers")
        if self.pca_energy is not None and not 0 < self.pca_energy <= 1:
            problems.append("pca_energy must lie in (0, 1]")
        if self.corruption_mode not in ("uniform", "salt_pepper"):
            problems.append(f"unknown corruption mode '{self.corruption_mode}'")
        if problems:
            raise ConfigError("Invalid experiment config: " + "; ".join(problems))
        return self


@dataclass(frozen=True)
class Config:
    """The rfdl user configuration file uses the YAML format."""

    jobs: int = 1
    """The number of benchmark jobs run in parallel."""

    matrix_format: str = "rawf64"
    """Format of matrices written by `synth` and `predict --embed`: `rawf64` or `csv`."""

    progress: bool = True
    """Show solver progress bars."""

    hyperparams: t.Dict[str, t.Any] = field(default_factory=dict)
    """Hyperparameter overrides applied before any experiment configuration."""


DOCUMENT_ERRORS = (yaml.error.YAMLError, json.JSONDecodeError)


def load_document(file: t.TextIO, path: str) -> t.Any:
    """Parse `file` as JSON if `path` ends in `.json`, otherwise as YAML.

    YAML 1.1 reads exponent floats without a dot (`1e-07`) as strings."""
    if path.lower().endswith(".json"):
        return json.load(file)
    return yaml.safe_load(file)


def read_yaml(path: str, type: t.Type[T]) -> T:
    with open(path) as file:
        data = load_yaml(file, type)
    if not data:
        raise EmptyFileError(path)
    return data


def load_yaml(document: t.Any, type: t.Type[T]) -> t.Optional[T]:
    data: t.Dict[str, t.Any] = yaml.safe_load(document)
    if not data:
        return None
    if not isinstance(data, dict):
        logger.error("Expected a mapping at the top level.")
        raise ExceptionCount(1)

    return dataclass_fromdict(data, type)


def _field_types(field_type: t.Type[t.Any]) -> t.Dict[str, t.Any]:
    hints = t.get_type_hints(field_type)
    return {f.name: hints[f.name] for f in fields(field_type) if f.init}


def dataclass_fromdict(data: t.Dict[str, t.Any], field_type: t.Type[T]) -> T:
    type_fields = _field_types(field_type)
    data = dict(data)
    errors = 0
    for k, v in data.items():
        if k not in type_fields:
            logger.error(f"Unknown key: '{k}'.")
            errors += 1
            continue
        expected = type_fields[k]
        if isinstance(expected, type) and is_dataclass(expected):
            # recursively deserialize objects
            if not isinstance(v, dict):
                logger.error(f"Expected object for key '{k}'.")
                errors += 1
                continue
            try:
                data[k] = dataclass_fromdict(v, expected)
            except ExceptionCount as e:
                errors += e.count
            continue

        # Retrieve type checkable version of generic and special types
        # Only checks base type, so 'List[str]' is only checked as 'list'
        checkable_type = t.get_origin(expected) or expected
        if checkable_type is t.Union:  # Optional type
            checkable_type = tuple(
                t.get_origin(arg) or arg for arg in t.get_args(expected)
            )
        else:
            checkable_type = (checkable_type,)

        # JSON has no separate integer-valued float
        if float in checkable_type and isinstance(v, int) and not isinstance(v, bool):
            data[k] = v = float(v)
        if int in checkable_type and isinstance(v, bool):
            logger.error(f"Invalid value for key '{k}': '{v}'.")
            errors += 1
            continue
        if not isinstance(v, checkable_type):
            logger.error(f"Invalid value for key '{k}': '{v}'.")
            errors += 1
    if errors:
        raise ExceptionCount(errors)

    try:
        return field_type(**data)
    except TypeError:
        import inspect

        required_args = [
            arg
            for arg in inspect.signature(field_type.__init__).parameters.values()
            if arg.default == inspect.Parameter.empty
        ]
        for arg in required_args:
            if arg.name != "self" and arg.name not in data:
                logger.error(f"Missing required key: '{arg.name}'")
                errors += 1
        if errors > 0:
            raise ExceptionCount(errors)
        raise  # In case the error comes from something else


def resolve_hyperparams(method: str, *layers: t.Mapping[str, t.Any]) -> HyperParams:
    """Apply each override layer on top of the method's defaults.

    Later layers take precedence; `None` values are skipped."""
    if method not in METHOD_DEFAULTS:
        raise ConfigError(f"Unknown method '{method}'.")
    merged: t.Dict[str, t.Any] = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    try:
        overrides = dataclass_fromdict(merged, HyperParams)
    except ExceptionCount as e:
        raise ConfigError(f"{e.count} error(s) were encountered in hyperparameters.")
    changed = {k: getattr(overrides, k) for k in merged}
    return replace(METHOD_DEFAULTS[method], **changed).validate()


def load_experiment(path: str) -> ExperimentConfig:
    """Load an experiment config, or the config stored in a run's metadata record."""
    try:
        with open(path) as file:
            data = load_document(file, path)
    except FileNotFoundError:
        raise ConfigError(f"Config file '{path}' does not exist.")
    except DOCUMENT_ERRORS as e:
        raise ConfigError(f"Config file '{path}' could not be parsed: {e}")
    if not isinstance(data, dict) or not data:
        raise ConfigError(f"Config file '{path}' is empty or not a mapping.")
    # metadata records written by each command embed the config they ran with
    if "config" in data and "dataset" not in data:
        data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"Metadata record '{path}' holds no config.")
    base = os.path.dirname(os.path.abspath(path))
    try:
        config = dataclass_fromdict(data, ExperimentConfig)
    except ExceptionCount as e:
        raise ConfigError(f"{e.count} error(s) were encountered while loading config.")
    if not os.path.isabs(config.dataset):
        config = replace(config, dataset=os.path.normpath(os.path.join(base, config.dataset)))
    return config.validate()


def resolve_experiment(
    config_path: t.Optional[str],
    dataset: t.Optional[str],
    user_hyperparams: t.Mapping[str, t.Any],
    overrides: t.Mapping[str, t.Any],
    *,
    method: t.Optional[str] = None,
    split: t.Mapping[str, t.Any] = {},
    pca_energy: t.Optional[float] = None,
    out: t.Optional[str] = None,
) -> t.Tuple[ExperimentConfig, HyperParams]:
    """Merge an optional experiment file with command line values.

    The returned config records the fully resolved hyperparameters and absolute
    paths, so writing it out and loading it again reproduces the run."""
    if config_path:
        experiment = load_experiment(config_path)
    elif dataset:
        experiment = ExperimentConfig(dataset=dataset)
    else:
        raise ConfigError("Either a config file or a dataset is required.")
    if dataset:
        experiment = replace(experiment, dataset=dataset)
    if method:
        experiment = replace(experiment, method=method)
    if pca_energy is not None:
        experiment = replace(experiment, pca_energy=pca_energy)
    split_overrides = {k: v for k, v in split.items() if v is not None}
    if split_overrides:
        experiment = replace(experiment, split=replace(experiment.split, **split_overrides))
    experiment = replace(
        experiment,
        dataset=os.path.abspath(experiment.dataset),
        out=os.path.abspath(out or experiment.out),
    ).validate()

    params = resolve_hyperparams(
        experiment.method, user_hyperparams, experiment.hyperparams, overrides
    )
    return replace(experiment, hyperparams=asdict(params)), params


def config_asdict(config: t.Any) -> t.Dict[str, t.Any]:
    return asdict(config)


class UserInfo:
    _config: t.Optional[Config] = None

    @property
    def config(self) -> Config:
        if not self._config:
            try:
                self._config = read_yaml(CONFIG_FILE, Config)
                logger.debug(f"User config loaded from '{CONFIG_FILE}'.")
            except (FileNotFoundError, EmptyFileError):
                self._config = Config()
            except ExceptionCount as e:
                raise ConfigError(
                    f"{e.count} error(s) were encountered while loading config."
                )
            except yaml.error.YAMLError as e:
                raise ConfigError(str(e))
            if self._config.matrix_format not in MATRIX_FORMATS:
                raise ConfigError(
                    f"Invalid matrix_format '{self._config.matrix_format}' in '{CONFIG_FILE}'."
                )

        return self._config


pass_userinfo = make_pass_decorator(UserInfo, ensure=True)
