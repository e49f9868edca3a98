import logging
import os
import sys
import typing as t

import click

from rfdl.baseUtils import partition
from rfdl.errors import RfdlError

logger = logging.getLogger(__name__)

T = t.TypeVar("T")


class ParamTypeG(click.ParamType, t.Generic[T]):
    def convert(
        self,
        value: t.Union[str, T],
        param: t.Optional[click.Parameter],
        ctx: t.Optional[click.Context],
    ) -> T:
        return super().convert(value, param, ctx)


class Geometry(ParamTypeG[t.Tuple[int, int]]):
    """Image geometry given as `HEIGHTxWIDTH`."""

    name = "geometry"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            height, width = (int(part) for part in str(value).lower().split("x"))
        except ValueError:
            self.fail(f"'{value}' is not of the form HEIGHTxWIDTH.", param, ctx)
        if height < 1 or width < 1:
            self.fail("Image height and width must be positive.", param, ctx)
        return height, width


class SweepValue(ParamTypeG[t.Union[int, float, str]]):
    """A sweep value: an integer, a float, or a bare word such as `alpha0`."""

    name = "value"

    def convert(self, value, param, ctx):
        if not isinstance(value, str):
            return value
        for cast in (int, float):
            try:
                return cast(value)
            except ValueError:
                pass
        return value


loglevel_flags = {
    "--debug": logging.DEBUG,
    "--quiet": logging.ERROR,
}


class CatchErrorsGroup(click.Group):
    def main(self, args=None, *params, **extra):
        if args is None:
            args = sys.argv[1:]
        logflags, args = partition(lambda arg: arg in loglevel_flags, list(args))

        module_logger = logging.getLogger("rfdl")
        debug = "--debug" in logflags or os.getenv("RFDL_DEBUG", "").lower() in (
            "true",
            "yes",
            "1",
        )
        if logflags:
            module_logger.setLevel(loglevel_flags[logflags[-1]])
        elif debug:
            module_logger.setLevel(logging.DEBUG)
        else:
            module_logger.setLevel(logging.INFO)

        try:
            return super().main(args, *params, **extra)
        except RfdlError as e:
            if debug:
                logger.exception(str(e))
            else:
                logger.error(str(e))
            sys.exit(e.exit_code)
        except Exception as e:
            if debug:
                logger.exception("An unhandled exception has occurred:")
            else:
                logger.error(
                    "An unhandled exception has occurred:\n  "
                    + click.style(repr(e), "red")
                )
                logger.error(
                    "Use the --debug flag to disable clean exception handling."
                )
            sys.exit(1)


def _apply(f, options):
    for option in reversed(options):
        f = option(f)
    return f


def hyperparam_options(f):
    """Options overriding the method and individual hyperparameters."""
    return _apply(
        f,
        [
            click.option(
                "--method",
                type=click.Choice(["jrfdl", "djrfdl", "cf_baseline"]),
                help="Training method.",
            ),
            click.option(
                "--alpha",
                type=click.FloatRange(min=0),
                help="Weight of the dictionary reconstruction and V sparsity terms.",
            ),
            click.option(
                "--beta",
                type=click.FloatRange(min=0),
                help="Weight of the classification terms.",
            ),
            click.option(
                "--gamma",
                type=click.FloatRange(min=0),
                help="Weight of the nuclear and L1 norms of the coefficients.",
            ),
            click.option(
                "--dict-size",
                type=click.IntRange(min=1),
                help="Number of dictionary atoms K.",
            ),
            click.option(
                "--rank",
                "factor_rank",
                type=click.IntRange(min=1),
                help="Rank r of the concept factorization.",
            ),
            click.option(
                "--max-iter",
                type=click.IntRange(min=1),
                help="Maximum number of solver iterations.",
            ),
            click.option(
                "--eps",
                type=click.FloatRange(min=0, min_open=True),
                help="Stopping tolerance on the constraint residuals.",
            ),
            click.option(
                "--seed",
                type=click.IntRange(min=0),
                help="Seed of the solver initialization.",
            ),
        ],
    )


def split_options(f):
    """Options selecting the train/test protocol."""
    return _apply(
        f,
        [
            click.option(
                "--train-per-class",
                type=click.IntRange(min=1),
                help="Number of training samples per class.",
            ),
            click.option(
                "--split-seed",
                type=click.IntRange(min=0),
                help="Seed of the per-class split.",
            ),
            click.option(
                "--pca-energy",
                type=click.FloatRange(min=0, max=1, min_open=True),
                help="Reduce the data with PCA keeping this fraction of the energy.",
            ),
        ],
    )


HYPERPARAM_OPTIONS = (
    "alpha",
    "beta",
    "gamma",
    "dict_size",
    "factor_rank",
    "max_iter",
    "eps",
    "seed",
)
