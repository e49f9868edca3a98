"""Terminal output: progress bars, level-prefixed log lines and timing."""
import logging
import sys
import time
import typing as t
from logging import LogRecord

import click
from tqdm import tqdm

logger = logging.getLogger(__name__)

PACKAGE_LOGGER = "rfdl"


def progress_bar(
    total: int, desc: str, *, enabled: bool = True, unit: str = "it", delay: float = 0.0
) -> tqdm:
    """A stderr progress bar, shown only while INFO messages are.

    Finished bars stay on screen in debug mode, so they line up with the
    per-iteration messages."""
    package = logging.getLogger(PACKAGE_LOGGER)
    return tqdm(
        total=total,
        desc=desc,
        unit=unit,
        delay=delay,
        file=sys.stderr,
        # None lets tqdm hide bars on anything but a terminal
        disable=None if enabled and package.isEnabledFor(logging.INFO) else True,
        leave=package.isEnabledFor(logging.DEBUG),
    )


class Stopwatch:
    """Accumulates wall time over repeated `with` blocks."""

    def __init__(self) -> None:
        self.elapsed = 0.0
        self._start: t.Optional[float] = None

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc_details):
        assert self._start is not None
        self.elapsed += time.perf_counter() - self._start
        self._start = None


LEVEL_COLORS = {
    logging.CRITICAL: "red",
    logging.ERROR: "red",
    logging.WARNING: "yellow",
    logging.DEBUG: "blue",
}


class LevelFormatter(logging.Formatter):
    """`warning: message`, with the emitting module added in debug mode
    (`debug[solver]: iter 3 ...`). Plain INFO lines carry no prefix."""

    def formatMessage(self, record: LogRecord) -> str:
        debugging = logging.getLogger(PACKAGE_LOGGER).isEnabledFor(logging.DEBUG)
        if record.levelno == logging.INFO and not debugging:
            return record.getMessage()

        prefix = record.levelname.lower()
        if debugging:
            module = record.name.rpartition(".")[2]
            prefix += f"[{module}]"
        prefix = click.style(
            prefix + ": ",
            fg=LEVEL_COLORS.get(record.levelno),
            bold=record.levelno >= logging.CRITICAL,
        )
        return "\n".join(prefix + line for line in record.getMessage().splitlines())

    def formatException(self, ei) -> str:
        text = super().formatException(ei)
        trace, _, last = text.rpartition("\n")
        return trace + "\n" + click.style(last, fg="red")


class EchoHandler(logging.Handler):
    """Writes records to stderr without tearing an active progress bar."""

    def emit(self, record: LogRecord) -> None:
        try:
            with tqdm.external_write_mode(sys.stderr):
                click.echo(self.format(record), err=True)
        except Exception:
            self.handleError(record)


def install_handler(root: logging.Logger) -> None:
    """Attach a single :class:`EchoHandler` to `root`."""
    if any(isinstance(h, EchoHandler) for h in root.handlers):
        return
    handler = EchoHandler()
    handler.setFormatter(LevelFormatter())
    root.addHandler(handler)
    # records would otherwise print twice through the root logger
    root.propagate = False
