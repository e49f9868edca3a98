from importlib.metadata import PackageNotFoundError
from importlib.metadata import version

import click

from rfdl.rfdl import cli

try:
    # Override built in version detection to fix issues when running as __main__
    click.version_option(version=version("rfdl"), package_name="rfdl")(cli)
except PackageNotFoundError:
    pass

cli()
