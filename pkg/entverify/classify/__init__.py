import click

classify_cli = click.Group("classify", help="Recover unitary error bases from tight schemes.")

from . import commands  # noqa: E402,F401
