import click

ueb_cli = click.Group("ueb", help="Generate and check unitary error bases.")

from . import commands  # noqa: E402,F401
