import logging

import click

from .config import Config
from .errors import EntVerifyError
from .verify import verify_cli
from .construct import construct_cli
from .bases import ueb_cli
from .classify import classify_cli

__version__ = "0.1.0"


class EntVerifyGroup(click.Group):
    """Top-level group mapping library errors to exit code 2."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except EntVerifyError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(2)


def _configure_logging(level: str) -> None:
    logger = logging.getLogger("entverify")
    logger.setLevel(level.upper())
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)


def create_app(config_class=Config):
    app = EntVerifyGroup(
        "entverify",
        help="Verify and construct entanglement-reversible channels between multimatrix algebras.",
        context_settings={"obj": config_class},
    )
    _configure_logging(config_class.LOG_LEVEL)

    # Flat command families
    for family in (verify_cli, construct_cli):
        family.register(app)

    # Nested groups
    app.add_command(ueb_cli)
    app.add_command(classify_cli)

    app = click.version_option(__version__, prog_name="entverify")(app)
    return app
