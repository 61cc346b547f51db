"""Options and report emission shared by every command."""
import functools
import logging
from typing import List, NamedTuple, Optional

import click

from .config import Config
from .serialization import build_report, dumps, save

logger = logging.getLogger(__name__)


class CommandFamily:
    """Commands declared together and registered flat on the top-level group."""

    def __init__(self, name: str):
        self.name = name
        self.commands: List[click.Command] = []

    def command(self, name: str, **kwargs):
        def decorator(fn):
            cmd = click.command(name, **kwargs)(fn)
            self.commands.append(cmd)
            return cmd

        return decorator

    def register(self, app: click.Group) -> None:
        for cmd in self.commands:
            app.add_command(cmd)
        logger.debug("[CLI] registered %d %s commands", len(self.commands), self.name)


class RunSettings(NamedTuple):
    tol: float
    verdict_tol: float
    seed: int
    renormalize: bool
    output: Optional[str]

    def tolerances(self) -> dict:
        return {"tol": self.tol, "verdict_tol": self.verdict_tol}


def command_options(fn):
    """Add the common flags and pass them to ``fn`` as a RunSettings."""

    @click.option("--tol", type=float, default=None, help="Construction tolerance (operator norm).")
    @click.option("--verdict-tol", type=float, default=None, help="Tolerance applied to verdicts.")
    @click.option("--seed", type=int, default=None, help="Seed for random constructions.")
    @click.option("--renormalize", is_flag=True, help="Renormalize states instead of rejecting them.")
    @click.option("--output", type=click.Path(dir_okay=False), default=None,
                  help="Write the constructed artifact to this JSON file.")
    @click.pass_context
    @functools.wraps(fn)
    def wrapper(ctx, tol, verdict_tol, seed, renormalize, output, **kwargs):
        cfg = ctx.obj or Config
        run = RunSettings(
            cfg.TOL if tol is None else tol,
            cfg.VERDICT_TOL if verdict_tol is None else verdict_tol,
            cfg.SEED if seed is None else seed,
            renormalize,
            output,
        )
        return fn(run, **kwargs)

    return wrapper


def finish(command: str, verdict: Optional[bool], run: RunSettings, residuals=None,
           certificates=None, artifact: Optional[dict] = None) -> None:
    """Print the report, write the artifact and exit 0 (true / n.a.) or 1 (false)."""
    verdict = None if verdict is None else bool(verdict)
    if artifact is not None and run.output:
        save(run.output, artifact)
        logger.info("[CLI] wrote %s", run.output)
    report = build_report(command, verdict, residuals, run.tolerances(), certificates)
    click.echo(dumps(report))
    click.get_current_context().exit(1 if verdict is False else 0)


channel_option = click.option("--channel", "channel_path", required=True,
                              type=click.Path(exists=True, dir_okay=False), help="Channel JSON file.")
state_option = click.option("--state", "state_path", required=True,
                            type=click.Path(exists=True, dir_okay=False), help="Resource state JSON file.")
