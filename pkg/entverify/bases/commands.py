import click

from . import ueb_cli
from ..reporting import command_options, finish
from ..serialization import read_json, ueb_elements_from_dict, ueb_to_dict
from ..services.ueb import is_ueb, random_ueb, weyl_basis


@ueb_cli.command("gen")
@click.option("--dim", "d", type=click.IntRange(min=1), required=True, help="Hilbert space dimension d.")
@click.option("--random", "randomize", is_flag=True, help="Twist the Weyl basis with random unitaries and phases.")
@command_options
def gen(run, d, randomize):
    """Write a Weyl (or randomly twisted Weyl) unitary error basis."""
    u = random_ueb(d, seed=run.seed) if randomize else weyl_basis(d)
    report = is_ueb(list(u), tol=run.tol)
    doc = ueb_to_dict(u)
    finish(
        "ueb gen",
        None,
        run,
        residuals={
            "unitarity": report.unitarity_residual,
            "orthogonality": report.orthogonality_residual,
        },
        certificates={"ueb": doc},
        artifact=doc,
    )


@ueb_cli.command("check")
@click.option("--ueb", "ueb_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="UEB JSON file.")
@command_options
def check(run, ueb_path):
    """Unitarity, trace orthogonality and cardinality of a candidate basis."""
    elements = ueb_elements_from_dict(read_json(ueb_path))
    report = is_ueb(elements, tol=run.tol)
    finish(
        "ueb check",
        report.verdict,
        run,
        residuals={
            "unitarity": report.unitarity_residual,
            "orthogonality": report.orthogonality_residual,
        },
        certificates={"count": report.count, "count_ok": report.count_ok, "d": report.d},
    )
