import click

from . import verify_cli
from ..reporting import channel_option, command_options, finish, state_option
from ..serialization import (
    channel_to_dict,
    load,
    reversibility_to_dict,
)
from ..services.channel import is_cp, is_trace_preserving, minimal_dilation, to_convention
from ..services.schemes import (
    biunitarity,
    check_qbij_equations,
    is_entanglement_invertible,
    is_entanglement_reversible,
)


@verify_cli.command("check-cp")
@channel_option
@command_options
def check_cp(run, channel_path):
    """Choi positivity of every block."""
    c = load(channel_path, "channel", check_cp=False)
    report = is_cp(c)
    certificates = {
        "min_eigenvalues": [
            {"i": i, "j": j, "value": value} for (i, j), value in sorted(report.min_eigenvalues.items())
        ],
        "worst_block": list(report.worst_block),
    }
    finish(
        "check-cp",
        report.verdict,
        run,
        residuals={"negativity": max(0.0, -report.worst_eigenvalue)},
        certificates=certificates,
    )


@verify_cli.command("check-tp")
@channel_option
@click.option("--convention", type=click.Choice(["matrix", "special"]), default=None,
              help="Trace convention to test (defaults to the file's).")
@command_options
def check_tp(run, channel_path, convention):
    """Trace preservation under the matrix or special trace."""
    c = load(channel_path, "channel", check_cp=False)
    report = is_trace_preserving(c, convention=convention, tol=run.tol)
    finish(
        "check-tp",
        report.verdict,
        run,
        residuals={"trace": report.residual, "isometry": report.isometry_residual},
        certificates={"convention": report.convention, "factor_residuals": list(report.factor_residuals)},
    )


@verify_cli.command("check-qbij")
@channel_option
@command_options
def check_qbij(run, channel_path):
    """Biunitarity of the minimal dilation, cross-checked by the defining equations."""
    c = to_convention(load(channel_path, "channel"), "matrix")
    d = minimal_dilation(c)
    report = biunitarity(d, tol=run.verdict_tol)
    equations = check_qbij_equations(d, tol=run.verdict_tol)
    residuals = {
        "isometry_1": report.isometry_residuals[0],
        "isometry_2": report.isometry_residuals[1],
        "coisometry_1": report.coisometry_residuals[0],
        "coisometry_2": report.coisometry_residuals[1],
        "multiplication": equations.multiplication,
        "comultiplication": equations.comultiplication,
        "unit": equations.unit,
        "channel": equations.channel,
    }
    finish(
        "check-qbij",
        report.verdict,
        run,
        residuals=residuals,
        certificates={"equations_verdict": equations.verdict, "env_dims": [list(r) for r in d.env_dims]},
    )


@verify_cli.command("check-entrev")
@channel_option
@state_option
@command_options
def check_entrev(run, channel_path, state_path):
    """Entanglement-reversibility with respect to a pure or mixed state."""
    c = load(channel_path, "channel")
    w = load(state_path, "state", renormalize=run.renormalize)
    verdict, cert = is_entanglement_reversible(c, w, tol=run.tol, verdict_tol=run.verdict_tol)
    residuals = {
        "solve": cert.solve_residual,
        "isometry_a": cert.isometry_residuals[0],
        "isometry_b": cert.isometry_residuals[1],
        "coisometry_a": cert.coisometry_residuals[0],
        "coisometry_b": cert.coisometry_residuals[1],
    }
    finish("check-entrev", verdict, run, residuals=residuals,
           certificates={"reversibility": reversibility_to_dict(cert)})


@verify_cli.command("check-entinv")
@channel_option
@state_option
@command_options
def check_entinv(run, channel_path, state_path):
    """Entanglement-invertibility; --output writes the inverse when it exists."""
    c = load(channel_path, "channel")
    w = load(state_path, "state", renormalize=run.renormalize)
    evidence = is_entanglement_invertible(c, w, tol=run.tol, verdict_tol=run.verdict_tol)
    residuals = {
        "oracle_left": evidence.oracle.left,
        "oracle_right": evidence.oracle.right,
        "solve": evidence.reversibility.solve_residual,
    }
    if evidence.biunitarity is not None:
        residuals["biunitarity"] = max(
            evidence.biunitarity.isometry_residuals + evidence.biunitarity.coisometry_residuals
        )
    if evidence.intertwiner is not None:
        residuals["intertwiner"] = evidence.intertwiner.residual
    certificates = {
        "kind": evidence.kind,
        "oracle_agrees": evidence.oracle_agrees,
        "reversibility": reversibility_to_dict(evidence.reversibility),
    }
    inverse = evidence.inverse
    if inverse is not None:
        certificates["inverse"] = channel_to_dict(inverse)
    finish("check-entinv", evidence.verdict, run, residuals=residuals, certificates=certificates,
           artifact=None if inverse is None else channel_to_dict(inverse))
