import click

from . import construct_cli
from ..errors import InvalidBijectionError
from ..reporting import channel_option, command_options, finish
from ..serialization import channel_to_dict, dilation_to_dict, load, reversibility_to_dict
from ..services.algebra import MultimatrixAlgebra, canonical_max_entangled
from ..services.channel import choi_distance, dilation_to_channel, minimal_dilation
from ..services.schemes import (
    as_quantum_bijection,
    check_entanglement_pair,
    construct_qbij,
    entanglement_inverse_maxent,
    entanglement_left_inverse,
    is_entanglement_reversible,
)


def _factors(ctx, param, value):
    try:
        factors = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma-separated factor dimensions, e.g. 1,2")
    if not factors or any(d < 1 for d in factors):
        raise click.BadParameter("factor dimensions must be positive")
    return MultimatrixAlgebra(factors)


@construct_cli.command("dilate")
@channel_option
@command_options
def dilate(run, channel_path):
    """Minimal dilation of a CP map."""
    c = load(channel_path, "channel")
    d = minimal_dilation(c)
    residuals = {"reconstruction": choi_distance(dilation_to_channel(d), c)}
    finish("dilate", None, run, residuals=residuals,
           certificates={"env_dims": [list(r) for r in d.env_dims]},
           artifact=dilation_to_dict(d))


@construct_cli.command("invert")
@channel_option
@click.option("--state", "state_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Pure resource state; defaults to the canonical maximally entangled state.")
@command_options
def invert(run, channel_path, state_path):
    """Entanglement inverse (or left inverse for a given pure state)."""
    c = load(channel_path, "channel")
    if state_path is None:
        try:
            q = as_quantum_bijection(c, tol=run.verdict_tol)
        except InvalidBijectionError as exc:
            finish("invert", False, run, certificates={"reason": str(exc)})
            return
        n = entanglement_inverse_maxent(q)
        w = canonical_max_entangled(q.aux)
        oracle = check_entanglement_pair(q.channel, n, w)
        certificates = {}
    else:
        w = load(state_path, "state", renormalize=run.renormalize)
        verdict, cert = is_entanglement_reversible(c, w, tol=run.tol, verdict_tol=run.verdict_tol)
        if not verdict:
            finish("invert", False, run, residuals={"solve": cert.solve_residual},
                   certificates={"reversibility": reversibility_to_dict(cert)})
            return
        n = entanglement_left_inverse(c, w, cert)
        oracle = check_entanglement_pair(c, n, w)
        certificates = {"reversibility": reversibility_to_dict(cert)}
    residuals = {"oracle_left": oracle.left, "oracle_right": oracle.right}
    certificates["inverse"] = channel_to_dict(n)
    finish("invert", oracle.left < run.verdict_tol, run, residuals=residuals,
           certificates=certificates, artifact=channel_to_dict(n))


@construct_cli.command("construct-qbij")
@click.option("--source", "source", required=True, callback=_factors, help="Source factors, e.g. 1,2.")
@click.option("--target", "target", required=True, callback=_factors, help="Target factors, e.g. 1,1,1,1,1.")
@command_options
def construct(run, source, target):
    """A quantum bijection between algebras of equal dimension."""
    q = construct_qbij(source, target)
    residuals = {
        "isometry_1": q.report.isometry_residuals[0],
        "isometry_2": q.report.isometry_residuals[1],
        "coisometry_1": q.report.coisometry_residuals[0],
        "coisometry_2": q.report.coisometry_residuals[1],
    }
    finish("construct-qbij", None, run, residuals=residuals,
           certificates={"aux_dim": q.channel.aux_dim, "env_dims": [list(r) for r in q.dilation.env_dims]},
           artifact=channel_to_dict(q.channel))
