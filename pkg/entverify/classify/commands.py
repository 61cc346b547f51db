from . import classify_cli
from ..reporting import channel_option, command_options, finish, state_option
from ..serialization import classification_to_dict, load
from ..services.ueb import classify_tight_dense_coding, classify_tight_teleportation


def _run(name, classifier, run, channel_path, state_path):
    c = load(channel_path, "channel")
    w = load(state_path, "state", renormalize=run.renormalize)
    result = classifier(c, w, tol=run.tol, verdict_tol=run.verdict_tol)
    payload = classification_to_dict(result)
    finish(name, result.accepted, run, residuals=result.residuals, certificates=payload,
           artifact=payload.get("ueb"))


@classify_cli.command("tight-teleportation")
@channel_option
@state_option
@command_options
def tight_teleportation(run, channel_path, state_path):
    """Recover the error basis behind a tight teleportation scheme."""
    _run("classify tight-teleportation", classify_tight_teleportation, run, channel_path, state_path)


@classify_cli.command("tight-dense-coding")
@channel_option
@state_option
@command_options
def tight_dense_coding(run, channel_path, state_path):
    """Recover the error basis behind a tight dense coding scheme."""
    _run("classify tight-dense-coding", classify_tight_dense_coding, run, channel_path, state_path)
