from ..reporting import CommandFamily

# Predicates on channels and resource states
verify_cli = CommandFamily("verify")

from . import commands  # noqa: E402,F401
