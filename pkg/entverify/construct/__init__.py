from ..reporting import CommandFamily

# Dilations, inverses and quantum bijections
construct_cli = CommandFamily("construct")

from . import commands  # noqa: E402,F401
