"""Error type shared across the package.

Every failure mode that callers may want to branch on carries a stable
string code (e.g. ``NON_POSITIVE_SPACING``, ``NO_CONVERGENCE``) so that
tests and the CLI can match on the code instead of the message text.
"""

from __future__ import annotations


class FbpError(Exception):
    """Exception with a stable machine-readable code.

    Parameters
    ----------
    code : str
        Upper-snake-case identifier of the failure mode.
    message : str
        Human-readable detail.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.detail = message


def require(condition: bool, code: str, message: str) -> None:
    """Raise FbpError(code, message) unless condition holds."""
    if not condition:
        raise FbpError(code, message)
