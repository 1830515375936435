"""Exception types shared across the package."""

from __future__ import annotations


class SpaceError(ValueError):
    """Raised when input data does not describe a valid metric measure space."""


class PreconditionError(ValueError):
    """Raised when an operation's hypothesis is violated.

    ``hypothesis`` is a short human-readable name of the failed assumption,
    for example ``"density window"``.
    """

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        self.detail = detail
        msg = f"precondition violated: {hypothesis}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
