"""Error types shared across the package.

DomainError maps to CLI exit code 2 (bad input), SizeCapError to exit
code 3 (refused: instance too large for the requested computation).
"""


class DomainError(ValueError):
    """Invalid argument: out of domain, malformed, or inconsistent."""


class SizeCapError(RuntimeError):
    """Instance exceeds an explicit size cap for this operation."""
