"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: usage errors exit 1,
DomainError (and subclasses) exit 2, SolverError exits 3.
"""


class RidgelabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RidgelabError, ValueError):
    """A requested evaluation point lies outside the admissible domain.

    Carries ``c0_effective`` when the violation is a regularizer value at or
    below the negative-ridge boundary, so callers can report how far the
    admissible interval extends.
    """

    def __init__(self, message: str, c0_effective: float | None = None):
        super().__init__(message)
        self.c0_effective = c0_effective


class RegimeError(DomainError):
    """The parameter regime itself is unsupported (not just one point).

    Examples: an overparameterization ratio of exactly 1 where the optimum
    may sit at the boundary of the admissible set, or a truncation level
    that puts the retained dimension ratio at or below 1.
    """


class SolverError(RidgelabError, RuntimeError):
    """An iterative solve failed to bracket or converge.

    ``diagnostics`` holds a dict of the bracket endpoints, iteration count,
    and last residual seen, for error reports and bug filing.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
