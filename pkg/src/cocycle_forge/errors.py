"""Exception hierarchy shared by all modules.

Every error carries enough payload to reproduce the failing call; the CLI
maps these onto its exit codes (2 config, 3 infeasible, 4 broken contract).
"""


class CocycleForgeError(Exception):
    """Base class for all library errors."""


class InvalidInputError(CocycleForgeError, ValueError):
    """Non-finite entries, out-of-range parameters, malformed data."""


class InvalidBaseError(CocycleForgeError):
    """Base system unusable for the requested operation (e.g. short cycles)."""


class NotInOmegaError(CocycleForgeError):
    """Point's orbit never meets the target set."""


class PreconditionError(CocycleForgeError):
    """A documented precondition failed; carries the measured quantity."""

    def __init__(self, message, **measured):
        super().__init__(message)
        self.measured = dict(measured)


class NoSplittingError(CocycleForgeError):
    """No expanding/contracting splitting exists at the point (zero exponent)."""


class WrongCaseError(PreconditionError):
    """A plan builder was invoked outside its case hypothesis."""


class PlanBudgetError(CocycleForgeError):
    """A constructed plan entry would exceed the allowed perturbation size."""


class NTooSmallError(CocycleForgeError):
    """Plan length too small for a verified small-norm splice; retry larger."""

    def __init__(self, message, n=None):
        super().__init__(message)
        self.n = n


class PipelineInfeasibleError(CocycleForgeError):
    """No admissible castle parameters below the configured caps."""

    def __init__(self, message, ph_curve=None):
        super().__init__(message)
        self.ph_curve = ph_curve or []


class InternalContractError(CocycleForgeError, RuntimeError):
    """An invariant that should be unbreakable was violated; indicates a bug."""
