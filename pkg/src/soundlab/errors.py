"""Exception types shared across the package."""


class SoundlabError(Exception):
    """Base class for all package errors."""


class BudgetExceededError(SoundlabError):
    """A tree walk grew past its configured node budget."""


class MissingStrategyError(SoundlabError):
    """A strategy table has no entry for an information state that was reached."""


class NonConvergenceError(SoundlabError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class NondeterminismError(SoundlabError):
    """An exact computation was requested for an algorithm whose initial-state
    distribution cannot be enumerated."""


class QueryOrderError(SoundlabError):
    """A tabularization query order is not a valid ancestor-first permutation."""


class NumericalUnderflowError(SoundlabError):
    """A sampling importance weight fell below the configured floor."""
