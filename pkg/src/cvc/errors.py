"""Exception hierarchy with the exit codes the command line maps them to."""


class CvcError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(CvcError):
    """Invalid configuration or usage (bad parameter values, shapes, modes)."""

    exit_code = 2


class DataError(CvcError):
    """Malformed or unusable input data."""

    exit_code = 3


class FitError(CvcError):
    """A model fit or scoring step failed numerically."""

    exit_code = 4

    def __init__(self, message: str, candidate_id: int | None = None, fold: int | None = None):
        super().__init__(message)
        self.candidate_id = candidate_id
        self.fold = fold


class NoCompetitorsError(ConfigError):
    """A comparison was requested with fewer than two candidates."""


class DegenerateInputError(DataError):
    """Input has no variation where variation is required."""
