"""Exception classes; each carries the CLI exit code for its error class."""


class NetHarvestError(Exception):
    exit_code = 1


class ConfigError(NetHarvestError):
    """Invalid configuration value or inconsistent parameter combination."""

    exit_code = 2


class ParseError(NetHarvestError):
    """Malformed input file (edge list, label file, config)."""

    exit_code = 3


class InvalidActionError(NetHarvestError):
    """Probe of a node that is not in the boundary set."""

    exit_code = 4


class EpisodeOverError(NetHarvestError):
    """Probe attempted after the budget was exhausted."""

    exit_code = 4


class GenerationError(NetHarvestError):
    """Instance generation failed (infeasible parameters or placement)."""

    exit_code = 5


class ConvergenceError(NetHarvestError):
    """An iterative solver exceeded its tolerance or iteration cap."""

    exit_code = 6


class ContractError(NetHarvestError):
    """Internal contract violation (shape mismatch, off-policy batch, ...)."""

    exit_code = 7
