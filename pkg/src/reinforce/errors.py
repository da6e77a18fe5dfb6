"""Exception hierarchy shared by every module of the package."""


class ReinforceError(Exception):
    """Base class; the CLI maps it to exit code 2."""


class InvalidArgument(ReinforceError, ValueError):
    pass


class ParseError(ReinforceError, ValueError):
    """Malformed input file. The message names the offending field."""


class InvalidPartition(ReinforceError, ValueError):
    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


class ContractError(ReinforceError, RuntimeError):
    """A scheduling algorithm or adversary broke its behavioral contract."""
