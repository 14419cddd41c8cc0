"""Exception hierarchy for mavlab."""


class MavlabError(Exception):
    """Base class for all mavlab errors."""


class InvalidInputError(MavlabError, ValueError):
    """An argument is outside the domain of the operation."""


class InvalidPriceError(InvalidInputError):
    """A price (or encoded price) is zero, negative or not finite."""


class ReserveDepletionError(InvalidInputError):
    """A swap would remove the entire reserve of a token from a pool."""


class PartialFillError(MavlabError):
    """Concentrated liquidity ran out before the requested amount was filled.

    The filled base amount, the quote amount exchanged for it and the pool
    state at the last reachable price are carried on the exception.
    """

    def __init__(self, message, filled, amount_out, pool):
        super().__init__(message)
        self.filled = filled
        self.amount_out = amount_out
        self.pool = pool


class ModelContractError(MavlabError):
    """A success-probability model returned a value outside [0, 1]."""


class SchemaError(MavlabError):
    """An input file does not follow the expected columns or field types."""


class IntegrityError(MavlabError):
    """An input file parses but violates ordering or uniqueness rules."""


class EmptySeriesError(MavlabError):
    """AMM and CEX data have no usable overlap."""


class InsufficientDataError(MavlabError):
    """Too few observations for a statistic."""
