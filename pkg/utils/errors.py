class SeqMatchError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SeqMatchError, ValueError):
    """Shapes or index ranges do not line up (alphabet sizes, database indices)."""


class DomainError(SeqMatchError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModelError(SeqMatchError, ValueError):
    """A source model violates the membership class its truth requires."""


class ConfigError(SeqMatchError, ValueError):
    """An experiment configuration cannot be parsed or fails validation."""


class TruncatedRunError(SeqMatchError, RuntimeError):
    """
    A sequential run hit its max_steps safety valve before stopping.

    This is not a statistical outcome. The partial state is kept so callers can
    report it as truncated instead of counting it as an error or a success.

    Args:
        steps (int): Last time index that was evaluated.
        max_steps (int): The valve that fired.
        trace (list[float] | None): Recorded statistic trace, if any.
    """

    def __init__(self, steps: int, max_steps: int, trace=None) -> None:
        super().__init__(f"Sequential run truncated at n={steps} (max_steps={max_steps})")
        self.steps = steps
        self.max_steps = max_steps
        self.trace = trace
