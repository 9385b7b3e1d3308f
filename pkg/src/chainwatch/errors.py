"""Exception types shared across the engine."""


class ChainwatchError(Exception):
    """Base class for all engine errors."""


class DescriptorError(ChainwatchError):
    """Model descriptor violates a structural invariant (cycle, unknown name, bad shape)."""


class UnknownRunError(ChainwatchError):
    def __init__(self, run_id: str):
        super().__init__(f"unknown run {run_id!r}")
        self.run_id = run_id


class RunFinishedError(ChainwatchError):
    """Append or finish attempted on a run that is no longer running."""


class ContiguityError(ChainwatchError):
    """Batch does not start at the next expected iteration for its (chain, phase)."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"expected first_iteration {expected}, got {got}")
        self.expected = expected
        self.got = got


class BatchError(ChainwatchError):
    """Batch payload is malformed (shape mismatch, unknown variable, bad values)."""


class NotEnoughData(ChainwatchError):
    """Diagnostic requested on a series shorter than the operation's minimum."""
