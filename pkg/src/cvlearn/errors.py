"""Exception types shared across the package."""


class RejectedInput(ValueError):
    """Input violates an operation's preconditions."""


class UnsupportedVariant(RejectedInput):
    """Operation is not defined for this process variant."""


class Inapplicable(ValueError):
    """A bound was requested outside the hypotheses it was derived under."""
