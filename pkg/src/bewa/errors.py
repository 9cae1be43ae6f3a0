"""Exception hierarchy shared across the engine."""


class BewaError(Exception):
    """Base class for all engine errors."""


class UnknownClaim(BewaError, KeyError):
    def __init__(self, ccs: str) -> None:
        super().__init__(ccs)
        self.ccs = ccs

    def __str__(self) -> str:
        return f"unknown claim {self.ccs}"
