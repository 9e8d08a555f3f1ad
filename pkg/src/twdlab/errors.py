"""Exception hierarchy shared by every twdlab module.

Each error carries a machine-readable payload so the command line front end
can report failures as JSON on stderr.
"""

from __future__ import annotations


class TwdLabError(Exception):
    """Base class for all domain errors."""

    def payload(self) -> dict:
        return {}

    def to_json(self) -> dict:
        return {"error": type(self).__name__, "message": str(self), **self.payload()}


class InvalidRSpec(TwdLabError):
    def __init__(self, k: int, value):
        super().__init__(f"r({k}) = {value!r} is not a positive integer")
        self.k = k
        self.value = value

    def payload(self):
        return {"k": self.k, "value": self.value}


class NotMetaFib(TwdLabError):
    """Backward partial sums jump over n_k: no r(k) reproduces it."""

    def __init__(self, k: int, undershoot: int, overshoot: int):
        super().__init__(
            f"n_{k} is skipped by the backward partial sums ({undershoot} then {overshoot})"
        )
        self.k = k
        self.undershoot = undershoot
        self.overshoot = overshoot

    def payload(self):
        return {"k": self.k, "undershoot": self.undershoot, "overshoot": self.overshoot}


class PreconditionFailed(TwdLabError):
    def __init__(self, what: str, witness=None):
        super().__init__(what if witness is None else f"{what} (witness: {witness})")
        self.what = what
        self.witness = witness

    def payload(self):
        return {"witness": self.witness}


class AddressOutOfRange(TwdLabError):
    pass


class UnsupportedModel(TwdLabError):
    pass


class NoReturnWithin(TwdLabError):
    def __init__(self, level: int, n_max: int):
        super().__init__(f"vertex at level {level} does not return within {n_max} iterates")
        self.level = level
        self.n_max = n_max

    def payload(self):
        return {"level": self.level, "n_max": self.n_max}


class BudgetExhausted(TwdLabError):
    """A search budget ran out before the chain reached the requested index.

    ``partial`` holds whatever was computed before the budget ran out.
    """

    def __init__(self, k: int, reason: str, partial=None):
        super().__init__(f"budget exhausted while searching for index k={k}: {reason}")
        self.k = k
        self.reason = reason
        self.partial = partial

    def payload(self):
        return {"k": self.k, "reason": self.reason}


class NoSuchLevel(TwdLabError):
    def __init__(self, k: int, target: int, scanned: int):
        super().__init__(f"no level up to {scanned} first-returns onto level {target} (k={k})")
        self.k = k
        self.target = target
        self.scanned = scanned

    def payload(self):
        return {"k": self.k, "target": self.target, "scanned": self.scanned}


class Inconclusive(TwdLabError):
    pass


class UnresolvableExceptional(TwdLabError):
    def __init__(self, piece, reason: str):
        super().__init__(f"cannot resolve induced image of exceptional piece {piece!r}: {reason}")
        self.piece = piece

    def payload(self):
        return {"piece": self.piece}


class InvalidPuzzle(TwdLabError):
    pass


class InvalidSeed(TwdLabError):
    pass


class AmbiguousPullback(TwdLabError):
    def __init__(self, cls, groupings):
        super().__init__(f"{len(groupings)} valid pullback groupings for class {cls}")
        self.cls = cls
        self.groupings = groupings

    def payload(self):
        return {
            "class": [str(a) for a in self.cls],
            "groupings": [[[str(a) for a in g] for g in pair] for pair in self.groupings],
        }


class NoValidGrouping(TwdLabError):
    def __init__(self, cls):
        super().__init__(f"no valid pullback grouping for class {cls}")
        self.cls = cls

    def payload(self):
        return {"class": [str(a) for a in self.cls]}


class InconsistentImage(TwdLabError):
    pass


class NonUniqueCritical(TwdLabError):
    pass
