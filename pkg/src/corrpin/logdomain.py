"""Log-domain scalars and the tagged infinite value.

All partition-function arithmetic in this package is carried out on
logarithms; a ``LogWeight`` wraps one such logarithm and implements
addition as a max-shifted log-sum-exp, so that sums of astronomically
large or small nonnegative quantities never overflow.  ``-inf`` encodes
an exact zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class Infinite:
    """Tag for an infinite mean gap; never a float sentinel."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"


#: Singleton returned by operations whose result diverges (e.g. the mean
#: gap of a heavy-tailed interarrival law).  Test with ``x is INFINITE``.
INFINITE = Infinite()


def is_infinite(x) -> bool:
    return x is INFINITE


@dataclass(frozen=True, order=True)
class LogWeight:
    """A nonnegative scalar stored as its natural logarithm."""

    log: float

    @classmethod
    def from_log(cls, value: float) -> LogWeight:
        return cls(float(value))

    @classmethod
    def from_linear(cls, value: float) -> LogWeight:
        if value < 0:
            raise ValueError(f"LogWeight requires a nonnegative value, got {value}")
        return cls(math.log(value) if value > 0 else -math.inf)

    @classmethod
    def zero(cls) -> LogWeight:
        return cls(-math.inf)

    @classmethod
    def one(cls) -> LogWeight:
        return cls(0.0)

    def __add__(self, other: LogWeight) -> LogWeight:
        a, b = self.log, other.log
        if a == -math.inf:
            return other
        if b == -math.inf:
            return self
        m = max(a, b)
        return LogWeight(m + math.log(math.exp(a - m) + math.exp(b - m)))

    def __mul__(self, other: LogWeight) -> LogWeight:
        return LogWeight(self.log + other.log)

    def __truediv__(self, other: LogWeight) -> LogWeight:
        if other.log == -math.inf:
            raise ZeroDivisionError("division by a zero LogWeight")
        return LogWeight(self.log - other.log)

    def exp(self) -> float:
        """Exponentiate for final reporting only."""
        return math.exp(self.log)

    def is_zero(self) -> bool:
        return self.log == -math.inf
