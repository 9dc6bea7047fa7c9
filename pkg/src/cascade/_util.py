"""Small internal numeric helpers."""

from __future__ import annotations


class NeumaierSum:
    """Compensated running sum; deterministic and accurate to ~1 ulp of the exact sum."""

    def __init__(self, value: float = 0.0):
        self._sum = value
        self._comp = 0.0

    def add(self, x: float) -> None:
        t = self._sum + x
        if abs(self._sum) >= abs(x):
            self._comp += (self._sum - t) + x
        else:
            self._comp += (x - t) + self._sum
        self._sum = t

    @property
    def value(self) -> float:
        return self._sum + self._comp
