"""Deterministic pseudo-random generator shared by PRM sampling and marker generation.

The generator is a 64-bit linear congruential generator:

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64

``next_u32`` returns the high 32 bits of the new state, ``below(n)`` returns
``next_u32() % n`` and ``random()`` returns ``next_u32() / 2**32``. The seed is
the initial state (reduced mod 2**64). Any reimplementation following these
three lines reproduces the same sample streams bit for bit.
"""

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
MASK = (1 << 64) - 1


class Lcg:
    """64-bit linear congruential generator."""

    def __init__(self, seed: int):
        self.state = seed & MASK

    def next_u32(self) -> int:
        self.state = (MULTIPLIER * self.state + INCREMENT) & MASK
        return self.state >> 32

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return self.next_u32() % n

    def random(self) -> float:
        return self.next_u32() / 4294967296.0
