"""Seeded 64-bit PRNG (SplitMix64) driving every random draw in the simulator.

The generator is specified exactly so independent implementations agree:
state advances by the fixed odd constant 0x9E3779B97F4A7C15 per draw, and the
output is two xor-shift-multiply rounds plus a final xor-shift, all mod 2^64:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

Reference stream for seed 0: 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
0x06C45D188009454F.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MUL1) & _MASK
        z = ((z ^ (z >> 27)) * _MUL2) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def next_below(self, bound: int) -> int:
        """Unbiased draw in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive: {bound}")
        limit = (_MASK + 1) - ((_MASK + 1) % bound)
        while True:
            value = self.next_u64()
            if value < limit:
                return value % bound

    def next_int(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_below(hi - lo + 1)
