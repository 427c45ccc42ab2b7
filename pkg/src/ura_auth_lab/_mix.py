"""Counter-based pseudorandom words built on the splitmix64 finalizer.

Every random quantity in a simulation is a pure function of
``(seed, trial, purpose, index)``, so trials can be evaluated in any order,
in any process, and always yield the same bits.  Scalar helpers work on
Python ints; the ``*_np`` variants broadcast over uint64 arrays and must
agree with the scalar ones bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
TWO_M53 = 2.0**-53

# stream purposes
USERS = 1
DATA = 2
NONCE = 3
DECODE = 4
FP_DATA = 5
FP_ADDR = 6
FP_MAC = 7
SPOOF_SURVIVE = 8
SPOOF_DATA = 9
SPOOF_ADDR = 10
SPOOF_MAC = 11
ORDER = 12
NOISE = 13
KEY = 14
ORACLE_SEED = 15
REGISTRY_SEED = 16

SALT_MSG = 0x6D61635F6D657373  # "mac_mess"
SALT_KEY = 0x6D61635F6B657973  # "mac_keys"


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.array(z, dtype=np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    np.multiply(z, np.uint64(_C1), out=z)
    z ^= z >> np.uint64(27)
    np.multiply(z, np.uint64(_C2), out=z)
    z ^= z >> np.uint64(31)
    return z


def purpose_salt(purpose: int) -> int:
    return mix64(purpose * GOLDEN)


def stream_base(seed: int, trial: int, purpose: int) -> int:
    s1 = mix64((seed & MASK64) ^ purpose_salt(purpose))
    return mix64(s1 + (trial + 1) * GOLDEN)


def word_at(base: int, index: int) -> int:
    return mix64(base + (index + 1) * GOLDEN)


def words_np(seed: int, trial, purpose: int, index) -> np.ndarray:
    """Broadcast version of ``word_at(stream_base(seed, trial, purpose), index)``."""
    s1 = mix64((seed & MASK64) ^ purpose_salt(purpose))
    trial = np.asarray(trial, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = mix64_np(np.uint64(s1) + (trial + np.uint64(1)) * np.uint64(GOLDEN))
        return mix64_np(base + (index + np.uint64(1)) * np.uint64(GOLDEN))


def top_bits(w: int, nbits: int) -> int:
    return w >> (64 - nbits) if nbits > 0 else 0


def to_uniform(w: int) -> float:
    return (w >> 11) * TWO_M53


class TrialStream:
    """All random draws of one trial.

    A draw is addressed by ``(purpose, index)`` rather than consumed
    sequentially, so two code paths asking for the same address always see
    the same value.
    """

    __slots__ = ("seed", "trial", "_bases")

    def __init__(self, seed: int, trial: int):
        self.seed = seed & MASK64
        self.trial = trial
        self._bases: dict[int, int] = {}

    def word(self, purpose: int, index: int) -> int:
        base = self._bases.get(purpose)
        if base is None:
            base = self._bases[purpose] = stream_base(self.seed, self.trial, purpose)
        return word_at(base, index)

    def words(self, purpose: int, index) -> np.ndarray:
        return words_np(self.seed, self.trial, purpose, index)

    def uniform(self, purpose: int, index: int) -> float:
        return to_uniform(self.word(purpose, index))

    def field(self, purpose: int, slot: int, nbits: int) -> int:
        """Uniform ``nbits``-bit integer; wide fields span consecutive words."""
        if nbits <= 64:
            return top_bits(self.word(purpose, slot), nbits)
        nwords = -(-nbits // 64)
        acc = 0
        for j in range(nwords):
            acc = (acc << 64) | self.word(purpose, slot * nwords + j)
        return acc >> (64 * nwords - nbits)

    def randbelow(self, purpose: int, index: int, n: int) -> int:
        return int(self.uniform(purpose, index) * n)


def derive_seed(seed: int, purpose: int) -> int:
    """Independent 64-bit seed for a sub-component (registry, oracle, ...)."""
    return word_at(stream_base(seed, 0, purpose), 0)
