"""Truncated message authentication codes.

Two interchangeable modes:

* ``IdealOracle(seed)`` - a seeded non-cryptographic hash standing in for a
  uniformly distributed MAC.  It is cheap and vectorizes over keys, which the
  simulators rely on.
* ``KeyedPrf`` - HMAC-SHA-256 over ``data || nonce`` truncated to the leading
  L bits.

Input encoding (both modes): data is left-padded to whole bytes, big-endian;
the nonce is 8-byte big-endian round index followed by 8-byte big-endian
random bits.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

import numpy as np

from ._mix import GOLDEN, MASK64, SALT_KEY, SALT_MSG, mix64, mix64_np
from .model import Nonce, SecretKey


@dataclass(frozen=True)
class IdealOracle:
    simulationSeed: int = 0


@dataclass(frozen=True)
class KeyedPrf:
    pass


MacMode = IdealOracle | KeyedPrf


@dataclass(frozen=True)
class Tag:
    value: int
    length: int

    def __post_init__(self):
        if self.value >> self.length:
            raise ValueError("tag value exceeds its length")

    def bits(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""


def data_bytes(data: int, D: int | None = None) -> bytes:
    nbits = data.bit_length() if D is None else D
    return data.to_bytes(max(1, -(-nbits // 8)), "big")


def hmac_sha256_truncated(key: bytes, message: bytes, L: int) -> int:
    """Leading ``L`` bits of HMAC-SHA-256(key, message) as an integer."""
    if not 0 <= L <= 256:
        raise ValueError("KeyedPrf supports 0 <= L <= 256")
    if L == 0:
        return 0
    digest = hmac.digest(key, message, hashlib.sha256)
    return int.from_bytes(digest, "big") >> (256 - L)


# ideal oracle ---------------------------------------------------------------

def key_word(key: bytes) -> int:
    h = mix64(SALT_KEY ^ len(key))
    padded = key + b"\0" * (-len(key) % 8)
    for i in range(0, len(padded), 8):
        h = mix64(h ^ int.from_bytes(padded[i : i + 8], "big"))
    return h


def key_word_np(keys: list[bytes]) -> np.ndarray:
    """Vectorized ``key_word`` for equal-width keys."""
    if not keys:
        return np.zeros(0, dtype=np.uint64)
    width = len(keys[0])
    if any(len(k) != width for k in keys):
        return np.array([key_word(k) for k in keys], dtype=np.uint64)
    pad = -width % 8
    buf = b"".join(k + b"\0" * pad for k in keys)
    chunks = np.frombuffer(buf, dtype=">u8").astype(np.uint64).reshape(len(keys), -1)
    h = np.full(len(keys), mix64(SALT_KEY ^ width), dtype=np.uint64)
    for c in range(chunks.shape[1]):
        h = mix64_np(h ^ chunks[:, c])
    return h


def message_word(seed: int, data: int, D: int, nonce: Nonce) -> int:
    h = mix64(seed ^ SALT_MSG)
    h = mix64(h ^ nonce.roundIndex)
    h = mix64(h ^ nonce.randomBits)
    for c in range(max(1, -(-D // 64))):
        h = mix64(h ^ ((data >> (64 * c)) & MASK64))
    return mix64(h ^ D)


def oracle_tag64(kw: int, mw: int) -> int:
    return mix64(mix64(kw ^ mw) + mw)


def oracle_tag64_np(kw: np.ndarray, mw: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        return mix64_np(mix64_np(kw ^ np.uint64(mw)) + np.uint64(mw))


def _truncate(t64: int, L: int) -> int:
    if L <= 64:
        return t64 >> (64 - L) if L else 0
    nwords = -(-L // 64)
    acc = t64
    for c in range(1, nwords):
        acc = (acc << 64) | mix64(t64 ^ ((c * GOLDEN) & MASK64))
    return acc >> (64 * nwords - L)


# public operations ----------------------------------------------------------

def compute_mac(key: SecretKey, data: int, nonce: Nonce, L: int, mode: MacMode,
                D: int | None = None) -> Tag:
    """L-bit tag of ``data`` under ``key`` for this round's ``nonce``.

    ``D`` fixes the data width for byte encoding; when omitted the minimal
    width of ``data`` is used.
    """
    if L < 0:
        raise ValueError("L must be non-negative")
    if isinstance(mode, KeyedPrf):
        msg = data_bytes(data, D) + nonce.to_bytes()
        return Tag(hmac_sha256_truncated(key.bits, msg, L), L)
    if L == 0:
        return Tag(0, 0)
    D = data.bit_length() if D is None else D
    mw = message_word(mode.simulationSeed, data, D, nonce)
    return Tag(_truncate(oracle_tag64(key_word(key.bits), mw), L), L)


def verify_mac(key: SecretKey, data: int, nonce: Nonce, tag: Tag, mode: MacMode,
               D: int | None = None) -> bool:
    return compute_mac(key, data, nonce, tag.length, mode, D=D) == tag


def match_keys(registry, data: int, D: int, nonce: Nonce, tag_value: int, L: int,
               mode: MacMode) -> np.ndarray:
    """Boolean vector: which registry keys reproduce ``tag_value`` for ``data``.

    Equivalent to ``verify_mac`` against every key, vectorized for the ideal
    oracle.
    """
    N = len(registry)
    if L == 0:
        return np.ones(N, dtype=bool)
    if isinstance(mode, IdealOracle) and L <= 64:
        mw = message_word(mode.simulationSeed, data, D, nonce)
        t = oracle_tag64_np(registry.oracle_words(), mw) >> np.uint64(64 - L)
        return t == np.uint64(tag_value)
    if isinstance(mode, KeyedPrf):
        msg = data_bytes(data, D) + nonce.to_bytes()
        return np.fromiter(
            (hmac_sha256_truncated(k.bits, msg, L) == tag_value for k in registry.keys),
            dtype=bool, count=N,
        )
    return np.fromiter(
        (compute_mac(k, data, nonce, L, mode, D=D).value == tag_value for k in registry.keys),
        dtype=bool, count=N,
    )
