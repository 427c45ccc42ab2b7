"""Shared domain types, packet layouts and the round generator."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _mix
from ._mix import TrialStream


class ConfigurationError(ValueError):
    """Invalid or inconsistent parameters."""


class InfeasibleConfigurationError(ConfigurationError):
    """Parameters are valid but the requested computation is out of budget."""


class Scheme(str, enum.Enum):
    BARE = "Bare"
    MAC_ONLY = "MacOnly"
    ADDRESS_MAC = "AddressMac"


@dataclass(frozen=True)
class PayloadLayout:
    """Bit offsets ``[start, stop)`` of each field within a B-bit payload.

    Bit 0 is the first transmitted bit and the most significant bit of the
    payload integer.
    """

    scheme: Scheme
    D: int
    L: int
    A: int

    @property
    def B(self) -> int:
        return self.D + self.A + self.L

    @property
    def data(self) -> tuple[int, int]:
        return (0, self.D)

    @property
    def address(self) -> tuple[int, int] | None:
        if self.scheme is not Scheme.ADDRESS_MAC:
            return None
        return (self.D, self.D + self.A)

    @property
    def mac(self) -> tuple[int, int] | None:
        if self.scheme is Scheme.BARE:
            return None
        return (self.D + self.A, self.B)

    def serialize(self, data: int, mac: int = 0, address: int = 0) -> int:
        if data >> self.D or mac >> self.L or address >> self.A:
            raise ValueError("field value wider than its layout slot")
        return (data << (self.A + self.L)) | (address << self.L) | mac

    def deserialize(self, payload: int) -> tuple[int, int, int]:
        """Return ``(data, address, mac)``; absent fields are 0."""
        mac = payload & ((1 << self.L) - 1)
        address = (payload >> self.L) & ((1 << self.A) - 1)
        data = payload >> (self.A + self.L)
        return data, address, mac


def payload_layout(scheme: Scheme | str, D: int, L: int, A: int) -> PayloadLayout:
    scheme = Scheme(scheme)
    if min(D, L, A) < 0:
        raise ConfigurationError("field widths must be non-negative")
    # absent fields occupy no bits
    if scheme is Scheme.BARE:
        L, A = 0, 0
    elif scheme is Scheme.MAC_ONLY:
        A = 0
    return PayloadLayout(scheme, D, L, A)


_CONFIG_FIELDS = ("N", "K", "L", "D", "A", "B", "n", "P", "scheme", "noiseVariance")


@dataclass(frozen=True)
class SystemConfig:
    N: int
    K: int
    L: int
    D: int
    A: int = 0
    n: int = 2**15
    P: float = 1.0
    scheme: Scheme = Scheme.MAC_ONLY
    noiseVariance: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}") from None
        for name in ("N", "K", "L", "D", "A", "n"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigurationError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.N < 1:
            raise ConfigurationError("N must be >= 1")
        if not 0 <= self.K <= self.N:
            raise ConfigurationError(f"K={self.K} must satisfy 0 <= K <= N={self.N}")
        if self.L < 0 or self.A < 0:
            raise ConfigurationError("L and A must be non-negative")
        if self.D < 1:
            raise ConfigurationError("D must be >= 1")
        if self.n < 1 or self.P < 0 or self.noiseVariance < 0:
            raise ConfigurationError("n >= 1, P >= 0 and noiseVariance >= 0 required")
        if self.scheme is Scheme.BARE and (self.L or self.A):
            raise ConfigurationError("Bare scheme carries neither MAC nor address")
        if self.scheme is Scheme.MAC_ONLY and self.A:
            raise ConfigurationError("MacOnly scheme carries no address (A must be 0)")
        if self.scheme is Scheme.ADDRESS_MAC and (1 << self.A) < self.N:
            raise ConfigurationError(f"A={self.A} bits cannot address N={self.N} users")

    @property
    def layout(self) -> PayloadLayout:
        return payload_layout(self.scheme, self.D, self.L, self.A)

    @property
    def B(self) -> int:
        return self.layout.B

    def replace(self, **changes) -> "SystemConfig":
        d = {k: getattr(self, k) for k in _CONFIG_FIELDS if k != "B"}
        d.update(changes)
        return SystemConfig(**d)

    def to_dict(self) -> dict[str, Any]:
        return {
            "N": self.N, "K": self.K, "L": self.L, "D": self.D, "A": self.A,
            "B": self.B, "n": self.n, "P": self.P, "scheme": self.scheme.value,
            "noiseVariance": self.noiseVariance,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SystemConfig":
        unknown = set(doc) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown SystemConfig fields: {sorted(unknown)}")
        d = dict(doc)
        B = d.pop("B", None)
        cfg = cls(**d)
        if B is not None and B != cfg.B:
            raise ConfigurationError(f"B={B} disagrees with scheme-derived B={cfg.B}")
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SecretKey:
    bits: bytes

    @property
    def width(self) -> int:
        return 8 * len(self.bits)


class KeyRegistry:
    """Base-station key database: user id ``0..N-1`` -> secret key."""

    def __init__(self, keys):
        self.keys: tuple[SecretKey, ...] = tuple(keys)
        if len({k.bits for k in self.keys}) != len(self.keys):
            raise ConfigurationError("duplicate secret keys in registry")
        self._oracle_words: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, user_id: int) -> SecretKey:
        return self.keys[user_id]

    def __iter__(self):
        return iter(enumerate(self.keys))

    @classmethod
    def generate(cls, N: int, seed: int, width_bits: int = 128) -> "KeyRegistry":
        if width_bits <= 0 or width_bits % 8:
            raise ConfigurationError("key width must be a positive multiple of 8 bits")
        nwords = -(-width_bits // 64)
        users = np.arange(N, dtype=np.uint64)[:, None]
        idx = np.arange(nwords, dtype=np.uint64)[None, :]
        words = _mix.words_np(seed, users, _mix.KEY, idx)
        raw = words.astype(">u8").tobytes()
        stride = 8 * nwords
        nbytes = width_bits // 8
        return cls(SecretKey(raw[u * stride : u * stride + nbytes]) for u in range(N))

    def oracle_words(self) -> np.ndarray:
        """Per-key 64-bit digests used by the ideal MAC oracle (cached)."""
        if self._oracle_words is None:
            from .mac import key_word_np

            self._oracle_words = key_word_np([k.bits for k in self.keys])
        return self._oracle_words


@dataclass(frozen=True)
class Nonce:
    roundIndex: int
    randomBits: int

    def to_bytes(self) -> bytes:
        return self.roundIndex.to_bytes(8, "big") + self.randomBits.to_bytes(8, "big")


@dataclass(frozen=True)
class Packet:
    data: int
    mac: int
    address: int | None
    senderId: int


class ProvenanceKind(str, enum.Enum):
    TRUE_POSITIVE = "TruePositive"
    FALSE_POSITIVE = "FalsePositive"
    SPOOF = "Spoof"


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    userId: int | None = None

    @classmethod
    def true_positive(cls, user_id: int) -> "Provenance":
        return cls(ProvenanceKind.TRUE_POSITIVE, user_id)


FALSE_POSITIVE = Provenance(ProvenanceKind.FALSE_POSITIVE)
SPOOF = Provenance(ProvenanceKind.SPOOF)


@dataclass(frozen=True)
class DecodedMessage:
    payload: int
    provenance: Provenance


@dataclass(frozen=True)
class GroundTruth:
    config: SystemConfig
    activeUsers: tuple[int, ...]
    packets: tuple[Packet, ...]
    nonce: Nonce
    duplicatePayloadGroups: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def payloads(self) -> tuple[int, ...]:
        lay = self.config.layout
        return tuple(lay.serialize(p.data, p.mac, p.address or 0) for p in self.packets)

    def payload_groups(self) -> list[tuple[int, list[int]]]:
        """Distinct payloads in first-transmission order, with packet indices."""
        groups: dict[int, list[int]] = {}
        for k, w in enumerate(self.payloads):
            groups.setdefault(w, []).append(k)
        return list(groups.items())


def sample_users(stream: TrialStream, N: int, K: int) -> list[int]:
    """K distinct user ids (Floyd's algorithm), in draw order."""
    chosen: list[int] = []
    seen: set[int] = set()
    for i, j in enumerate(range(N - K, N)):
        t = stream.randbelow(_mix.USERS, i, j + 1)
        if t in seen:
            t = j
        seen.add(t)
        chosen.append(t)
    return chosen


def generate_round(config: SystemConfig, registry: KeyRegistry, nonce: Nonce,
                   rng: TrialStream, mode=None) -> GroundTruth:
    """Draw the active set, their data, and their MACs for one round."""
    from .mac import IdealOracle, compute_mac

    if config.K > config.N:
        raise ConfigurationError("K > N")
    if len(registry) != config.N:
        raise ConfigurationError(f"registry has {len(registry)} keys, config N={config.N}")
    mode = IdealOracle(0) if mode is None else mode
    users = sample_users(rng, config.N, config.K)
    addressed = config.scheme is Scheme.ADDRESS_MAC
    packets = []
    for k, u in enumerate(users):
        data = rng.field(_mix.DATA, k, config.D)
        mac = compute_mac(registry[u], data, nonce, config.L, mode, D=config.D).value
        packets.append(Packet(data, mac, u if addressed else None, u))
    truth = GroundTruth(config, tuple(users), tuple(packets), nonce)
    dups = tuple(
        tuple(users[k] for k in members)
        for _, members in truth.payload_groups() if len(members) > 1
    )
    return GroundTruth(config, tuple(users), tuple(packets), nonce, dups)
