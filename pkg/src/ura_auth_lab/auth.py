"""Base-station authentication of a decoded list.

The authenticator only sees payloads.  Provenance is consulted after each
decision, to label the verdict for scoring.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _mix
from ._mix import TrialStream
from .mac import MacMode, match_keys
from .model import (
    SPOOF,
    DecodedMessage,
    KeyRegistry,
    Nonce,
    ProvenanceKind,
    Scheme,
    SystemConfig,
)


class Verdict(str, enum.Enum):
    ACCEPTED_CORRECT = "AcceptedCorrect"
    ACCEPTED_WRONG_USER = "AcceptedWrongUser"
    ACCEPTED_FALSE_POSITIVE = "AcceptedFalsePositive"
    REJECTED_COLLISION = "RejectedCollision"
    REJECTED_NO_KEY = "RejectedNoKey"
    NOT_APPLICABLE = "NotApplicable"

    @property
    def accepted(self) -> bool:
        return self in (Verdict.ACCEPTED_CORRECT, Verdict.ACCEPTED_WRONG_USER,
                        Verdict.ACCEPTED_FALSE_POSITIVE)


class OrderPolicy(str, enum.Enum):
    ASCENDING = "AscendingUserId"
    UNIFORM = "UniformRandomPerMessage"


class AuthVariant(str, enum.Enum):
    EXHAUSTIVE = "Exhaustive"
    HEURISTIC = "Heuristic"
    ADDRESSED = "Addressed"


@dataclass(frozen=True)
class AuthOutcome:
    messageIndex: int
    verdict: Verdict
    userId: int | None
    keysTried: int
    remainingKeys: int
    # diagnostics for genuine messages, used only for scoring
    type1: bool = False
    type2: bool = False
    senderKeyAvailable: bool = True


def _label(msg: DecodedMessage, user: int | None, rejected: Verdict | None = None) -> Verdict:
    if user is None:
        return rejected
    prov = msg.provenance
    if prov.kind is ProvenanceKind.TRUE_POSITIVE:
        return Verdict.ACCEPTED_CORRECT if user == prov.userId else Verdict.ACCEPTED_WRONG_USER
    return Verdict.ACCEPTED_FALSE_POSITIVE


def _not_applicable(decoded, N):
    return [AuthOutcome(i, Verdict.NOT_APPLICABLE, None, 0, N) for i in range(len(decoded))]


def match_matrix(decoded: list[DecodedMessage], registry: KeyRegistry, nonce: Nonce,
                 mode: MacMode, config: SystemConfig) -> np.ndarray:
    """``M[m, u]`` is True iff key ``u`` reproduces the tag carried by message ``m``."""
    lay = config.layout
    M = np.zeros((len(decoded), len(registry)), dtype=bool)
    for i, msg in enumerate(decoded):
        data, _, tag = lay.deserialize(msg.payload)
        M[i] = match_keys(registry, data, lay.D, nonce, tag, lay.L, mode)
    return M


def authenticate_exhaustive(decoded: list[DecodedMessage], registry: KeyRegistry, nonce: Nonce,
                            mode: MacMode, config: SystemConfig) -> list[AuthOutcome]:
    """Try every key on every message.

    A message is attributed to user u only when u is the single key matching
    it and u matches no other message on the list.
    """
    N = len(registry)
    if config.scheme is Scheme.BARE:
        return _not_applicable(decoded, N)
    M = match_matrix(decoded, registry, nonce, mode, config)
    per_key = M.sum(axis=0)
    out = []
    for i, msg in enumerate(decoded):
        row = M[i]
        hits = np.flatnonzero(row)
        user = None
        if hits.size == 1 and per_key[hits[0]] == 1:
            user = int(hits[0])
        reason = Verdict.REJECTED_NO_KEY if hits.size == 0 else Verdict.REJECTED_COLLISION
        t1 = t2 = False
        prov = msg.provenance
        if prov.kind is ProvenanceKind.TRUE_POSITIVE:
            s = prov.userId
            t1 = bool(hits.size - row[s] > 0)
            t2 = bool(per_key[s] - row[s] > 0)
        out.append(AuthOutcome(i, _label(msg, user, reason), user, N, N, t1, t2))
    return out


def authenticate_heuristic(decoded: list[DecodedMessage], registry: KeyRegistry, nonce: Nonce,
                           mode: MacMode, config: SystemConfig,
                           policy: OrderPolicy | str = OrderPolicy.ASCENDING,
                           rng: TrialStream | None = None) -> list[AuthOutcome]:
    """Scan keys until the first match; a key that matched leaves the pool.

    Messages are processed in list order.  ``policy`` fixes the scan order of
    the remaining keys: ascending user id, or a fresh uniformly random
    permutation per message drawn from ``rng``.
    """
    policy = OrderPolicy(policy)
    N = len(registry)
    if config.scheme is Scheme.BARE:
        return _not_applicable(decoded, N)
    if policy is OrderPolicy.UNIFORM and rng is None:
        raise ValueError("UniformRandomPerMessage needs an rng stream")
    lay = config.layout
    ids = np.arange(N)
    remaining = np.ones(N, dtype=bool)
    n_remaining = N
    out = []
    for j, msg in enumerate(decoded):
        data, _, tag = lay.deserialize(msg.payload)
        hits = match_keys(registry, data, lay.D, nonce, tag, lay.L, mode) & remaining
        cand = np.flatnonzero(hits)
        user = None
        tried = n_remaining
        if policy is OrderPolicy.ASCENDING:
            if cand.size:
                user = int(cand[0])
                tried = int(remaining[: user + 1].sum())
        else:
            order = rng.words(_mix.ORDER, j * N + ids)
            if cand.size:
                co = order[cand]
                best = int(np.min(co))
                user = int(cand[co == best][0])
                ou = order[user]
                tried = int(np.sum(remaining & ((order < ou) | ((order == ou) & (ids < user))))) + 1
        avail = True
        if msg.provenance.kind is ProvenanceKind.TRUE_POSITIVE:
            avail = bool(remaining[msg.provenance.userId])
        out.append(AuthOutcome(j, _label(msg, user, Verdict.REJECTED_NO_KEY), user, tried,
                               n_remaining, senderKeyAvailable=avail))
        if user is not None:
            remaining[user] = False
            n_remaining -= 1
    return out


def authenticate_addressed(decoded: list[DecodedMessage], registry: KeyRegistry, nonce: Nonce,
                           mode: MacMode, config: SystemConfig) -> list[AuthOutcome]:
    """Classic structure: verify only the key named by the address field."""
    N = len(registry)
    if config.scheme is not Scheme.ADDRESS_MAC:
        raise ValueError("addressed authentication needs the AddressMac scheme")
    lay = config.layout
    out = []
    for i, msg in enumerate(decoded):
        data, addr, tag = lay.deserialize(msg.payload)
        if addr >= N:
            out.append(AuthOutcome(i, Verdict.REJECTED_NO_KEY, None, 0, N))
            continue
        ok = bool(match_keys(_Single(registry, addr), data, lay.D, nonce, tag, lay.L, mode)[0])
        user = addr if ok else None
        out.append(AuthOutcome(i, _label(msg, user, Verdict.REJECTED_NO_KEY), user, 1, N))
    return out


class _Single:
    """One-key view of a registry, for a single vectorized verification."""

    def __init__(self, registry: KeyRegistry, user: int):
        self.keys = (registry[user],)
        self._w = registry.oracle_words()[user : user + 1]

    def __len__(self):
        return 1

    def oracle_words(self):
        return self._w


def inject_spoof(decoded: list[DecodedMessage], count: int, rng: TrialStream,
                 config: SystemConfig, pTP: float) -> list[DecodedMessage]:
    """Append forged packets with random data and tag bits.

    Each forgery reaches the authenticator with probability ``pTP``.  Under
    AddressMac the forger writes a uniformly chosen valid user address.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    lay = config.layout
    out = list(decoded)
    for s in range(count):
        if not rng.uniform(_mix.SPOOF_SURVIVE, s) < pTP:
            continue
        addr = rng.randbelow(_mix.SPOOF_ADDR, s, config.N) if lay.A else 0
        payload = lay.serialize(rng.field(_mix.SPOOF_DATA, s, lay.D),
                                rng.field(_mix.SPOOF_MAC, s, lay.L), addr)
        out.append(DecodedMessage(payload, SPOOF))
    return out

