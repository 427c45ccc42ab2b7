"""Physical-layer models producing the decoder's K-message output list."""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from . import _mix
from ._mix import TrialStream
from .model import (
    FALSE_POSITIVE,
    ConfigurationError,
    DecodedMessage,
    GroundTruth,
    InfeasibleConfigurationError,
    Provenance,
)


class PfpRangeError(ValueError):
    """Query outside the tabulated energy range or for an absent B."""


@dataclass(frozen=True)
class PfpRow:
    B: int
    energy_db: float
    p_fp: float


@dataclass(frozen=True)
class PfpTable:
    """Decoder false-positive probability versus energy per codeword (dB)."""

    rows: tuple[PfpRow, ...]
    K: int | None = None
    n: int | None = None

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: (r.B, r.energy_db)))
        seen = set()
        for r in rows:
            if not 0.0 <= r.p_fp <= 1.0:
                raise ConfigurationError(f"p_fp={r.p_fp} outside [0, 1]")
            if (r.B, r.energy_db) in seen:
                raise ConfigurationError(f"duplicate row for B={r.B}, energy_db={r.energy_db}")
            seen.add((r.B, r.energy_db))
        for B in {r.B for r in rows}:
            if sum(r.B == B for r in rows) < 2:
                raise ConfigurationError(f"B={B} needs at least two energy points")
        object.__setattr__(self, "rows", rows)

    @property
    def bits(self) -> list[int]:
        return sorted({r.B for r in self.rows})

    def curve(self, B: int) -> tuple[list[float], list[float]]:
        pts = [(r.energy_db, r.p_fp) for r in self.rows if r.B == B]
        if not pts:
            raise PfpRangeError(f"table has no rows for B={B}")
        return [e for e, _ in pts], [v for _, v in pts]

    @classmethod
    def from_csv(cls, source: str | Path | io.TextIOBase) -> "PfpTable":
        """Parse ``B,energy_db,p_fp`` rows; ``# K=..``/``# n=..`` comments set metadata."""
        if isinstance(source, (str, Path)):
            text = Path(source).read_text()
        else:
            text = source.read()
        meta: dict[str, int] = {}
        body = []
        for line in text.splitlines():
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                for tok in s[1:].replace(",", " ").split():
                    key, sep, val = tok.partition("=")
                    if sep and key in ("K", "n"):
                        meta[key] = int(val)
                continue
            body.append(s)
        reader = csv.reader(body)
        header = next(reader, None)
        if header != ["B", "energy_db", "p_fp"]:
            raise ConfigurationError(f"expected header 'B,energy_db,p_fp', got {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 3:
                raise ConfigurationError(f"row {lineno}: expected 3 fields, got {len(rec)}")
            try:
                rows.append(PfpRow(int(rec[0]), float(rec[1]), float(rec[2])))
            except ValueError as exc:
                raise ConfigurationError(f"row {lineno}: {exc}") from None
            if not math.isfinite(rows[-1].energy_db):
                raise ConfigurationError(f"row {lineno}: energy must be finite")
        return cls(tuple(rows), meta.get("K"), meta.get("n"))


def lookup_pfp(table: PfpTable, B: int, energy: float) -> float:
    """Interpolate log10(p_fp) linearly in energy (dB); exact at grid points."""
    xs, ys = table.curve(B)
    if not xs[0] <= energy <= xs[-1]:
        raise PfpRangeError(f"energy {energy} dB outside [{xs[0]}, {xs[-1]}] for B={B}")
    i = bisect.bisect_left(xs, energy)
    if xs[i] == energy:
        return ys[i]
    x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
    if y0 == 0.0 or y1 == 0.0:
        return 0.0
    w = (energy - x0) / (x1 - x0)
    return 10.0 ** ((1 - w) * math.log10(y0) + w * math.log10(y1))


# channel models -------------------------------------------------------------

@dataclass(frozen=True)
class Parametric:
    """Each distinct transmitted message survives with probability ``pTP``."""

    pTP: float

    def __post_init__(self):
        if not 0.0 <= self.pTP <= 1.0:
            raise ConfigurationError("pTP must lie in [0, 1]")

    def decoding_probability(self, config) -> float:
        return self.pTP

    def apply(self, truth: GroundTruth, rng: TrialStream) -> list[DecodedMessage]:
        return apply_parametric(truth, self.pTP, rng)


@dataclass(frozen=True)
class TableDriven:
    """Parametric channel whose miss probability is read from a PfpTable."""

    table: PfpTable
    energy: float

    def decoding_probability(self, config) -> float:
        return 1.0 - lookup_pfp(self.table, config.B, self.energy)

    def apply(self, truth: GroundTruth, rng: TrialStream) -> list[DecodedMessage]:
        return apply_parametric(truth, self.decoding_probability(truth.config), rng)


@dataclass(frozen=True)
class GaussianToy:
    """Exact subset-ML decoding of a random Gaussian codebook (desk scale).

    ``n``, ``P`` and the noise variance come from the SystemConfig so that
    energy per codeword is ``n*P`` relative to the noise power.
    """

    codebookSeed: int = 0
    budget: int = 10**8
    memoryBudget: int = 5 * 10**7  # float64 entries held in codebook and Gram matrix
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def check(self, config) -> None:
        if config.B > 16:
            raise InfeasibleConfigurationError(f"GaussianToy needs B <= 16, got B={config.B}")
        if config.K > 3:
            raise InfeasibleConfigurationError(f"GaussianToy needs K <= 3, got K={config.K}")
        if comb(2**config.B, config.K) > self.budget:
            raise InfeasibleConfigurationError(
                f"C(2^{config.B}, {config.K}) exceeds enumeration budget {self.budget}")
        M = 2**config.B
        entries = M * config.n + (M * M if config.K > 1 else 0)
        if entries > self.memoryBudget:
            raise InfeasibleConfigurationError(
                f"codebook of {M} x {config.n} (plus Gram matrix) exceeds {self.memoryBudget} entries")

    def codebook(self, config) -> np.ndarray:
        key = (config.B, config.n, config.P)
        cb = self._cache.get(key)
        if cb is None:
            gen = np.random.default_rng(self.codebookSeed)
            cb = gen.standard_normal((2**config.B, config.n))
            cb *= np.sqrt(config.n * config.P) / np.linalg.norm(cb, axis=1, keepdims=True)
            self._cache[key] = cb
        return cb

    def gram(self, config) -> np.ndarray:
        key = ("gram", config.B, config.n, config.P)
        G = self._cache.get(key)
        if G is None:
            X = self.codebook(config)
            G = self._cache[key] = X @ X.T
        return G

    def norms(self, config) -> np.ndarray:
        key = ("norms", config.B, config.n, config.P)
        v = self._cache.get(key)
        if v is None:
            X = self.codebook(config)
            v = self._cache[key] = np.einsum("ij,ij->i", X, X)
        return v

    def decoding_probability(self, config) -> float | None:
        return None

    def apply(self, truth: GroundTruth, rng: TrialStream) -> list[DecodedMessage]:
        return apply_gaussian_toy(truth, self, rng)


def _fill_false_positives(truth: GroundTruth, decoded: list[DecodedMessage],
                          rng: TrialStream) -> list[DecodedMessage]:
    cfg = truth.config
    lay = cfg.layout
    taken = set(truth.payloads) | {m.payload for m in decoded}
    free = 2**lay.B - len(taken)
    need = cfg.K - len(decoded)
    if need > free:
        raise InfeasibleConfigurationError("message set too small to fill the decoder list")
    fps = []
    slot = 0
    while len(fps) < need:
        w = lay.serialize(
            rng.field(_mix.FP_DATA, slot, lay.D),
            rng.field(_mix.FP_MAC, slot, lay.L),
            rng.field(_mix.FP_ADDR, slot, lay.A),
        )
        slot += 1
        if w not in taken:
            taken.add(w)
            fps.append(DecodedMessage(w, FALSE_POSITIVE))
    return decoded + fps


def apply_parametric(truth: GroundTruth, pTP: float, rng: TrialStream) -> list[DecodedMessage]:
    """Independent erasure of each distinct payload, padded with false positives.

    Coinciding payloads occupy one list entry (credited to the first sender);
    the output is sorted by payload value, i.e. an arbitrary interleaving of
    genuine and false-positive entries.
    """
    if not 0.0 <= pTP <= 1.0:
        raise ConfigurationError("pTP must lie in [0, 1]")
    decoded = []
    for payload, members in truth.payload_groups():
        if rng.uniform(_mix.DECODE, members[0]) < pTP:
            sender = truth.packets[members[0]].senderId
            decoded.append(DecodedMessage(payload, Provenance.true_positive(sender)))
    out = _fill_false_positives(truth, decoded, rng)
    return sorted(out, key=lambda m: m.payload)


def _best_subset(corr: np.ndarray, gram: np.ndarray | None, K: int,
                 norms: np.ndarray) -> tuple[int, ...]:
    """argmin over K-subsets S of ``||y - sum_S x||^2``, dropping the constant ``||y||^2``.

    The objective is ``sum_S (|x_a|^2 - 2 c_a) + sum_{a<b in S} 2 G_ab``.
    """
    M = len(corr)
    lin = norms - 2.0 * corr
    if K == 1:
        return (int(np.argmin(lin)),)
    if K == 2:
        S = lin[:, None] + lin[None, :] + 2.0 * gram
        S[np.tril_indices(M)] = np.inf
        a, b = np.unravel_index(int(np.argmin(S)), S.shape)
        return (int(a), int(b))
    best, arg = np.inf, None
    pair = lin[:, None] + lin[None, :] + 2.0 * gram
    pair[np.tril_indices(M)] = np.inf
    for a in range(M - 2):
        S = pair[a + 1 :, a + 1 :] + lin[a] + 2.0 * (gram[a, a + 1 :][:, None] + gram[a, a + 1 :][None, :])
        i = int(np.argmin(S))
        if S.flat[i] < best:
            best = S.flat[i]
            b, c = np.unravel_index(i, S.shape)
            arg = (a, a + 1 + int(b), a + 1 + int(c))
    return arg


def apply_gaussian_toy(truth: GroundTruth, model: GaussianToy, rng: TrialStream) -> list[DecodedMessage]:
    """y = sum of transmitted codewords + white Gaussian noise; subset-ML decoding."""
    cfg = truth.config
    model.check(cfg)
    if cfg.K == 0:
        return []
    X = model.codebook(cfg)
    idx = np.array(truth.payloads, dtype=np.int64)
    noise = np.random.default_rng(rng.word(_mix.NOISE, 0)).standard_normal(cfg.n)
    y = X[idx].sum(axis=0) + math.sqrt(cfg.noiseVariance) * noise
    corr = X @ y
    gram = model.gram(cfg) if cfg.K > 1 else None
    chosen = sorted(_best_subset(corr, gram, cfg.K, model.norms(cfg)))
    first_sender = {}
    for pkt, w in zip(truth.packets, truth.payloads):
        first_sender.setdefault(w, pkt.senderId)
    out = []
    for w in chosen:
        if w in first_sender:
            out.append(DecodedMessage(w, Provenance.true_positive(first_sender[w])))
        else:
            out.append(DecodedMessage(w, FALSE_POSITIVE))
    return out
