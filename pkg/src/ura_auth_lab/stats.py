"""Per-round scoring, aggregation, and rate summaries with analytic predictions."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields

from . import analytics as an
from .auth import AuthOutcome, AuthVariant, Verdict
from .model import DecodedMessage, GroundTruth, ProvenanceKind, SystemConfig

COUNTERS = (
    "rounds",
    "users",
    "genuineAcceptedCorrect",
    "genuineMisidentified",
    "genuineRejectedType1",
    "genuineRejectedType2",
    "genuineRejectedBoth",
    "genuineRejectedNoKey",
    "genuineNotDecoded",
    "genuineKeyUnavailable",
    "genuineMisidentifiedKeyUnavailable",
    "fpAccepted",
    "fpRejected",
    "fpDefinite",
    "spoofAccepted",
    "spoofRejected",
    "spoofNotDecoded",
    "duplicateErrors",
    "roundsWithDuplicate",
    "notApplicable",
    "kTP",
    "kFP",
    "keysTried",
    "keysTriedAcceptedGenuine",
)

# histograms keyed by small integers, feeding the analytic predictions
HISTOGRAMS = (
    "genuineByListLength",  # list length -> decoded genuine messages
    "genuineByRemaining",   # remaining keys Nj -> genuine messages whose sender key remains
    "fpByKtpListLength",    # (kTP, list length) -> false positives
    "fpByRemaining",        # Nj -> false positives
)


@dataclass
class RoundStats:
    counts: Counter = field(default_factory=Counter)
    genuineByListLength: Counter = field(default_factory=Counter)
    genuineByRemaining: Counter = field(default_factory=Counter)
    fpByKtpListLength: Counter = field(default_factory=Counter)
    fpByRemaining: Counter = field(default_factory=Counter)

    def __getattr__(self, name):
        if name in COUNTERS:
            return self.counts[name]
        raise AttributeError(name)

    def add(self, other: "RoundStats") -> "RoundStats":
        """In-place accumulation."""
        for f in fields(self):
            getattr(self, f.name).update(getattr(other, f.name))
        return self

    def merge(self, other: "RoundStats") -> "RoundStats":
        return RoundStats().add(self).add(other)

    def __add__(self, other):
        return self.merge(other)

    def __eq__(self, other):
        if not isinstance(other, RoundStats):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    @property
    def genuine_decoded(self) -> int:
        c = self.counts
        return (c["genuineAcceptedCorrect"] + c["genuineMisidentified"] + c["genuineRejectedType1"]
                + c["genuineRejectedType2"] + c["genuineRejectedBoth"] + c["genuineRejectedNoKey"])

    @property
    def fp_total(self) -> int:
        c = self.counts
        return c["fpAccepted"] + c["fpRejected"] + c["fpDefinite"]

    @property
    def spoof_total(self) -> int:
        c = self.counts
        return c["spoofAccepted"] + c["spoofRejected"] + c["spoofNotDecoded"]

    def to_dict(self) -> dict:
        doc = {name: int(self.counts[name]) for name in COUNTERS}
        for h in HISTOGRAMS:
            hist = getattr(self, h)
            doc[h] = {_key_str(k): int(v) for k, v in sorted(hist.items()) if v}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RoundStats":
        st = cls()
        for name in COUNTERS:
            st.counts[name] = int(doc.get(name, 0))
        for h in HISTOGRAMS:
            getattr(st, h).update({_key_parse(k): v for k, v in doc.get(h, {}).items()})
        return st


def _key_str(k) -> str:
    return ",".join(map(str, k)) if isinstance(k, tuple) else str(k)


def _key_parse(s: str):
    parts = tuple(int(x) for x in s.split(","))
    return parts if len(parts) > 1 else parts[0]


def score_round(truth: GroundTruth, decoded: list[DecodedMessage], outcomes: list[AuthOutcome],
                spoof_count: int = 0) -> RoundStats:
    """Classify every transmitted user, decoded entry and forgery of one round."""
    st = RoundStats()
    c = st.counts
    c["rounds"] = 1
    c["users"] = len(truth.activeUsers)
    dup_users = {u for g in truth.duplicatePayloadGroups for u in g}
    c["duplicateErrors"] = len(dup_users)
    c["roundsWithDuplicate"] = int(bool(truth.duplicatePayloadGroups))
    list_len = len(decoded)
    genuine = [m for m in decoded if m.provenance.kind is ProvenanceKind.TRUE_POSITIVE]
    spoofs = [m for m in decoded if m.provenance.kind is ProvenanceKind.SPOOF]
    ktp = len(genuine)
    c["kTP"] = ktp
    c["kFP"] = list_len - ktp - len(spoofs)
    c["spoofNotDecoded"] = spoof_count - len(spoofs)
    decoded_senders = {m.provenance.userId for m in genuine}
    c["genuineNotDecoded"] = sum(
        1 for u in truth.activeUsers if u not in dup_users and u not in decoded_senders)
    for msg, out in zip(decoded, outcomes):
        v = out.verdict
        c["keysTried"] += out.keysTried
        if v is Verdict.NOT_APPLICABLE:
            c["notApplicable"] += 1
            continue
        kind = msg.provenance.kind
        if kind is ProvenanceKind.TRUE_POSITIVE:
            if msg.provenance.userId in dup_users:
                continue
            st.genuineByListLength[list_len] += 1
            if out.senderKeyAvailable:
                st.genuineByRemaining[out.remainingKeys] += 1
            else:
                c["genuineKeyUnavailable"] += 1
                if v is Verdict.ACCEPTED_WRONG_USER:
                    c["genuineMisidentifiedKeyUnavailable"] += 1
            if v is Verdict.ACCEPTED_CORRECT:
                c["genuineAcceptedCorrect"] += 1
                c["keysTriedAcceptedGenuine"] += out.keysTried
            elif v is Verdict.ACCEPTED_WRONG_USER:
                c["genuineMisidentified"] += 1
            elif v is Verdict.REJECTED_NO_KEY:
                c["genuineRejectedNoKey"] += 1
            elif out.type1 and out.type2:
                c["genuineRejectedBoth"] += 1
            elif out.type1:
                c["genuineRejectedType1"] += 1
            else:
                c["genuineRejectedType2"] += 1
        elif kind is ProvenanceKind.FALSE_POSITIVE:
            st.fpByKtpListLength[(ktp, list_len)] += 1
            st.fpByRemaining[out.remainingKeys] += 1
            if v.accepted:
                c["fpAccepted"] += 1
            elif v is Verdict.REJECTED_NO_KEY:
                c["fpDefinite"] += 1
            else:
                c["fpRejected"] += 1
        else:
            if v.accepted:
                c["spoofAccepted"] += 1
            else:
                c["spoofRejected"] += 1
    return st


# summaries ------------------------------------------------------------------

Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class Rate:
    name: str
    successes: int
    trials: int
    predicted: float | None = None
    predicted_var_sum: float | None = None  # sum of per-event Bernoulli variances
    formula: str | None = None

    @property
    def value(self) -> float | None:
        return self.successes / self.trials if self.trials else None

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)

    @property
    def standard_error(self) -> float | None:
        if self.predicted is None or not self.trials:
            return None
        return math.sqrt(max(self.predicted_var_sum, 0.0)) / self.trials

    @property
    def z_score(self) -> float | None:
        se = self.standard_error
        if se is None:
            return None
        diff = self.value - self.predicted
        if se == 0.0:
            return 0.0 if diff == 0 else math.inf
        return diff / se

    def covered(self, nsigma: float = 3.0) -> bool | None:
        z = self.z_score
        return None if z is None else abs(z) <= nsigma

    def to_dict(self) -> dict:
        lo, hi = self.ci
        z = self.z_score
        return {
            "name": self.name,
            "successes": self.successes,
            "trials": self.trials,
            "rate": self.value,
            "ciLow": lo,
            "ciHigh": hi,
            "predicted": self.predicted,
            "formula": self.formula,
            "standardError": self.standard_error,
            "zScore": z if z is None or math.isfinite(z) else None,
            "covered": self.covered(),
        }


def _weighted(hist: Counter, f) -> tuple[float, float]:
    """Sum of f(key)*count and of f(1-f)*count over a histogram."""
    mean = var = 0.0
    for key, cnt in sorted(hist.items()):
        p = float(f(key))
        mean += cnt * p
        var += cnt * p * (1.0 - p)
    return mean, var


def _rate(name, k, n, pred=None, formula=None) -> Rate:
    if pred is None or n == 0:
        return Rate(name, k, n, None, None, formula)
    mean, var = pred
    return Rate(name, k, n, mean / n, var, formula)


def _const(p, n):
    return (p * n, p * (1 - p) * n)


def summarize(stats: RoundStats, config: SystemConfig, variant: AuthVariant | str,
              decode_probability: float | None, spoof_count: int = 0) -> list[Rate]:
    """Every simulated rate, paired with its closed-form prediction where one exists.

    Predictions are evaluated at the realized list length, kTP, and remaining
    key count of each scored message.
    """
    variant = AuthVariant(variant)
    N, K, L, B = config.N, config.K, config.L, config.B
    c = stats.counts
    g = stats.genuine_decoded
    nfp = stats.fp_total
    rates: list[Rate] = []
    non_dup_users = c["users"] - c["duplicateErrors"]

    if c["users"]:
        rates.append(_rate("p_user_duplicate", c["duplicateErrors"], c["users"],
                           _const(an.prob_user_duplicate(K, B), c["users"]) if K else None,
                           "1-(1-2^-B)^(K-1)"))
    if c["rounds"] and K >= 2:
        rates.append(_rate("p_round_duplicate", c["roundsWithDuplicate"], c["rounds"],
                           _const(an.prob_any_duplicate(K, B), c["rounds"]),
                           "1-prod_j(1-j/2^B)"))
    if non_dup_users:
        pred = None if decode_probability is None else _const(decode_probability, non_dup_users)
        rates.append(_rate("p_decoded", g, non_dup_users, pred, "pTP"))
    if c["notApplicable"]:
        return rates

    if variant is AuthVariant.EXHAUSTIVE:
        rates += [
            _rate("p_succ", c["genuineAcceptedCorrect"], g,
                  _weighted(stats.genuineByListLength, lambda k: an.prob_success_exhaustive(N, k, L)),
                  "(1-p)^(N+K-2)"),
            _rate("p_type1", c["genuineRejectedType1"] + c["genuineRejectedBoth"], g,
                  _const(an.prob_type1(N, L), g), "1-(1-p)^(N-1)"),
            _rate("p_type2", c["genuineRejectedType2"] + c["genuineRejectedBoth"], g,
                  _weighted(stats.genuineByListLength, lambda k: an.prob_type2(k, L)),
                  "1-(1-p)^(K-1)"),
            _rate("p_misid", c["genuineMisidentified"], g, (0.0, 0.0), "0 (collisions rejected)"),
            _rate("p_fp_accept", c["fpAccepted"], nfp,
                  _weighted(stats.fpByKtpListLength,
                            lambda kk: an.prob_fp_accept_exhaustive(N, kk[0], kk[1], L)),
                  "(N-kTP) p (1-p)^(N+K-2)"),
            _rate("p_definite_fp", c["fpDefinite"], nfp, _const(an.prob_definite_fp(N, L), nfp),
                  "(1-p)^N"),
        ]
        fp_pred = _weighted(stats.fpByKtpListLength,
                            lambda kk: an.prob_fp_accept_exhaustive(N, kk[0], kk[1], L))
        rates.append(_rate("p_misauth", c["genuineMisidentified"] + c["fpAccepted"], g + nfp,
                           fp_pred, "pFP * fp_auth"))
        rates.append(_rate("p_spoof", c["spoofAccepted"], stats.spoof_total, None,
                           "no closed form for exhaustive search"))
    elif variant is AuthVariant.HEURISTIC:
        # the closed forms assume the sender's key is still in the pool; the
        # event that an earlier message consumed it is reported separately
        ga = g - c["genuineKeyUnavailable"]
        mis_a = c["genuineMisidentified"] - c["genuineMisidentifiedKeyUnavailable"]
        succ = _weighted(stats.genuineByRemaining, lambda nj: an.prob_success_heuristic(nj, L))
        mis = _weighted(stats.genuineByRemaining, lambda nj: an.prob_misid_heuristic(nj, L))
        fpa = _weighted(stats.fpByRemaining, lambda nj: an.prob_fp_accept_heuristic(nj, L))
        rates += [
            _rate("p_succ", c["genuineAcceptedCorrect"], ga, succ, "sum_i Bin(Nj-1,p)/(1+i)"),
            _rate("p_misid", mis_a, ga, mis, "1 - p_succ(Nj)"),
            _rate("p_fp_accept", c["fpAccepted"], nfp, fpa, "1-(1-p)^Nj"),
            _rate("p_misauth", mis_a + c["fpAccepted"], ga + nfp,
                  (mis[0] + fpa[0], mis[1] + fpa[1]), "pTP p_misid + pFP p_fp_auth"),
        ]
        if spoof_count and decode_probability is not None:
            ps = an.prob_spoof(decode_probability, N, L, "MacOnly")
            rates.append(_rate("p_spoof", c["spoofAccepted"], stats.spoof_total,
                               _const(ps, stats.spoof_total), "pTP (1-(1-p)^N)"))
        rates += [
            _rate("p_key_unavailable", c["genuineKeyUnavailable"], g, None,
                  "sender key consumed earlier; neglected by the closed forms"),
            _rate("p_succ_all", c["genuineAcceptedCorrect"], g, None,
                  "all decoded genuine messages, no closed form"),
            _rate("p_misid_all", c["genuineMisidentified"], g, None,
                  "all decoded genuine messages, no closed form"),
        ]
    else:
        A = config.A
        rates += [
            _rate("p_succ", c["genuineAcceptedCorrect"], g, _const(1.0, g), "1"),
            _rate("p_fp_accept", c["fpAccepted"], nfp,
                  _const(min(1.0, N / 2**A) * an.p_tag(L), nfp), "P(valid address) p"),
        ]
        if spoof_count and decode_probability is not None:
            ps = an.prob_spoof(decode_probability, N, L, "AddressMac")
            rates.append(_rate("p_spoof", c["spoofAccepted"], stats.spoof_total,
                               _const(ps, stats.spoof_total), "pTP p"))
    return [r for r in rates if r.trials]


def mean_keys_tried_accepted(stats: RoundStats) -> float | None:
    n = stats.counts["genuineAcceptedCorrect"]
    return stats.counts["keysTriedAcceptedGenuine"] / n if n else None
