"""Closed-form probabilities of the cryptographic error events.

Notation: a uniformly distributed L-bit tag matches a given value with
probability ``p = 2**-L``.  Every ``(1 - p)**m`` is evaluated as
``exp(m * log1p(-p))`` so results stay accurate for N up to 1e6 and L up
to 64.  Passing ``exact=True`` evaluates the same expressions with mpmath at
60 significant digits and returns ``mpf`` values.
"""

from __future__ import annotations

import math
from math import comb

import mpmath

from .model import ConfigurationError, Scheme

_MP_DPS = 60
DIRECT_SUM_MAX_NJ = 1024


def _check_prob(name: str, v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")


def p_tag(L: int, exact: bool = False):
    if L < 0:
        raise ConfigurationError("L must be >= 0")
    if exact:
        return mpmath.ldexp(mpmath.mpf(1), -L)
    return math.ldexp(1.0, -L)


def _log_q(L: int) -> float:
    """log(1 - 2**-L)."""
    return -math.inf if L == 0 else math.log1p(-math.ldexp(1.0, -L))


def survive(m: int, L: int, exact: bool = False):
    """``(1 - p)**m``: none of m independent tags matches."""
    if m < 0:
        raise ConfigurationError("exponent must be >= 0")
    if exact:
        with mpmath.workdps(_MP_DPS):
            return (1 - p_tag(L, True)) ** m
    if m == 0:
        return 1.0
    if L == 0:
        return 0.0
    return math.exp(m * _log_q(L))


def any_match(m: int, L: int, exact: bool = False):
    """``1 - (1 - p)**m``: at least one of m tags matches."""
    if exact:
        with mpmath.workdps(_MP_DPS):
            return 1 - survive(m, L, True)
    if m == 0:
        return 0.0
    if L == 0:
        return 1.0
    return -math.expm1(m * _log_q(L))


# exhaustive search ----------------------------------------------------------

def prob_type1(N: int, L: int, exact: bool = False):
    """A foreign key (one of the other N-1) also matches a genuine message."""
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    return any_match(N - 1, L, exact)


def prob_type2(K: int, L: int, exact: bool = False):
    """The sender's key matches one of the other K-1 decoded messages."""
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    return any_match(K - 1, L, exact)


def prob_success_exhaustive(N: int, K: int, L: int, exact: bool = False):
    if N < 1 or K < 1:
        raise ConfigurationError("N and K must be >= 1")
    return survive(N + K - 2, L, exact)


def prob_fp_accept_exhaustive(N: int, kTP: int, K: int, L: int, exact: bool = False):
    """A decoder false positive is accepted: exactly one free key matches it
    and that key matches nothing else on the list."""
    if not 0 <= kTP <= K <= N:
        raise ConfigurationError(f"need 0 <= kTP <= K <= N, got kTP={kTP} K={K} N={N}")
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    if exact:
        with mpmath.workdps(_MP_DPS):
            return (N - kTP) * p_tag(L, True) * survive(N + K - 2, L, True)
    return (N - kTP) * p_tag(L) * survive(N + K - 2, L)


def prob_definite_fp(N: int, L: int, exact: bool = False):
    """No key at all reproduces the tag of a false positive."""
    if N < 0:
        raise ConfigurationError("N must be >= 0")
    return survive(N, L, exact)


# heuristic search -----------------------------------------------------------

def _heuristic_direct(Nj: int, L: int, misid: bool) -> float:
    """Binomial sum over the number i of extra matching keys.

    Terms are generated by the ratio recurrence in a rescaled frame so that
    neither ``q**(Nj-1)`` underflows nor the central terms overflow.
    """
    n = Nj - 1
    if n == 0:
        return 0.0 if misid else 1.0
    if L == 0:
        return n / (n + 1) if misid else 1.0 / (n + 1)
    p = math.ldexp(1.0, -L)
    ratio = p / (1.0 - p)
    log_scale = n * _log_q(L)
    t = 1.0
    acc = 0.0
    for i in range(n + 1):
        weight = i / (1.0 + i) if misid else 1.0 / (1.0 + i)
        acc += t * weight
        t *= ratio * (n - i) / (i + 1)
        if t > 1e250:
            t *= 1e-250
            acc *= 1e-250
            log_scale += 250 * math.log(10.0)
        if t == 0.0 or (i > n * p and t < 1e-20 * acc):
            break
    if acc == 0.0:
        return 0.0
    return math.exp(math.log(acc) + log_scale)


def _p_plus_log1m(p: float) -> float:
    """``p + log(1 - p)`` without cancellation."""
    if p < 0.01:
        return -math.fsum(p**k / k for k in range(2, 22))
    return p + math.log1p(-p)


def _expm1_minus(x: float) -> float:
    """``expm1(x) - x`` without cancellation."""
    if abs(x) < 0.1:
        term, acc = x, 0.0
        for k in range(2, 24):
            term *= x / k
            acc += term
        return acc
    return math.expm1(x) - x


def prob_success_heuristic_closed(Nj: int, L: int) -> float:
    """``(1 - (1-p)**Nj) / (Nj p)``, the summed form of the heuristic success."""
    if Nj < 1:
        raise ConfigurationError("Nj must be >= 1")
    if L == 0:
        return 1.0 / Nj
    return any_match(Nj, L) / (Nj * math.ldexp(1.0, -L))


def prob_misid_heuristic_closed(Nj: int, L: int) -> float:
    """``1 - prob_success_heuristic_closed`` evaluated without cancellation."""
    if Nj < 1:
        raise ConfigurationError("Nj must be >= 1")
    if L == 0:
        return (Nj - 1) / Nj
    p = math.ldexp(1.0, -L)
    a = Nj * p
    x = Nj * _log_q(L)
    if a > 0.5:
        return 1.0 - prob_success_heuristic_closed(Nj, L)
    return (Nj * _p_plus_log1m(p) + _expm1_minus(x)) / a


def _heuristic_exact(Nj: int, L: int):
    with mpmath.workdps(_MP_DPS):
        if Nj == 1:
            return mpmath.mpf(1)
        if L == 0:
            return mpmath.mpf(1) / Nj
        p = p_tag(L, True)
        return -mpmath.expm1(Nj * mpmath.log1p(-p)) / (Nj * p)


def prob_success_heuristic(Nj: int, L: int, exact: bool = False):
    """Genuine message accepted for its true sender when keys are tried in
    random order until the first match; ``Nj`` keys remain, one genuine."""
    if Nj < 1:
        raise ConfigurationError("Nj must be >= 1")
    if exact:
        return _heuristic_exact(Nj, L)
    if Nj <= DIRECT_SUM_MAX_NJ:
        return _heuristic_direct(Nj, L, misid=False)
    return prob_success_heuristic_closed(Nj, L)


def prob_misid_heuristic(Nj: int, L: int, exact: bool = False):
    if Nj < 1:
        raise ConfigurationError("Nj must be >= 1")
    if exact:
        with mpmath.workdps(_MP_DPS):
            return 1 - _heuristic_exact(Nj, L)
    if Nj <= DIRECT_SUM_MAX_NJ:
        return _heuristic_direct(Nj, L, misid=True)
    return prob_misid_heuristic_closed(Nj, L)


def prob_fp_accept_heuristic(Nj: int, L: int, exact: bool = False):
    if Nj < 0:
        raise ConfigurationError("Nj must be >= 0")
    return any_match(Nj, L, exact)


def prob_misauth_heuristic(pTP: float, pFP: float, Nj: int, L: int, exact: bool = False):
    _check_prob("pTP", pTP)
    _check_prob("pFP", pFP)
    if exact:
        with mpmath.workdps(_MP_DPS):
            return (mpmath.mpf(pTP) * prob_misid_heuristic(Nj, L, True)
                    + mpmath.mpf(pFP) * prob_fp_accept_heuristic(Nj, L, True))
    return pTP * prob_misid_heuristic(Nj, L) + pFP * prob_fp_accept_heuristic(Nj, L)


# spoofing and composition ---------------------------------------------------

def prob_spoof(pTP: float, N: int, L: int, scheme: Scheme | str, exact: bool = False):
    """A forged codeword with random tag bits is decoded and accepted."""
    _check_prob("pTP", pTP)
    scheme = Scheme(scheme)
    if scheme is Scheme.MAC_ONLY:
        acc = any_match(N, L, exact)
    elif scheme is Scheme.ADDRESS_MAC:
        acc = p_tag(L, exact)
    else:
        raise ConfigurationError("spoofing is defined for MacOnly and AddressMac")
    if exact:
        with mpmath.workdps(_MP_DPS):
            return mpmath.mpf(pTP) * acc
    return pTP * acc


def collision_floor(K: int, B: int, exact: bool = False):
    """Birthday-style floor ``C(K,2) / 2**B`` on message collisions."""
    if K < 2:
        raise ConfigurationError("collision floor needs K >= 2")
    if exact:
        return mpmath.ldexp(mpmath.mpf(comb(K, 2)), -B)
    return math.ldexp(float(comb(K, 2)), -B)


def prob_any_duplicate(K: int, B: int, exact: bool = False):
    """Exact probability that at least two of K uniform B-bit messages coincide."""
    if K < 0 or B < 0:
        raise ConfigurationError("K and B must be >= 0")
    M = 2**B
    if K > M:
        return mpmath.mpf(1) if exact else 1.0
    if exact:
        with mpmath.workdps(_MP_DPS):
            return 1 - mpmath.fprod(1 - mpmath.mpf(j) / M for j in range(K))
    log_none = math.fsum(math.log1p(-j / M) for j in range(1, K))
    return -math.expm1(log_none)


def prob_user_duplicate(K: int, B: int, exact: bool = False):
    """Probability that a given user's message equals one of K-1 others."""
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    return any_match(K - 1, B, exact)


def expected_ktp(K: int, pTP: float) -> int:
    _check_prob("pTP", pTP)
    return int(round(K * pTP))


def total_misauth(scheme: Scheme | str, pFP: float, *, N: int | None = None,
                  kTP: int | None = None, K: int | None = None, L: int | None = None,
                  exact: bool = False):
    """End-to-end probability that a decoded packet is wrongly accepted.

    Bare accepts every decoded packet; MacOnly accepts a false positive with
    the exhaustive-search probability; AddressMac checks a single key.
    """
    _check_prob("pFP", pFP)
    scheme = Scheme(scheme)
    if scheme is Scheme.BARE:
        return mpmath.mpf(pFP) if exact else pFP
    if L is None:
        raise ConfigurationError("L is required for authenticated schemes")
    if scheme is Scheme.ADDRESS_MAC:
        acc = p_tag(L, exact)
    else:
        if None in (N, kTP, K):
            raise ConfigurationError("MacOnly needs N, kTP and K")
        acc = prob_fp_accept_exhaustive(N, kTP, K, L, exact)
    if exact:
        with mpmath.workdps(_MP_DPS):
            return mpmath.mpf(pFP) * acc
    return pFP * acc
