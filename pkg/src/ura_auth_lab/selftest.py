"""Built-in consistency checks run by ``ura-auth-lab selftest``."""

from __future__ import annotations

import math
import time
from typing import Callable

from . import analytics as an
from .channels import Parametric
from .mac import hmac_sha256_truncated
from .model import SystemConfig
from .simulate import run_trials
from .stats import summarize

# RFC 4231 test cases 1, 2 and 5 (the last truncated to 128 bits)
HMAC_VECTORS = (
    (b"\x0b" * 20, b"Hi There", 256,
     0xB0344C61D8DB38535CA8AFCEAF0BF12B881DC200C9833DA726E9376C2E32CFF7),
    (b"Jefe", b"what do ya want for nothing?", 256,
     0x5BDCC146BF60754E6A042426089575C75A003F089D2739839DEC58B964EC3843),
    (b"\x0c" * 20, b"Test With Truncation", 128, 0xA3B6167473100EE06E0C796C2955552B),
)


def check_identity() -> str | None:
    worst = 0.0
    for L in (1, 2, 4, 8, 16, 24, 32):
        for Nj in (1, 2, 3, 10, 100, 500, 1024):
            d = an._heuristic_direct(Nj, L, misid=False)
            c = an.prob_success_heuristic_closed(Nj, L)
            rel = abs(d - c) / c
            if not math.isfinite(rel):
                return f"non-finite value at Nj={Nj}, L={L}"
            worst = max(worst, rel)
    return None if worst < 1e-12 else f"max relative error {worst:.3e}"


def check_complement() -> str | None:
    for L in (1, 4, 8, 16, 32, 64):
        for m in (1, 7, 100, 10**4, 10**6):
            if abs(an.survive(m, L) + an.any_match(m, L) - 1.0) > 1e-15:
                return f"survive + any_match != 1 at m={m}, L={L}"
            s, e = an.prob_success_heuristic(m, L), an.prob_misid_heuristic(m, L)
            if abs(s + e - 1.0) > 1e-13:
                return f"success + misid != 1 at Nj={m}, L={L}"
    return None


def check_dominance() -> str | None:
    for N in (10**3, 10**4, 10**5, 10**6):
        for L in (8, 16, 32):
            K = 100
            if an.prob_success_heuristic(N, L) < an.prob_success_exhaustive(N, K, L):
                return f"heuristic success below exhaustive at N={N}, L={L}"
            ex = 0.01 * an.prob_fp_accept_exhaustive(N, 99, K, L)
            if an.prob_misauth_heuristic(0.99, 0.01, N, L) < ex:
                return f"heuristic mis-auth below exhaustive at N={N}, L={L}"
    return None


def check_hand_values() -> str | None:
    got = {
        "type1": an.prob_type1(3, 2),
        "type2": an.prob_type2(2, 2),
        "succ_exh": an.prob_success_exhaustive(3, 2, 2),
        "fp_exh": an.prob_fp_accept_exhaustive(3, 1, 2, 2),
        "succ_heur": an.prob_success_heuristic(3, 2),
        "fp_heur": an.prob_fp_accept_heuristic(3, 2),
    }
    want = {"type1": 0.4375, "type2": 0.25, "succ_exh": 0.421875, "fp_exh": 0.2109375,
            "succ_heur": 37 / 48, "fp_heur": 0.578125}
    bad = [k for k in want if abs(got[k] - want[k]) > 1e-12]
    return None if not bad else f"mismatch in {bad}"


def check_hmac() -> str | None:
    for key, msg, L, want in HMAC_VECTORS:
        if hmac_sha256_truncated(key, msg, L) != want:
            return f"vector for key {key[:4]!r}... failed"
    return None


def check_engines() -> str | None:
    cfg = SystemConfig(N=40, K=6, L=3, D=5)
    for variant, order in (("Exhaustive", "AscendingUserId"), ("Heuristic", "AscendingUserId"),
                           ("Heuristic", "UniformRandomPerMessage")):
        a = run_trials(cfg, Parametric(0.8), variant, 200, 11, 2, order=order, engine="reference")
        b = run_trials(cfg, Parametric(0.8), variant, 200, 11, 2, order=order, engine="kernel")
        if a != b:
            return f"{variant}/{order}: kernel and reference counters differ"
    return None


def check_monte_carlo() -> str | None:
    cfg = SystemConfig(N=200, K=20, L=8, D=32)
    for variant in ("Exhaustive", "Heuristic"):
        st = run_trials(cfg, Parametric(0.95), variant, 20000, 2024,
                        order="UniformRandomPerMessage")
        for r in summarize(st, cfg, variant, 0.95):
            if r.covered() is False:
                return f"{variant} {r.name}: z={r.z_score:.2f}"
    return None


CHECKS: tuple[tuple[str, Callable[[], str | None], bool], ...] = (
    ("closed-form identity", check_identity, False),
    ("complement", check_complement, False),
    ("dominance", check_dominance, False),
    ("hand-computed values", check_hand_values, False),
    ("HMAC-SHA-256 vectors", check_hmac, False),
    ("engine equivalence", check_engines, True),
    ("Monte Carlo agreement", check_monte_carlo, True),
)


def run_selftest(echo: Callable[[str], None] = print, quick: bool = False) -> bool:
    ok = True
    for name, fn, slow in CHECKS:
        if quick and slow:
            echo(f"SKIP  {name}")
            continue
        t0 = time.perf_counter()
        try:
            err = fn()
        except Exception as exc:  # report, do not abort the remaining checks
            err = f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        echo(f"{'PASS' if err is None else 'FAIL'}  {name} ({dt:.2f}s)" + ("" if err is None else f": {err}"))
        ok &= err is None
    return bool(ok)
