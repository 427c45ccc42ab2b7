from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import wilson
from ura_auth_lab._mix import TrialStream
from ura_auth_lab.auth import authenticate_exhaustive, authenticate_heuristic, inject_spoof
from ura_auth_lab.channels import Parametric
from ura_auth_lab.mac import IdealOracle
from ura_auth_lab.model import KeyRegistry, Nonce, SystemConfig, generate_round
from ura_auth_lab.stats import (
    COUNTERS,
    Rate,
    RoundStats,
    score_round,
    summarize,
    wilson_interval,
)

MODE = IdealOracle(9)


@pytest.mark.parametrize("k,n", [(0, 1), (0, 10), (3, 10), (10, 10), (17, 1000), (999, 1000)])
def test_wilson_against_oracle(k, n):
    lo, hi = wilson_interval(k, n)
    wlo, whi = wilson(k, n, 1.959963984540054)
    assert lo == pytest.approx(wlo, abs=1e-12) and hi == pytest.approx(whi, abs=1e-12)


def test_wilson_empty():
    assert wilson_interval(0, 0) == (0.0, 1.0)


def _round(cfg, t, variant, spoofs=0, pTP=0.8):
    reg = KeyRegistry.generate(cfg.N, 4)
    s = TrialStream(33, t)
    nonce = Nonce(1, t)
    truth = generate_round(cfg, reg, nonce, s, MODE)
    dec = inject_spoof(Parametric(pTP).apply(truth, s), spoofs, s, cfg, pTP)
    fn = authenticate_exhaustive if variant == "Exhaustive" else authenticate_heuristic
    out = fn(dec, reg, nonce, MODE, cfg)
    return truth, dec, score_round(truth, dec, out, spoofs)


stats_strategy = st.builds(
    lambda d: RoundStats(counts=Counter(d), genuineByRemaining=Counter({3: d.get("users", 0)})),
    st.dictionaries(st.sampled_from(COUNTERS), st.integers(0, 50)))


@given(stats_strategy, stats_strategy, stats_strategy)
def test_merge_is_commutative_and_associative(a, b, c):
    assert a.merge(b) == b.merge(a)
    assert a.merge(b).merge(c) == a.merge(b.merge(c))
    assert a.merge(RoundStats()) == a


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["Exhaustive", "Heuristic"]), st.integers(0, 3))
def test_score_round_partitions(t, variant, spoofs):
    cfg = SystemConfig(N=30, K=6, L=3, D=4)
    truth, dec, s = _round(cfg, t, variant, spoofs)
    c = s.counts
    genuine_classes = ("genuineAcceptedCorrect", "genuineMisidentified", "genuineRejectedType1",
                       "genuineRejectedType2", "genuineRejectedBoth", "genuineRejectedNoKey")
    assert sum(c[k] for k in genuine_classes) == s.genuine_decoded
    assert s.genuine_decoded + c["genuineNotDecoded"] + c["duplicateErrors"] == c["users"] == cfg.K
    assert c["fpAccepted"] + c["fpRejected"] + c["fpDefinite"] == c["kFP"] == s.fp_total
    assert c["spoofAccepted"] + c["spoofRejected"] + c["spoofNotDecoded"] == spoofs
    assert c["kTP"] + c["kFP"] + spoofs - c["spoofNotDecoded"] == len(dec)
    assert sum(s.genuineByRemaining.values()) + c["genuineKeyUnavailable"] == s.genuine_decoded
    assert RoundStats.from_dict(s.to_dict()) == s


def test_round_trip_with_tuple_keys():
    s = RoundStats()
    s.counts["rounds"] = 2
    s.fpByKtpListLength[(3, 5)] = 4
    s.genuineByListLength[5] = 7
    doc = s.to_dict()
    assert doc["fpByKtpListLength"] == {"3,5": 4}
    assert RoundStats.from_dict(doc) == s


def test_rate_z_and_coverage():
    r = Rate("x", 60, 100, 0.5, 25.0)
    assert r.standard_error == pytest.approx(0.05)
    assert r.z_score == pytest.approx(2.0)
    assert r.covered() and not r.covered(1.5)
    exact = Rate("y", 0, 10, 0.0, 0.0)
    assert exact.z_score == 0.0 and exact.covered()
    assert Rate("z", 1, 10, 0.0, 0.0).to_dict()["zScore"] is None
    assert Rate("w", 1, 10).covered() is None


def test_summarize_rates_have_predictions_and_trials():
    cfg = SystemConfig(N=30, K=6, L=3, D=4)
    total = RoundStats()
    for t in range(200):
        total.add(_round(cfg, t, "Heuristic")[2])
    rates = {r.name: r for r in summarize(total, cfg, "Heuristic", 0.8)}
    assert {"p_succ", "p_misid", "p_misauth", "p_key_unavailable"} <= set(rates)
    assert rates["p_succ"].predicted is not None
    assert rates["p_key_unavailable"].predicted is None
    assert all(r.trials > 0 for r in rates.values())
