import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ura_auth_lab import analytics as an
from ura_auth_lab.model import ConfigurationError


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


# hand-computed (N=3, K=2, L=2) family -----------------------------------------

@pytest.mark.parametrize("fn,args,want", [
    (an.prob_type1, (3, 2), 0.4375),
    (an.prob_type2, (2, 2), 0.25),
    (an.prob_success_exhaustive, (3, 2, 2), 0.421875),
    (an.prob_fp_accept_exhaustive, (3, 1, 2, 2), 0.2109375),
    (an.prob_success_heuristic, (3, 2), 0.770833333333333),
    (an.prob_fp_accept_heuristic, (3, 2), 0.578125),
    (an.prob_misid_heuristic, (3, 2), 1 - 37 / 48),
    (an.prob_definite_fp, (3, 2), 0.421875),
])
def test_hand_values(fn, args, want):
    assert abs(fn(*args) - want) < 1e-12


def test_misauth_heuristic_hand_value():
    assert abs(an.prob_misauth_heuristic(0.5, 0.5, 3, 2) - 0.40364583333333) < 1e-12


# independent oracles -----------------------------------------------------------

@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_exhaustive_success_matches_enumeration(N, K, L):
    want = oracles.exhaustive_success_enum(N, K, L)
    assert abs(an.prob_success_exhaustive(N, K, L) - float(want)) < 1e-14


@given(st.integers(1, 8), st.data(), st.integers(1, 6))
def test_fp_accept_matches_enumeration(N, data, L):
    K = data.draw(st.integers(1, N))
    kTP = data.draw(st.integers(0, K - 1))
    want = oracles.fp_accept_enum(N, kTP, K, L)
    assert abs(an.prob_fp_accept_exhaustive(N, kTP, K, L) - float(want)) < 1e-14


@given(st.integers(1, 60), st.integers(0, 10))
def test_heuristic_matches_exact_rational_sum(Nj, L):
    want = oracles.heuristic_success_sum(Nj, L)
    assert rel(an.prob_success_heuristic(Nj, L), float(want)) < 1e-13
    assert abs(an.prob_misid_heuristic(Nj, L) - float(1 - want)) < 1e-13


@pytest.mark.parametrize("L", [1, 4, 8, 16, 24, 32, 48, 64])
@pytest.mark.parametrize("Nj", [1, 2, 5, 100, 1024, 1025, 10**4, 10**5, 10**6])
def test_heuristic_against_mpmath(Nj, L):
    s = oracles.heuristic_success_mp(Nj, L)
    assert rel(an.prob_success_heuristic(Nj, L), float(s)) < 1e-13
    m = 1 - s
    assert rel(an.prob_misid_heuristic(Nj, L), float(m)) < 1e-12


@pytest.mark.parametrize("L", [1, 8, 32, 64])
@pytest.mark.parametrize("m", [1, 99, 10**5, 10**6])
def test_survival_against_mpmath(m, L):
    q = (1 - mpmath.mpf(2) ** -L) ** m
    assert rel(an.survive(m, L), float(q)) < 1e-13
    assert rel(an.any_match(m, L), float(1 - q)) < 1e-13


def test_exact_mode_agrees_with_float():
    for N, K, L in [(100000, 100, 32), (200, 20, 8), (3, 2, 2)]:
        assert rel(float(an.prob_success_exhaustive(N, K, L, exact=True)),
                   an.prob_success_exhaustive(N, K, L)) < 1e-14
        assert rel(float(an.prob_misid_heuristic(N, L, exact=True)), an.prob_misid_heuristic(N, L)) < 1e-12
    assert isinstance(an.prob_type1(5, 3, exact=True), mpmath.mpf)
    assert an.prob_misid_heuristic(1, 8, exact=True) == 0


def test_tiny_probabilities_do_not_cancel():
    # 1-(1-p)^m with p=2^-64: the naive float form returns 0
    assert rel(an.any_match(10, 64), 10 * 2.0**-64) < 1e-12
    assert an.prob_misid_heuristic(10**6, 64) > 0
    assert rel(an.prob_misid_heuristic(10**6, 64), float(1 - oracles.heuristic_success_mp(10**6, 64))) < 1e-10


# frozen values for the Fig. 3 parameters (mpmath, 50 digits) ------------------

def test_fig3_point_values():
    N, K, L = 10**5, 100, 32
    assert abs(an.prob_success_exhaustive(N, K, L) - 0.99997669) < 1e-8
    assert abs(an.prob_success_heuristic(N, L) - 0.99998836) < 1e-8
    assert abs(0.01 * an.prob_fp_accept_exhaustive(N, 99, K, L) - 2.3259472e-7) < 1e-13
    assert abs(an.prob_misauth_heuristic(0.99, 0.01, N, L) - 1.175774e-5) < 1e-11
    assert abs(an.prob_type1(N, L) - 2.328256e-5) < 1e-11
    assert abs(an.prob_type2(K, L) - 2.305023e-8) < 1e-14
    assert abs(an.prob_definite_fp(N, L) - 0.9999767172) < 1e-10


def test_small_parameter_values():
    assert abs(an.prob_success_exhaustive(200, 20, 8) - 0.426037) < 1e-6
    assert abs(an.prob_success_heuristic(200, 8) - 0.694869) < 1e-6
    assert abs(an.prob_spoof(0.5, 200, 8, "MacOnly") - 0.271433) < 1e-6
    assert an.prob_spoof(0.5, 200, 8, "AddressMac") == 0.5 * 2**-8
    ratio = an.prob_spoof(1, 200, 8, "MacOnly") / an.prob_spoof(1, 200, 8, "AddressMac")
    assert abs(ratio - 138.97383) < 1e-4


def test_collision_quantities():
    assert abs(an.prob_any_duplicate(50, 16) - float(oracles.any_duplicate_product(50, 16))) < 1e-15
    assert abs(an.collision_floor(50, 16) - 0.01869202) < 1e-8
    assert abs(an.collision_floor(50, 32) - 2.852175e-7) < 1e-13
    assert abs(an.collision_floor(150, 32) - 2.601882e-6) < 1e-12
    assert an.prob_any_duplicate(5, 2) == 1.0
    assert an.prob_any_duplicate(1, 8) == 0.0


def test_total_misauth_composition():
    assert an.total_misauth("Bare", 0.3) == 0.3
    assert an.total_misauth("AddressMac", 0.3, L=8) == 0.3 * 2**-8
    want = 0.3 * an.prob_fp_accept_exhaustive(1000, 9, 10, 8)
    assert an.total_misauth("MacOnly", 0.3, N=1000, kTP=9, K=10, L=8) == want
    with pytest.raises(ConfigurationError):
        an.total_misauth("MacOnly", 0.3, L=8)


@pytest.mark.parametrize("call", [
    lambda: an.prob_type1(0, 8),
    lambda: an.prob_fp_accept_exhaustive(10, 6, 5, 8),
    lambda: an.prob_success_heuristic(0, 8),
    lambda: an.prob_misauth_heuristic(1.5, 0, 10, 8),
    lambda: an.prob_spoof(0.5, 10, 8, "Bare"),
    lambda: an.collision_floor(1, 8),
    lambda: an.p_tag(-1),
])
def test_domain_errors(call):
    with pytest.raises(ConfigurationError):
        call()


# properties -------------------------------------------------------------------

Ns = st.integers(1, 10**6)
Ls = st.integers(0, 64)


@given(Ns, st.integers(1, 500), Ls)
def test_probabilities_in_unit_interval(N, K, L):
    for v in (an.prob_type1(N, L), an.prob_type2(K, L), an.prob_success_exhaustive(N, K, L),
              an.prob_success_heuristic(N, L), an.prob_misid_heuristic(N, L),
              an.prob_fp_accept_heuristic(N, L), an.prob_definite_fp(N, L)):
        assert 0.0 <= v <= 1.0


@given(Ns, Ls)
def test_complements(N, L):
    assert abs(an.prob_success_heuristic(N, L) + an.prob_misid_heuristic(N, L) - 1) < 1e-13
    assert abs(an.prob_definite_fp(N, L) + an.prob_fp_accept_heuristic(N, L) - 1) < 1e-15


@given(Ns, st.integers(1, 500), st.integers(1, 63))
def test_monotone_in_L_and_N(N, K, L):
    assert an.prob_success_exhaustive(N, K, L + 1) >= an.prob_success_exhaustive(N, K, L)
    assert an.prob_success_heuristic(N, L + 1) >= an.prob_success_heuristic(N, L) - 1e-15
    assert an.prob_success_exhaustive(N + 1, K, L) <= an.prob_success_exhaustive(N, K, L)
    assert an.prob_success_heuristic(N + 1, L) <= an.prob_success_heuristic(N, L) + 1e-15


@settings(max_examples=200)
@given(Ns, st.data(), st.integers(1, 64), st.floats(0, 1))
def test_heuristic_dominates_exhaustive(N, data, L, pTP):
    K = data.draw(st.integers(1, min(N, 1000)))
    kTP = data.draw(st.integers(0, K))
    assert an.prob_success_heuristic(N, L) >= an.prob_success_exhaustive(N, K, L)
    pFP = 1 - pTP
    exh = pFP * an.prob_fp_accept_exhaustive(N, kTP, K, L)
    assert an.prob_misauth_heuristic(pTP, pFP, N, L) >= exh * (1 - 1e-12)


@given(st.integers(2, 2000), st.integers(12, 64))
def test_floor_upper_bounds_exact_duplicate(K, B):
    exact = an.prob_any_duplicate(K, B)
    assert exact <= an.collision_floor(K, B) * (1 + 1e-12)


def test_direct_and_closed_forms_agree_at_switch():
    for L in range(1, 33):
        a = an._heuristic_direct(an.DIRECT_SUM_MAX_NJ, L, misid=False)
        b = an.prob_success_heuristic_closed(an.DIRECT_SUM_MAX_NJ, L)
        assert rel(a, b) < 1e-13
        assert math.isfinite(a)
