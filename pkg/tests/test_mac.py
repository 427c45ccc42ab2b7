import hashlib
import hmac

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ura_auth_lab.mac import (
    IdealOracle,
    KeyedPrf,
    Tag,
    compute_mac,
    data_bytes,
    hmac_sha256_truncated,
    match_keys,
    verify_mac,
)
from ura_auth_lab.model import KeyRegistry, Nonce, SecretKey
from ura_auth_lab.selftest import HMAC_VECTORS

MODES = [IdealOracle(0), IdealOracle(12345), KeyedPrf()]


@pytest.mark.parametrize("key,msg,L,want", HMAC_VECTORS)
def test_rfc4231_vectors(key, msg, L, want):
    assert hmac_sha256_truncated(key, msg, L) == want
    full = hmac.new(key, msg, hashlib.sha256).digest()
    assert want == int.from_bytes(full, "big") >> (256 - L)


def test_truncation_keeps_leading_bits():
    key, msg = b"\x0b" * 20, b"Hi There"
    assert hmac_sha256_truncated(key, msg, 8) == 0xB0
    assert hmac_sha256_truncated(key, msg, 12) == 0xB03
    assert hmac_sha256_truncated(key, msg, 0) == 0
    with pytest.raises(ValueError):
        hmac_sha256_truncated(key, msg, 257)


def test_keyed_prf_input_encoding():
    key = SecretKey(b"k" * 16)
    nonce = Nonce(7, 0xABCDEF)
    tag = compute_mac(key, 0x1F, nonce, 32, KeyedPrf(), D=12)
    msg = b"\x00\x1f" + (7).to_bytes(8, "big") + (0xABCDEF).to_bytes(8, "big")
    want = int.from_bytes(hmac.new(key.bits, msg, hashlib.sha256).digest()[:4], "big")
    assert tag == Tag(want, 32)


def test_data_bytes():
    assert data_bytes(1, 1) == b"\x01"
    assert data_bytes(0x1FF, 9) == b"\x01\xff"
    assert data_bytes(0, 64) == bytes(8)


@pytest.mark.parametrize("mode", MODES)
def test_tag_length_and_determinism(mode):
    key = SecretKey(bytes(range(16)))
    for L in (0, 1, 7, 32, 64, 100):
        if isinstance(mode, KeyedPrf) and L > 256:
            continue
        t = compute_mac(key, 5, Nonce(1, 2), L, mode, D=8)
        assert t.length == L and 0 <= t.value < 2**L or (L == 0 and t.value == 0)
        assert t == compute_mac(key, 5, Nonce(1, 2), L, mode, D=8)


@pytest.mark.parametrize("mode", MODES)
def test_nonce_and_key_change_tag(mode):
    key = SecretKey(bytes(16))
    base = compute_mac(key, 5, Nonce(1, 2), 64, mode, D=8)
    assert compute_mac(key, 5, Nonce(2, 2), 64, mode, D=8) != base
    assert compute_mac(key, 5, Nonce(1, 3), 64, mode, D=8) != base
    assert compute_mac(SecretKey(b"\x01" + bytes(15)), 5, Nonce(1, 2), 64, mode, D=8) != base
    assert compute_mac(key, 6, Nonce(1, 2), 64, mode, D=8) != base


def test_verify_mac():
    key = SecretKey(b"secret-key-16byt")
    t = compute_mac(key, 99, Nonce(3, 4), 16, KeyedPrf(), D=8)
    assert verify_mac(key, 99, Nonce(3, 4), t, KeyedPrf(), D=8)
    assert not verify_mac(key, 99, Nonce(3, 4), Tag(t.value ^ 1, 16), KeyedPrf(), D=8)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MODES), st.integers(0, 12), st.integers(0, 255), st.integers(0, 2**64 - 1))
def test_match_keys_equals_per_key_verification(mode, L, data, rb):
    reg = KeyRegistry.generate(40, 2)
    nonce = Nonce(5, rb)
    tag = compute_mac(reg[3], data, nonce, L, mode, D=8).value
    got = match_keys(reg, data, 8, nonce, tag, L, mode)
    want = [compute_mac(k, data, nonce, L, mode, D=8).value == tag for _, k in reg]
    assert got.tolist() == want and got[3]


@pytest.mark.parametrize("mode", [IdealOracle(1), KeyedPrf()])
def test_wrong_key_acceptance_rate(mode):
    # L=8: a random wrong key reproduces a tag with probability 2^-8
    reg = KeyRegistry.generate(200, 8)
    n = hits = 0
    for r in range(300 if isinstance(mode, KeyedPrf) else 2000):
        nonce = Nonce(r, r * 7919)
        tag = compute_mac(reg[0], r, nonce, 8, mode, D=16).value
        m = match_keys(reg, r, 16, nonce, tag, 8, mode)
        hits += int(m[1:].sum())
        n += 199
    p = 2**-8
    assert abs(hits / n - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_ideal_oracle_tag_bits_uniform():
    key = SecretKey(bytes(16))
    vals = np.array([compute_mac(key, d, Nonce(0, 0), 4, IdealOracle(3), D=16).value
                     for d in range(16000)])
    counts = np.bincount(vals, minlength=16)
    chi2 = ((counts - 1000) ** 2 / 1000).sum()
    assert chi2 < 37.7  # 0.999 quantile, 15 dof
