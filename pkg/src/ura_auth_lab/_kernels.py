"""Compiled batch engine for the ideal-oracle / parametric-channel pipeline.

This is a transliteration of ``generate_round -> apply_parametric ->
inject_spoof -> authenticate_* -> score_round`` into one numba loop.  It reads
the same counter-based words as the reference path and must reproduce its
counters exactly; ``tests/test_simulate.py`` holds it to that.
"""

from __future__ import annotations

from collections import Counter

import numpy as np
from numba import njit

from . import _mix
from .auth import AuthVariant, OrderPolicy
from .stats import COUNTERS, RoundStats

_U = np.uint64
GOLDEN = _U(_mix.GOLDEN)
C1 = _U(_mix._C1)
C2 = _U(_mix._C2)
S11 = _U(11)
S27 = _U(27)
S30 = _U(30)
S31 = _U(31)
ONE = _U(1)
ZERO = _U(0)
TWO_M53 = _mix.TWO_M53
NPURPOSE = 17

_C = {name: i for i, name in enumerate(COUNTERS)}
I_ROUNDS = _C["rounds"]
I_USERS = _C["users"]
I_ACC = _C["genuineAcceptedCorrect"]
I_MISID = _C["genuineMisidentified"]
I_T1 = _C["genuineRejectedType1"]
I_T2 = _C["genuineRejectedType2"]
I_BOTH = _C["genuineRejectedBoth"]
I_NOKEY = _C["genuineRejectedNoKey"]
I_NOTDEC = _C["genuineNotDecoded"]
I_UNAVAIL = _C["genuineKeyUnavailable"]
I_MISUNAV = _C["genuineMisidentifiedKeyUnavailable"]
I_FPACC = _C["fpAccepted"]
I_FPREJ = _C["fpRejected"]
I_FPDEF = _C["fpDefinite"]
I_SPACC = _C["spoofAccepted"]
I_SPREJ = _C["spoofRejected"]
I_SPND = _C["spoofNotDecoded"]
I_DUPERR = _C["duplicateErrors"]
I_DUPRND = _C["roundsWithDuplicate"]
I_KTP = _C["kTP"]
I_KFP = _C["kFP"]
I_TRIED = _C["keysTried"]
I_TRIEDACC = _C["keysTriedAcceptedGenuine"]

# entry kinds and verdict codes
TP, FP, SP = 0, 1, 2
V_OK, V_WRONG, V_FPOK, V_COLL, V_NOKEY = 0, 1, 2, 3, 4
EXH, HEUR, ADDR = 0, 1, 2


@njit(cache=True)
def _m(z):
    z = (z ^ (z >> S30)) * C1
    z = (z ^ (z >> S27)) * C2
    return z ^ (z >> S31)


@njit(cache=True)
def _word(base, idx):
    return _m(base + _U(idx + 1) * GOLDEN)


@njit(cache=True)
def _uniform(w):
    return np.float64(w >> S11) * TWO_M53


@njit(cache=True)
def _top(w, n):
    if n == 0:
        return ZERO
    return w >> _U(64 - n)


@njit(cache=True)
def _match(kw, mw, tag, L):
    if L == 0:
        return True
    return (_m(_m(kw ^ mw) + mw) >> _U(64 - L)) == tag


@njit(cache=True)
def _tag(kw, mw, L):
    if L == 0:
        return ZERO
    return _m(_m(kw ^ mw) + mw) >> _U(64 - L)


@njit(cache=True)
def _kernel(t0, t1, s1, h0, kw, N, K, L, D, A, addressed, pdec, variant, uniform_order,
            spoof_count, counts, h_gl, h_gr, h_fkl, h_fr):
    base = np.empty(NPURPOSE, dtype=np.uint64)
    mark = np.zeros(N, dtype=np.int64)
    removed = np.zeros(N, dtype=np.bool_)
    per_key = np.zeros(N, dtype=np.int64)
    rem_ids = np.empty(K + spoof_count + 1, dtype=np.int64)

    users = np.empty(K, dtype=np.int64)
    pl = np.empty(K, dtype=np.uint64)
    leader = np.empty(K, dtype=np.int64)
    dup = np.zeros(K, dtype=np.bool_)
    dec_flag = np.zeros(K, dtype=np.bool_)

    cap = K + spoof_count
    e_pl = np.empty(cap, dtype=np.uint64)
    e_kind = np.empty(cap, dtype=np.int64)
    e_pkt = np.empty(cap, dtype=np.int64)
    s_pl = np.empty(cap, dtype=np.uint64)
    s_kind = np.empty(cap, dtype=np.int64)
    s_pkt = np.empty(cap, dtype=np.int64)
    verdict = np.empty(cap, dtype=np.int64)
    tried = np.empty(cap, dtype=np.int64)
    remk = np.empty(cap, dtype=np.int64)
    t1f = np.zeros(cap, dtype=np.bool_)
    t2f = np.zeros(cap, dtype=np.bool_)
    avail = np.ones(cap, dtype=np.bool_)
    cnt = np.zeros(cap, dtype=np.int64)
    first = np.zeros(cap, dtype=np.int64)
    mws = np.empty(cap, dtype=np.uint64)
    tags = np.empty(cap, dtype=np.uint64)

    lmask = (ONE << _U(L)) - ONE
    amask = (ONE << _U(A)) - ONE
    sh_data = _U(A + L)
    sh_addr = _U(L)
    uD = _U(D)

    for t in range(t0, t1):
        tt = _U(t + 1) * GOLDEN
        for p in range(NPURPOSE):
            base[p] = _m(s1[p] + tt)
        rb = _word(base[3], 0)
        prefix = _m(_m(h0 ^ _U(t)) ^ rb)

        # active users (Floyd), data, tags
        stamp = t + 1
        for i in range(K):
            j = N - K + i
            u = np.int64(_uniform(_word(base[1], i)) * (j + 1))
            if mark[u] == stamp:
                u = j
            mark[u] = stamp
            users[i] = u
        for k in range(K):
            data = _top(_word(base[2], k), D)
            mw = _m(_m(prefix ^ data) ^ uD)
            addr = _U(users[k]) if addressed else ZERO
            pl[k] = (data << sh_data) | (addr << sh_addr) | _tag(kw[users[k]], mw, L)

        # coinciding payloads
        order = np.argsort(pl, kind="mergesort")
        ndup_users = 0
        a = 0
        while a < K:
            b = a + 1
            while b < K and pl[order[b]] == pl[order[a]]:
                b += 1
            for x in range(a, b):
                leader[order[x]] = order[a]
                dup[order[x]] = b - a > 1
            if b - a > 1:
                ndup_users += b - a
            a = b

        # parametric erasure, then false positives by rejection
        n = 0
        for k in range(K):
            dec_flag[k] = False
            if leader[k] == k and _uniform(_word(base[4], k)) < pdec:
                dec_flag[k] = True
                e_pl[n] = pl[k]
                e_kind[n] = TP
                e_pkt[n] = k
                n += 1
        nfp0 = n
        slot = 0
        while n < K:
            w = ((_top(_word(base[5], slot), D) << sh_data)
                 | (_top(_word(base[6], slot), A) << sh_addr)
                 | _top(_word(base[7], slot), L))
            slot += 1
            taken = False
            for k in range(K):
                if pl[k] == w:
                    taken = True
                    break
            if not taken:
                for x in range(nfp0, n):
                    if e_pl[x] == w:
                        taken = True
                        break
            if not taken:
                e_pl[n] = w
                e_kind[n] = FP
                e_pkt[n] = -1
                n += 1
        srt = np.argsort(e_pl[:n])
        for x in range(n):
            s_pl[x] = e_pl[srt[x]]
            s_kind[x] = e_kind[srt[x]]
            s_pkt[x] = e_pkt[srt[x]]

        # forgeries
        nsp = 0
        for s in range(spoof_count):
            if not _uniform(_word(base[8], s)) < pdec:
                continue
            addr = ZERO
            if A > 0:
                addr = _U(np.int64(_uniform(_word(base[10], s)) * N))
            s_pl[n] = ((_top(_word(base[9], s), D) << sh_data) | (addr << sh_addr)
                       | _top(_word(base[11], s), L))
            s_kind[n] = SP
            s_pkt[n] = -1
            n += 1
            nsp += 1

        for i in range(n):
            data = s_pl[i] >> sh_data
            mws[i] = _m(_m(prefix ^ data) ^ uD)
            tags[i] = s_pl[i] & lmask
            t1f[i] = False
            t2f[i] = False
            avail[i] = True

        # authentication
        if variant == EXH:
            for i in range(n):
                cnt[i] = 0
                for u in range(N):
                    if _match(kw[u], mws[i], tags[i], L):
                        if cnt[i] == 0:
                            first[i] = u
                        cnt[i] += 1
                        per_key[u] += 1
            for i in range(n):
                user = -1
                if cnt[i] == 1 and per_key[first[i]] == 1:
                    user = first[i]
                if s_kind[i] == TP:
                    snd = users[s_pkt[i]]
                    rs = 1 if _match(kw[snd], mws[i], tags[i], L) else 0
                    t1f[i] = cnt[i] - rs > 0
                    t2f[i] = per_key[snd] - rs > 0
                    if user >= 0:
                        verdict[i] = V_OK if user == snd else V_WRONG
                if user < 0:
                    verdict[i] = V_NOKEY if cnt[i] == 0 else V_COLL
                elif s_kind[i] != TP:
                    verdict[i] = V_FPOK
                tried[i] = N
                remk[i] = N
            for i in range(n):
                if cnt[i] > 0:
                    for u in range(N):
                        per_key[u] = 0
                    break
        elif variant == HEUR:
            n_rem = N
            nrm = 0
            for j in range(n):
                remk[j] = n_rem
                user = -1
                if uniform_order:
                    best = ZERO
                    for u in range(N):
                        if removed[u] or not _match(kw[u], mws[j], tags[j], L):
                            continue
                        ow = _word(base[12], j * N + u)
                        if user < 0 or ow < best:
                            best = ow
                            user = u
                    if user >= 0:
                        c = 1
                        for u in range(N):
                            if removed[u]:
                                continue
                            ow = _word(base[12], j * N + u)
                            if ow < best or (ow == best and u < user):
                                c += 1
                        tried[j] = c
                    else:
                        tried[j] = n_rem
                else:
                    for u in range(N):
                        if not removed[u] and _match(kw[u], mws[j], tags[j], L):
                            user = u
                            break
                    if user >= 0:
                        c = user + 1
                        for x in range(nrm):
                            if rem_ids[x] < user:
                                c -= 1
                        tried[j] = c
                    else:
                        tried[j] = n_rem
                if s_kind[j] == TP:
                    snd = users[s_pkt[j]]
                    avail[j] = not removed[snd]
                    if user >= 0:
                        verdict[j] = V_OK if user == snd else V_WRONG
                if user < 0:
                    verdict[j] = V_NOKEY
                else:
                    if s_kind[j] != TP:
                        verdict[j] = V_FPOK
                    removed[user] = True
                    rem_ids[nrm] = user
                    nrm += 1
                    n_rem -= 1
            for x in range(nrm):
                removed[rem_ids[x]] = False
        else:
            for i in range(n):
                remk[i] = N
                addr = np.int64((s_pl[i] >> sh_addr) & amask)
                if addr >= N:
                    verdict[i] = V_NOKEY
                    tried[i] = 0
                    continue
                tried[i] = 1
                if _match(kw[addr], mws[i], tags[i], L):
                    if s_kind[i] == TP:
                        verdict[i] = V_OK if addr == users[s_pkt[i]] else V_WRONG
                    else:
                        verdict[i] = V_FPOK
                else:
                    verdict[i] = V_NOKEY

        # scoring
        ktp = 0
        for i in range(n):
            if s_kind[i] == TP:
                ktp += 1
        counts[I_ROUNDS] += 1
        counts[I_USERS] += K
        counts[I_DUPERR] += ndup_users
        if ndup_users > 0:
            counts[I_DUPRND] += 1
        counts[I_KTP] += ktp
        counts[I_KFP] += n - ktp - nsp
        counts[I_SPND] += spoof_count - nsp
        for k in range(K):
            if not dup[k] and not dec_flag[k]:
                counts[I_NOTDEC] += 1
        for i in range(n):
            v = verdict[i]
            counts[I_TRIED] += tried[i]
            kind = s_kind[i]
            if kind == TP:
                if dup[s_pkt[i]]:
                    continue
                h_gl[n] += 1
                if avail[i]:
                    h_gr[remk[i]] += 1
                else:
                    counts[I_UNAVAIL] += 1
                    if v == V_WRONG:
                        counts[I_MISUNAV] += 1
                if v == V_OK:
                    counts[I_ACC] += 1
                    counts[I_TRIEDACC] += tried[i]
                elif v == V_WRONG:
                    counts[I_MISID] += 1
                elif v == V_NOKEY:
                    counts[I_NOKEY] += 1
                elif t1f[i] and t2f[i]:
                    counts[I_BOTH] += 1
                elif t1f[i]:
                    counts[I_T1] += 1
                else:
                    counts[I_T2] += 1
            elif kind == FP:
                h_fkl[ktp, n] += 1
                h_fr[remk[i]] += 1
                if v == V_FPOK:
                    counts[I_FPACC] += 1
                elif v == V_NOKEY:
                    counts[I_FPDEF] += 1
                else:
                    counts[I_FPREJ] += 1
            else:
                if v == V_FPOK:
                    counts[I_SPACC] += 1
                else:
                    counts[I_SPREJ] += 1


def _hist(arr) -> Counter:
    return Counter({int(i): int(v) for i, v in enumerate(arr) if v})


def run_kernel_chunk(t0, t1, config, pdec, variant, registry, mode, master_seed,
                     spoof_count, order) -> RoundStats:
    """Trials ``t0 .. t1-1``; same contract as the reference chunk."""
    seed = master_seed & _mix.MASK64
    s1 = np.array([0] + [_mix.mix64(seed ^ _mix.purpose_salt(p)) for p in range(1, NPURPOSE)],
                  dtype=np.uint64)
    h0 = _U(_mix.mix64((mode.simulationSeed & _mix.MASK64) ^ _mix.SALT_MSG))
    N, K = config.N, config.K
    width = K + spoof_count + 1
    counts = np.zeros(len(COUNTERS), dtype=np.int64)
    h_gl = np.zeros(width, dtype=np.int64)
    h_gr = np.zeros(N + 1, dtype=np.int64)
    h_fkl = np.zeros((K + 1, width), dtype=np.int64)
    h_fr = np.zeros(N + 1, dtype=np.int64)
    code = {AuthVariant.EXHAUSTIVE: EXH, AuthVariant.HEURISTIC: HEUR, AuthVariant.ADDRESSED: ADDR}
    lay = config.layout
    _kernel(t0, t1, s1, h0, registry.oracle_words(), N, K, lay.L, lay.D, lay.A,
            config.scheme.value == "AddressMac", float(pdec), code[AuthVariant(variant)],
            OrderPolicy(order) is OrderPolicy.UNIFORM, spoof_count,
            counts, h_gl, h_gr, h_fkl, h_fr)
    st = RoundStats()
    st.counts.update({name: int(counts[i]) for i, name in enumerate(COUNTERS) if counts[i]})
    st.genuineByListLength.update(_hist(h_gl))
    st.genuineByRemaining.update(_hist(h_gr))
    st.fpByRemaining.update(_hist(h_fr))
    st.fpByKtpListLength.update(
        Counter({(int(a), int(b)): int(h_fkl[a, b]) for a, b in zip(*np.nonzero(h_fkl))}))
    return st
