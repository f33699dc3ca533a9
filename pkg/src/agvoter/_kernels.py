"""Jitted simulation loops.

All kernels mutate ``states`` and ``counts`` in place, advance at most
``budget`` rounds, and return relative round indices (1-based within the
call, ``-1`` when an event did not occur in this call):

``(status, rounds, t_agnostic, t_consensus, last_gain, ...)``

``status`` is ``STATUS_BUDGET`` when the budget ran out, ``STATUS_STOPPED``
when the requested stop condition was met, ``STATUS_FROZEN`` when no
future round can change the state (only detectable by the active-set
kernel), and ``STATUS_DENSE`` when the active set outgrew ``dense_limit``
and a full sweep is the cheaper strategy.  ``last_gain`` is the last round
in which the agnostic count dropped.  The caller owns absolute round
accounting across repeated calls.

``counts`` has length ``k + 1`` with slot 0 counting agnostic nodes.
Stop modes: 0 stops once no agnostic nodes remain, 1 stops at consensus,
2 runs until the budget but still halts at consensus because a
monochromatic state can never change again.
"""

import numpy as np
from numba import njit

STATUS_BUDGET = 0
STATUS_STOPPED = 1
STATUS_FROZEN = 2
STATUS_DENSE = 3

STOP_ALL_GNOSTIC = 0
STOP_CONSENSUS = 1
STOP_ROUND_CAP = 2

PROTO_PULL = 1
PROTO_PUSH = 2
PROTO_PUSH_PULL = 3


@njit(cache=True, inline="always")
def _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, v, rng):
    # One out-neighbour of v, drawn by row weight, one uniform per call.
    lo = indptr[v]
    hi = indptr[v + 1]
    deg = hi - lo
    r = rng.random()
    if row_uniform[v]:
        j = lo + np.int64(r * deg)
        if j >= hi:
            j = hi - 1
        return indices[j]
    if deg > 8 and alias_prob.size > 0:
        x = r * deg
        j = np.int64(x)
        if j >= deg:
            j = deg - 1
        if x - j < alias_prob[lo + j]:
            return indices[lo + j]
        return indices[alias_idx[lo + j]]
    j = lo
    while j < hi - 1 and row_cum[j] <= r:
        j += 1
    return indices[j]


@njit(cache=True, inline="always")
def _consensus_colour(counts, n):
    for c in range(1, counts.shape[0]):
        if counts[c] == n:
            return c
    return 0


@njit(cache=True)
def sync_sweep(
    indptr,
    indices,
    row_cum,
    row_uniform,
    alias_prob,
    alias_idx,
    states,
    scratch,
    counts,
    budget,
    stop_mode,
    rng,
):
    """One full synchronous sweep per round; every node pulls simultaneously."""
    n = states.shape[0]
    t_a = np.int64(-1)
    t_c = np.int64(-1)
    last_gain = np.int64(0)
    rounds = np.int64(0)
    status = STATUS_BUDGET
    src = states
    dst = scratch
    flipped = False
    for _ in range(budget):
        prev_agnostic = counts[0]
        for v in range(n):
            u = _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, v, rng)
            su = src[u]
            sv = src[v]
            if su != 0 and su != sv:
                dst[v] = su
                counts[sv] -= 1
                counts[su] += 1
            else:
                dst[v] = sv
        rounds += 1
        tmp = src
        src = dst
        dst = tmp
        flipped = not flipped
        if counts[0] < prev_agnostic:
            last_gain = rounds
        if counts[0] == 0:
            if t_a < 0:
                t_a = rounds
            if t_c < 0 and _consensus_colour(counts, n) != 0:
                t_c = rounds
            if t_c >= 0 or stop_mode == STOP_ALL_GNOSTIC:
                status = STATUS_STOPPED
                break
    if flipped:
        states[:] = src
    return status, rounds, t_a, t_c, last_gain


@njit(cache=True)
def build_neighbour_counts(indptr, indices, states, k):
    """Per-node counts of out-neighbour states, shape (n, k + 1)."""
    n = states.shape[0]
    nb = np.zeros((n, k + 1), dtype=np.int32)
    for v in range(n):
        for e in range(indptr[v], indptr[v + 1]):
            nb[v, states[indices[e]]] += 1
    return nb


@njit(cache=True, inline="always")
def _is_active(indptr, states, nb, v):
    # A node can change next round iff some out-neighbour is gnostic with a
    # state different from its own.
    deg = indptr[v + 1] - indptr[v]
    s = states[v]
    if s == 0:
        return deg - nb[v, 0] > 0
    return deg - nb[v, 0] - nb[v, s] > 0


@njit(cache=True)
def init_active(indptr, states, nb, active_pos, active_list):
    n = states.shape[0]
    m = np.int64(0)
    for v in range(n):
        if _is_active(indptr, states, nb, v):
            active_pos[v] = m
            active_list[m] = v
            m += 1
        else:
            active_pos[v] = -1
    return m


@njit(cache=True, inline="always")
def _refresh_active(indptr, states, nb, active_pos, active_list, active_len, v):
    want = _is_active(indptr, states, nb, v)
    pos = active_pos[v]
    if want and pos < 0:
        active_pos[v] = active_len
        active_list[active_len] = v
        return active_len + 1
    if not want and pos >= 0:
        last = active_list[active_len - 1]
        active_list[pos] = last
        active_pos[last] = pos
        active_pos[v] = -1
        return active_len - 1
    return active_len


@njit(cache=True)
def sync_active(
    indptr,
    indices,
    row_cum,
    row_uniform,
    alias_prob,
    alias_idx,
    rev_indptr,
    rev_indices,
    states,
    counts,
    nb,
    active_pos,
    active_list,
    active_len,
    change_node,
    change_state,
    budget,
    stop_mode,
    dense_limit,
    rng,
):
    """Synchronous rounds that only sample nodes able to change.

    Equivalent in law to :func:`sync_sweep`: nodes that cannot change this
    round would keep their state no matter what they draw, so skipping their
    draws leaves the round distribution untouched.  Returns ``STATUS_DENSE``
    once the active set exceeds ``dense_limit``; per-node bookkeeping then
    costs more than the sweep's plain draws, so the caller should switch.
    """
    n = states.shape[0]
    t_a = np.int64(-1)
    t_c = np.int64(-1)
    last_gain = np.int64(0)
    rounds = np.int64(0)
    status = STATUS_BUDGET
    for _ in range(budget):
        m = active_len
        if m == 0:
            status = STATUS_FROZEN
            break
        prev_agnostic = counts[0]
        nchg = np.int64(0)
        for i in range(m):
            v = active_list[i]
            u = _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, v, rng)
            su = states[u]
            if su != 0 and su != states[v]:
                change_node[nchg] = v
                change_state[nchg] = su
                nchg += 1
        rounds += 1
        for i in range(nchg):
            v = change_node[i]
            new = change_state[i]
            old = states[v]
            states[v] = new
            counts[old] -= 1
            counts[new] += 1
            for e in range(rev_indptr[v], rev_indptr[v + 1]):
                w = rev_indices[e]
                nb[w, old] -= 1
                nb[w, new] += 1
                active_len = _refresh_active(
                    indptr, states, nb, active_pos, active_list, active_len, w
                )
            active_len = _refresh_active(
                indptr, states, nb, active_pos, active_list, active_len, v
            )
        if nchg == 0:
            continue
        if counts[0] < prev_agnostic:
            last_gain = rounds
        if counts[0] == 0:
            if t_a < 0:
                t_a = rounds
            if t_c < 0 and _consensus_colour(counts, n) != 0:
                t_c = rounds
            if t_c >= 0 or stop_mode == STOP_ALL_GNOSTIC:
                status = STATUS_STOPPED
                break
        if active_len > dense_limit:
            status = STATUS_DENSE
            break
    return status, rounds, t_a, t_c, last_gain, active_len


@njit(cache=True)
def run_async(
    indptr,
    indices,
    row_cum,
    row_uniform,
    alias_prob,
    alias_idx,
    states,
    counts,
    agn_pos,
    agn_list,
    agn_len,
    gno_list,
    gno_len,
    proto,
    budget,
    stop_mode,
    rng,
):
    """Asynchronous rounds: pull, push, or combined push-pull.

    The agnostic/gnostic membership lists are maintained only for the
    push-pull protocol; pure pull and push ignore them.
    """
    n = states.shape[0]
    t_a = np.int64(-1)
    t_c = np.int64(-1)
    last_gain = np.int64(0)
    rounds = np.int64(0)
    status = STATUS_BUDGET
    for _ in range(budget):
        target = np.int64(-1)
        new = np.int8(0)
        target2 = np.int64(-1)
        new2 = np.int8(0)
        if proto == PROTO_PULL:
            v = rng.integers(0, n)
            u = _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, v, rng)
            su = states[u]
            if su != 0 and su != states[v]:
                target = v
                new = su
        elif proto == PROTO_PUSH:
            v = rng.integers(0, n)
            sv = states[v]
            if sv != 0:
                u = _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, v, rng)
                if states[u] != sv:
                    target = u
                    new = sv
        else:
            # Both selections use the membership at the start of the round;
            # the pull is applied first, the push can overwrite it.
            g = gno_list[rng.integers(0, gno_len)]
            if agn_len > 0:
                a = agn_list[rng.integers(0, agn_len)]
                ua = _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, a, rng)
                if states[ua] != 0:
                    target = a
                    new = states[ua]
            ug = _pick(indptr, indices, row_cum, row_uniform, alias_prob, alias_idx, g, rng)
            push_colour = states[g]
            if target == ug:
                if push_colour != new:
                    target2 = ug
                    new2 = push_colour
            elif states[ug] != push_colour:
                target2 = ug
                new2 = push_colour
        rounds += 1
        prev_agnostic = counts[0]
        changed = False
        for step in range(2):
            if step == 0:
                x = target
                s_new = new
            else:
                x = target2
                s_new = new2
            if x < 0 or states[x] == s_new:
                continue
            old = states[x]
            states[x] = s_new
            counts[old] -= 1
            counts[s_new] += 1
            changed = True
            if proto == PROTO_PUSH_PULL and old == 0:
                pos = agn_pos[x]
                last = agn_list[agn_len - 1]
                agn_list[pos] = last
                agn_pos[last] = pos
                agn_pos[x] = -1
                agn_len -= 1
                gno_list[gno_len] = x
                gno_len += 1
        if not changed:
            continue
        if counts[0] < prev_agnostic:
            last_gain = rounds
        if counts[0] == 0:
            if t_a < 0:
                t_a = rounds
            if t_c < 0 and _consensus_colour(counts, n) != 0:
                t_c = rounds
            if t_c >= 0 or stop_mode == STOP_ALL_GNOSTIC:
                status = STATUS_STOPPED
                break
    return status, rounds, t_a, t_c, last_gain, agn_len, gno_len


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + (
        (x >> np.uint64(2)) & np.uint64(0x3333333333333333)
    )
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return np.int64((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True)
def pack_ring_bits(states, target):
    # Bit v of word v >> 6 is 1 iff node v holds ``target``.
    n = states.shape[0]
    nwords = (n + 63) // 64
    bits = np.zeros(nwords, dtype=np.uint64)
    for v in range(n):
        if states[v] == target:
            bits[v >> 6] |= np.uint64(1) << np.uint64(v & 63)
    return bits


@njit(cache=True)
def unpack_ring_bits(bits, states, target, other):
    n = states.shape[0]
    for v in range(n):
        if (bits[v >> 6] >> np.uint64(v & 63)) & np.uint64(1):
            states[v] = target
        else:
            states[v] = other


@njit(cache=True)
def count_ring_bits(bits, nwords):
    total = np.int64(0)
    for i in range(nwords):
        total += _popcount(bits[i])
    return total


@njit(cache=True)
def ring_sync(bits, scratch, n, budget, rng):
    """Two-colour synchronous rounds on a uniform ring, 64 nodes per word.

    Only valid once every node is gnostic and the graph is a ring with both
    neighbours equally weighted: each node then copies one of its two ring
    neighbours with probability 1/2, which is one random bit per node.  Word
    shifts with ring wrap apply a whole round in a few dozen operations.

    Returns ``(status, rounds, t_consensus)``; consensus halts the kernel in
    every stop mode because a monochromatic ring can never change.
    """
    nwords = (n + 63) // 64
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    one = np.uint64(1)
    tail_bits = n - 64 * (nwords - 1)
    if tail_bits == 64:
        tail_mask = full
    else:
        tail_mask = (one << np.uint64(tail_bits)) - one
    top_pos = np.uint64(tail_bits - 1)
    t_c = np.int64(-1)
    rounds = np.int64(0)
    status = STATUS_BUDGET
    for _ in range(budget):
        wrap_hi = (bits[nwords - 1] >> top_pos) & one
        wrap_lo = bits[0] & one
        if nwords == 1:
            b = bits[0]
            left = ((b << one) | wrap_hi) & tail_mask
            right = (b >> one) | (wrap_lo << top_pos)
            m = rng.integers(0, full, dtype=np.uint64, endpoint=True)
            scratch[0] = ((m & left) | (~m & right)) & tail_mask
        else:
            for i in range(nwords):
                b = bits[i]
                if i == 0:
                    carry = wrap_hi
                else:
                    carry = bits[i - 1] >> np.uint64(63)
                left = (b << one) | carry
                if i == nwords - 1:
                    right = (b >> one) | (wrap_lo << top_pos)
                else:
                    right = (b >> one) | ((bits[i + 1] & one) << np.uint64(63))
                m = rng.integers(0, full, dtype=np.uint64, endpoint=True)
                scratch[i] = (m & left) | (~m & right)
            scratch[nwords - 1] &= tail_mask
        rounds += 1
        all_zero = True
        all_one = True
        for i in range(nwords):
            w = scratch[i]
            bits[i] = w
            if w != 0:
                all_zero = False
            if i < nwords - 1:
                if w != full:
                    all_one = False
            elif w != tail_mask:
                all_one = False
        if all_zero or all_one:
            t_c = rounds
            status = STATUS_STOPPED
            break
    return status, rounds, t_c
