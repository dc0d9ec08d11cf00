"""Pure-Python simulation kernels (reference implementation and fallback)."""

from __future__ import annotations

import heapq

import numpy as np

from ._rng import Xoshiro

PLAIN = 0
DISTINCT = 1
ARRIVE = 0
CLOSE = 1


def _combine(vecs: list[tuple], coefs: list[int], rank: int, scheme: int, q: int) -> tuple:
    k = len(vecs[0])
    out = [0] * k
    mult = 1
    for v, c in zip(vecs, coefs):
        w = c * mult
        for i in range(k):
            out[i] += w * v[i]
        if scheme == DISTINCT:
            mult *= rank + 1
    return tuple(x % q for x in out)


def _weight(v) -> int:
    return sum(1 for c in v if c)


def tree_iteration(ta, sources, n_rounds: int, window: float, skew: float, scheme: int,
                   q: int, state: np.ndarray, trace: list | None = None):
    """Run one iteration on an undirected tree.

    Each source sends a burst of n_rounds tagged probes at once. A node opens
    its window at the first arrival; when it closes, the neighbours that
    delivered anything become its sources for the rest of the iteration.
    The node combines one packet per source neighbour (the one with the
    widest support) and sends the result to the other neighbours once for
    every round it heard. Later packets from source neighbours are relayed
    alone.

    Returns (recv[M, n, k], present[M, n], channel_counts[S]); a leaf keeps
    the first packet of each round.
    """
    rng = Xoshiro(state)
    n = ta.n
    k = len(sources)
    adj_ptr = ta.adj_ptr.tolist()
    nbr = ta.adj_nbr.tolist()
    rev = ta.rev.tolist()
    fixed = ta.fixed.tolist()
    qmax = ta.qmax.tolist()
    loss = ta.loss.tolist()
    leaf = ta.is_leaf.tolist()
    is_src = [False] * n
    for s in sources:
        is_src[s] = True
    recv = np.zeros((n_rounds, n, k), dtype=np.int64)
    present = np.zeros((n_rounds, n), dtype=np.uint8)
    counts = np.zeros(len(nbr), dtype=np.int64)
    st = [0] * n  # 0 idle, 1 window open, 2 marked
    src_slot = [False] * len(nbr)
    inc: list[list] = [[] for _ in range(n)]
    ids = ta.node_ids
    heap: list = []
    seq = 0

    def send(slot, vec, r, t):
        nonlocal seq
        counts[slot] += 1
        if rng.lost(loss[slot]):
            if trace is not None:
                trace.append((t, ids[nbr[rev[slot]]], "lost", vec))
            return
        d = rng.delay(fixed[slot], qmax[slot])
        heapq.heappush(heap, (t + d, ARRIVE, seq, slot, vec, r))
        seq += 1

    def relay(w, vecs, r, t):
        if scheme == DISTINCT:
            vecs = sorted(vecs, reverse=True)
        rank = 0
        for slot in range(adj_ptr[w], adj_ptr[w + 1]):
            if src_slot[slot]:
                continue
            out = _combine(vecs, [1] * len(vecs), rank, scheme, q)
            rank += 1
            if trace is not None:
                trace.append((t, ids[w], "forward", out))
            send(slot, out, r, t)

    for i, s in enumerate(sources):
        t0 = rng.skew(skew)
        vec = tuple(1 if j == i else 0 for j in range(k))
        for r in range(n_rounds):
            if trace is not None:
                trace.append((t0, ids[s], "send", vec))
            for slot in range(adj_ptr[s], adj_ptr[s + 1]):
                send(slot, vec, r, t0)

    while heap:
        t, kind, _, a, vec, r = heapq.heappop(heap)
        if kind == ARRIVE:
            w = nbr[a]
            in_slot = rev[a]
            if leaf[w]:
                if not is_src[w] and not present[r, w]:
                    present[r, w] = 1
                    recv[r, w] = vec
                    if trace is not None:
                        trace.append((t, ids[w], "recv", vec))
                continue
            if st[w] == 2:
                if not src_slot[in_slot]:
                    if trace is not None:
                        trace.append((t, ids[w], "drop", vec))
                    continue
                if trace is not None:
                    trace.append((t, ids[w], "arrive", vec))
                relay(w, [vec], r, t)
                continue
            if st[w] == 0:
                st[w] = 1
                heapq.heappush(heap, (t + window, CLOSE, seq, w, None, -1))
                seq += 1
            src_slot[in_slot] = True
            inc[w].append((r, in_slot, vec))
            if trace is not None:
                trace.append((t, ids[w], "arrive", vec))
        else:
            w = a
            st[w] = 2
            rep: dict[int, tuple] = {}
            rounds = set()
            for rr, sl, v in inc[w]:
                rounds.add(rr)
                if sl not in rep or _weight(v) > _weight(rep[sl]):
                    rep[sl] = v
            vecs = list(rep.values())
            for rr in sorted(rounds):
                relay(w, vecs, rr, t)
            inc[w] = []
    rng.save()
    return recv, present, counts


def dag_experiment(da, starts, window: float, skew: float, scheme: int, q: int,
                   state: np.ndarray, trace: list | None = None):
    """One probe experiment on a routed DAG.

    Returns (recv[R, k], present[R], link_counts[L]).
    """
    rng = Xoshiro(state)
    out = _dag_run(da, list(starts), window, skew, scheme, q, rng, trace)
    rng.save()
    return out


def _dag_run(da, starts, window, skew, scheme, q, rng, trace):
    n = da.n
    k = da.mask.shape[1]
    out_ptr = da.out_ptr.tolist()
    out_link = da.out_link.tolist()
    in_ptr = da.in_ptr.tolist()
    in_link = da.in_link.tolist()
    dst = da.link_dst.tolist()
    fixed = da.fixed.tolist()
    qmax = da.qmax.tolist()
    loss = da.loss.tolist()
    mask = da.mask.tolist()
    coef = da.in_coef.tolist()
    recv_of = da.recv_of_node.tolist()
    ids = da.node_ids
    n_recv = len(da.receivers)
    recv = np.zeros((n_recv, k), dtype=np.int64)
    present = np.zeros(n_recv, dtype=np.uint8)
    counts = np.zeros(len(dst), dtype=np.int64)
    st = [0] * n
    got: dict[int, dict[int, tuple]] = {}
    heap: list = []
    seq = 0

    def send(link, vec, t):
        nonlocal seq
        counts[link] += 1
        if rng.lost(loss[link]):
            if trace is not None:
                trace.append((t, ids[dst[link]], "lost", vec))
            return
        d = rng.delay(fixed[link], qmax[link])
        heapq.heappush(heap, (t + d, ARRIVE, seq, link, vec))
        seq += 1

    def fire(w, t):
        st[w] = 2
        arrived = got[w]
        links = [lk for lk in in_link[in_ptr[w]:in_ptr[w + 1]] if lk in arrived]
        vecs = [arrived[lk] for lk in links]
        coefs = [coef[lk] for lk in links]
        base = _combine(vecs, coefs, 0, scheme, q)
        if recv_of[w] >= 0:
            recv[recv_of[w]] = base
            present[recv_of[w]] = 1
            if trace is not None:
                trace.append((t, ids[w], "recv", base))
            return
        support = [base[i] != 0 for i in range(k)]
        for rank, lk in enumerate(out_link[out_ptr[w]:out_ptr[w + 1]]):
            m = mask[lk]
            if any(m[i] and support[i] for i in range(k)):
                vec = _combine(vecs, coefs, rank, scheme, q) if scheme == DISTINCT else base
                if trace is not None:
                    trace.append((t, ids[w], "forward", vec))
                send(lk, vec, t)

    for i in range(k):
        s = int(da.sources[i])
        t0 = starts[i] + rng.skew(skew)
        vec = tuple(1 if j == i else 0 for j in range(k))
        st[s] = 2
        if trace is not None:
            trace.append((t0, ids[s], "send", vec))
        for lk in out_link[out_ptr[s]:out_ptr[s + 1]]:
            if mask[lk][i]:
                send(lk, vec, t0)

    while heap:
        t, kind, _, a, vec = heapq.heappop(heap)
        if kind == ARRIVE:
            w = dst[a]
            if st[w] == 2:
                if trace is not None:
                    trace.append((t, ids[w], "drop", vec))
                continue
            if st[w] == 0:
                st[w] = 1
                got[w] = {}
                heapq.heappush(heap, (t + window, CLOSE, seq, w, None))
                seq += 1
            got[w][a] = vec
            if trace is not None:
                trace.append((t, ids[w], "arrive", vec))
            if len(got[w]) == in_ptr[w + 1] - in_ptr[w]:
                fire(w, t)
        elif st[a] == 1:
            fire(a, t)
    return recv, present, counts


def update_pairs(recv, present, first: bool, lossy: bool, pair_a, pair_b, ptype, done) -> None:
    """Advance every pair's 2-by-2 decision state by one experiment."""
    for p in range(len(pair_a)):
        if done[p]:
            continue
        a = pair_a[p]
        b = pair_b[p]
        c12 = int(recv[a, 1])
        c22 = int(recv[b, 1])
        if lossy:
            if not (present[a] and present[b]):
                continue
            if c22 > c12:
                if ptype[p] != 3:
                    ptype[p] = 2
                else:
                    ptype[p] = 4
                    done[p] = 1
            elif c22 < c12:
                if ptype[p] != 2:
                    ptype[p] = 3
                else:
                    ptype[p] = 4
                    done[p] = 1
            elif ptype[p] == 0 and (recv[a] == recv[b]).all():
                ptype[p] = 1
        else:
            same = present[a] == present[b] and (recv[a] == recv[b]).all()
            if first and c22 > c12:
                ptype[p] = 2
                done[p] = 1
            elif first and c22 < c12:
                ptype[p] = 3
                done[p] = 1
            elif not same:
                ptype[p] = 4
                done[p] = 1
            else:
                ptype[p] = 1


def dag_trial(da, count_max: int, lossy: bool, window: float, frac: float, skew: float,
              scheme: int, q: int, state: np.ndarray, checkpoints=None):
    """Shared-stream 2-by-2 inference for every receiver pair.

    Returns (types[C, P], experiments_used) where row c is the pair-type
    vector after checkpoints[c] experiments (default: only count_max).
    """
    rng = Xoshiro(state)
    n_recv = len(da.receivers)
    pair_a, pair_b = np.triu_indices(n_recv, 1)
    n_pairs = len(pair_a)
    ptype = np.zeros(n_pairs, dtype=np.int64)
    done = np.zeros(n_pairs, dtype=np.uint8)
    if checkpoints is None:
        checkpoints = [count_max]
    checkpoints = list(checkpoints)
    snaps = np.zeros((len(checkpoints), n_pairs), dtype=np.int64)
    used = 0
    for e in range(count_max):
        u = 0.0 if e == 0 else window * (frac + (1.0 - frac) * rng.uniform())
        recv, present, _ = _dag_run(da, [0.0, u], window, skew, scheme, q, rng, None)
        update_pairs(recv, present, e == 0, lossy, pair_a, pair_b, ptype, done)
        used = e + 1
        for c, cp in enumerate(checkpoints):
            if cp == used:
                snaps[c] = ptype
        if done.all():
            break
    for c, cp in enumerate(checkpoints):
        if cp > used:
            snaps[c] = ptype
    rng.save()
    return snaps, used
