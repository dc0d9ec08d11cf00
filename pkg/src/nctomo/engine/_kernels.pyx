# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels; same event order and RNG stream as _pykernels."""

import numpy as np

from libc.math cimport log, exp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free, realloc

cdef int PLAIN = 0
cdef int DISTINCT = 1
cdef double INV_2_53 = 1.0 / 9007199254740992.0
cdef double TRUNC_C = 1.0 - exp(-2.0)


cdef struct Rng:
    uint64_t s0, s1, s2, s3


cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t rng_next(Rng* r) nogil:
    cdef uint64_t result = rotl(r.s1 * 5, 7) * 9
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = rotl(r.s3, 45)
    return result


cdef inline double rng_uniform(Rng* r) nogil:
    return <double>(rng_next(r) >> 11) * INV_2_53


cdef inline double rng_delay(Rng* r, double fixed, double qmax) nogil:
    if qmax > 0.0:
        return fixed - 0.5 * qmax * log(1.0 - rng_uniform(r) * TRUNC_C)
    return fixed


cdef inline bint rng_lost(Rng* r, double p) nogil:
    if p > 0.0:
        return rng_uniform(r) < p
    return False


cdef inline double rng_skew(Rng* r, double bound) nogil:
    if bound > 0.0:
        return (rng_uniform(r) - 0.5) * bound
    return 0.0


cdef Rng load_rng(uint64_t[::1] st):
    cdef Rng r
    r.s0 = st[0]; r.s1 = st[1]; r.s2 = st[2]; r.s3 = st[3]
    return r


cdef void save_rng(Rng* r, uint64_t[::1] st):
    st[0] = r.s0; st[1] = r.s1; st[2] = r.s2; st[3] = r.s3


# ------------------------------------------------------------ event heap

cdef struct Ev:
    double t
    int kind
    int64_t seq
    int64_t a
    int64_t v
    int64_t r    # probe round (trees); 0 for DAG experiments


cdef struct Heap:
    Ev* data
    int64_t size
    int64_t cap


cdef inline bint ev_less(Ev* x, Ev* y) nogil:
    if x.t != y.t:
        return x.t < y.t
    if x.kind != y.kind:
        return x.kind < y.kind
    return x.seq < y.seq


cdef void heap_push(Heap* h, Ev e) nogil:
    cdef int64_t i, p
    cdef Ev tmp
    if h.size == h.cap:
        h.cap = h.cap * 2 + 16
        h.data = <Ev*> realloc(h.data, h.cap * sizeof(Ev))
    i = h.size
    h.data[i] = e
    h.size += 1
    while i > 0:
        p = (i - 1) >> 1
        if ev_less(&h.data[i], &h.data[p]):
            tmp = h.data[i]; h.data[i] = h.data[p]; h.data[p] = tmp
            i = p
        else:
            break


cdef Ev heap_pop(Heap* h) nogil:
    cdef Ev top = h.data[0]
    cdef int64_t i = 0, l, r, m
    cdef Ev tmp
    h.size -= 1
    h.data[0] = h.data[h.size]
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < h.size and ev_less(&h.data[l], &h.data[m]):
            m = l
        if r < h.size and ev_less(&h.data[r], &h.data[m]):
            m = r
        if m == i:
            break
        tmp = h.data[i]; h.data[i] = h.data[m]; h.data[m] = tmp
        i = m
    return top


# ------------------------------------------------------------ vector pool

cdef struct Pool:
    int64_t* data
    int64_t size
    int64_t cap
    int k


cdef int64_t pool_new(Pool* p) nogil:
    cdef int64_t i
    if p.size == p.cap:
        p.cap = p.cap * 2 + 16
        p.data = <int64_t*> realloc(p.data, p.cap * p.k * sizeof(int64_t))
    for i in range(p.k):
        p.data[p.size * p.k + i] = 0
    p.size += 1
    return p.size - 1


cdef inline int64_t* pool_row(Pool* p, int64_t idx) nogil:
    return p.data + idx * p.k


cdef int vec_cmp(Pool* p, int64_t a, int64_t b) nogil:
    cdef int i
    cdef int64_t* x = pool_row(p, a)
    cdef int64_t* y = pool_row(p, b)
    for i in range(p.k):
        if x[i] != y[i]:
            return 1 if x[i] > y[i] else -1
    return 0


cdef int64_t combine(Pool* p, int64_t* idx, int64_t* coefs, int cnt, int rank, int scheme,
                     int64_t q) nogil:
    cdef int64_t o = pool_new(p)
    cdef int64_t mult = 1, w
    cdef int j, i
    cdef int64_t* out
    cdef int64_t* v
    for j in range(cnt):
        w = coefs[j] * mult
        out = pool_row(p, o)
        v = pool_row(p, idx[j])
        for i in range(p.k):
            out[i] += w * v[i]
        if scheme == DISTINCT:
            mult *= rank + 1
    out = pool_row(p, o)
    for i in range(p.k):
        out[i] = out[i] % q
    return o


# ------------------------------------------------------------ trees

cdef int vec_weight(Pool* p, int64_t a) nogil:
    cdef int i, c = 0
    cdef int64_t* x = pool_row(p, a)
    for i in range(p.k):
        if x[i] != 0:
            c += 1
    return c


cdef void sort_desc(Pool* p, int64_t* idx, int64_t cnt) nogil:
    cdef int64_t i, j, tmp
    for i in range(1, cnt):
        j = i
        while j > 0 and vec_cmp(p, idx[j - 1], idx[j]) < 0:
            tmp = idx[j]; idx[j] = idx[j - 1]; idx[j - 1] = tmp
            j -= 1


cdef void tree_relay(Pool* pool, Heap* heap, Rng* rng, int64_t w, int64_t* vecs, int cnt,
                     int64_t r, double t, int64_t[::1] adj_ptr, unsigned char[::1] src_slot,
                     double[::1] fixed, double[::1] qmax, double[::1] loss,
                     int64_t[::1] counts, int64_t* ones, int scheme, int64_t q, int64_t* seq):
    cdef int64_t slot, out
    cdef int rank = 0
    cdef double d
    if scheme == DISTINCT:
        sort_desc(pool, vecs, cnt)
    for slot in range(adj_ptr[w], adj_ptr[w + 1]):
        if src_slot[slot]:
            continue
        out = combine(pool, vecs, ones, cnt, rank, scheme, q)
        rank += 1
        counts[slot] += 1
        if rng_lost(rng, loss[slot]):
            continue
        d = rng_delay(rng, fixed[slot], qmax[slot])
        heap_push(heap, Ev(t + d, 0, seq[0], slot, out, r))
        seq[0] += 1


def tree_iteration(ta, sources, int n_rounds, double window, double skew, int scheme,
                   int64_t q, uint64_t[::1] state, trace=None):
    if trace is not None:
        raise ValueError("event traces are only produced by the Python backend")
    cdef int64_t n = len(ta.node_ids)
    cdef int k = len(sources)
    cdef int64_t[::1] adj_ptr = ta.adj_ptr
    cdef int64_t[::1] nbr = ta.adj_nbr
    cdef int64_t[::1] rev = ta.rev
    cdef double[::1] fixed = ta.fixed
    cdef double[::1] qmax = ta.qmax
    cdef double[::1] loss = ta.loss
    cdef unsigned char[::1] leaf = ta.is_leaf
    cdef int64_t n_slots = nbr.shape[0]
    cdef int64_t[::1] srcs = np.asarray(sources, dtype=np.int64)
    recv_np = np.zeros((n_rounds, n, k), dtype=np.int64)
    present_np = np.zeros((n_rounds, n), dtype=np.uint8)
    counts_np = np.zeros(n_slots, dtype=np.int64)
    cdef int64_t[:, :, ::1] recv = recv_np
    cdef unsigned char[:, ::1] present = present_np
    cdef int64_t[::1] counts = counts_np
    is_src_np = np.zeros(n, dtype=np.uint8)
    src_slot_np = np.zeros(n_slots, dtype=np.uint8)
    st_np = np.zeros(n, dtype=np.uint8)
    inc_cnt_np = np.zeros(n, dtype=np.int64)
    # window buffer: per node, room for every (neighbour, round) arrival
    inc_v_np = np.zeros(n_slots * n_rounds + 1, dtype=np.int64)
    inc_s_np = np.zeros(n_slots * n_rounds + 1, dtype=np.int64)
    inc_r_np = np.zeros(n_slots * n_rounds + 1, dtype=np.int64)
    rep_np = np.full(n_slots, -1, dtype=np.int64)
    order_np = np.zeros(n_slots + 1, dtype=np.int64)
    vecs_np = np.zeros(n_slots + 1, dtype=np.int64)
    seen_np = np.zeros(n_rounds, dtype=np.uint8)
    ones_np = np.ones(n_slots + 1, dtype=np.int64)
    cdef unsigned char[::1] is_src = is_src_np
    cdef unsigned char[::1] src_slot = src_slot_np
    cdef unsigned char[::1] st = st_np
    cdef int64_t[::1] inc_cnt = inc_cnt_np
    cdef int64_t[::1] inc_v = inc_v_np
    cdef int64_t[::1] inc_s = inc_s_np
    cdef int64_t[::1] inc_r = inc_r_np
    cdef int64_t[::1] rep = rep_np
    cdef int64_t[::1] order = order_np
    cdef int64_t[::1] vecs = vecs_np
    cdef unsigned char[::1] seen = seen_np
    cdef int64_t[::1] ones = ones_np
    cdef Rng rng = load_rng(state)
    cdef Heap heap
    cdef Pool pool
    cdef Ev e
    cdef int64_t r, i, j, s, slot, w, in_slot, seq = 0, v, base, n_ord, sl
    cdef double t0, d
    heap.data = NULL; heap.size = 0; heap.cap = 0
    pool.data = NULL; pool.size = 0; pool.cap = 0; pool.k = k
    for i in range(k):
        is_src[srcs[i]] = 1
    try:
        for i in range(k):
            s = srcs[i]
            t0 = rng_skew(&rng, skew)
            v = pool_new(&pool)
            pool_row(&pool, v)[i] = 1
            for r in range(n_rounds):
                for slot in range(adj_ptr[s], adj_ptr[s + 1]):
                    counts[slot] += 1
                    if rng_lost(&rng, loss[slot]):
                        continue
                    d = rng_delay(&rng, fixed[slot], qmax[slot])
                    heap_push(&heap, Ev(t0 + d, 0, seq, slot, v, r))
                    seq += 1
        while heap.size > 0:
            e = heap_pop(&heap)
            if e.kind == 0:
                w = nbr[e.a]
                in_slot = rev[e.a]
                if leaf[w]:
                    if not is_src[w] and not present[e.r, w]:
                        present[e.r, w] = 1
                        for i in range(k):
                            recv[e.r, w, i] = pool_row(&pool, e.v)[i]
                    continue
                if st[w] == 2:
                    if src_slot[in_slot]:
                        vecs[0] = e.v
                        tree_relay(&pool, &heap, &rng, w, &vecs[0], 1, e.r, e.t, adj_ptr,
                                   src_slot, fixed, qmax, loss, counts, &ones[0], scheme, q, &seq)
                    continue
                if st[w] == 0:
                    st[w] = 1
                    heap_push(&heap, Ev(e.t + window, 1, seq, w, -1, 0))
                    seq += 1
                src_slot[in_slot] = 1
                j = adj_ptr[w] * n_rounds + inc_cnt[w]
                inc_v[j] = e.v
                inc_s[j] = in_slot
                inc_r[j] = e.r
                inc_cnt[w] += 1
            else:
                w = e.a
                st[w] = 2
                base = adj_ptr[w] * n_rounds
                n_ord = 0
                seen[:] = 0
                for j in range(base, base + inc_cnt[w]):
                    sl = inc_s[j]
                    seen[inc_r[j]] = 1
                    if rep[sl] < 0:
                        rep[sl] = inc_v[j]
                        order[n_ord] = sl
                        n_ord += 1
                    elif vec_weight(&pool, inc_v[j]) > vec_weight(&pool, rep[sl]):
                        rep[sl] = inc_v[j]
                for r in range(n_rounds):
                    if not seen[r]:
                        continue
                    for i in range(n_ord):
                        vecs[i] = rep[order[i]]
                    tree_relay(&pool, &heap, &rng, w, &vecs[0], <int>n_ord, r, e.t, adj_ptr,
                               src_slot, fixed, qmax, loss, counts, &ones[0], scheme, q, &seq)
                inc_cnt[w] = 0
    finally:
        free(heap.data)
        free(pool.data)
    save_rng(&rng, state)
    return recv_np, present_np, counts_np


# ------------------------------------------------------------ DAGs

cdef class _Dag:
    cdef int64_t n, L, k, R
    cdef int64_t[::1] out_ptr, out_link, in_ptr, in_link, dst, coef, recv_of, sources
    cdef double[::1] fixed, qmax, loss
    cdef unsigned char[:, ::1] mask
    # scratch
    cdef unsigned char[::1] st
    cdef int64_t[::1] got, arrived
    cdef int64_t[::1] idx_buf, coef_buf
    cdef int64_t[::1] support

    def __init__(self, da):
        self.n = len(da.node_ids)
        self.L = len(da.link_src)
        self.k = da.mask.shape[1]
        self.R = len(da.receivers)
        self.out_ptr = da.out_ptr
        self.out_link = da.out_link
        self.in_ptr = da.in_ptr
        self.in_link = da.in_link
        self.dst = da.link_dst
        self.coef = da.in_coef
        self.recv_of = da.recv_of_node
        self.sources = da.sources
        self.fixed = da.fixed
        self.qmax = da.qmax
        self.loss = da.loss
        self.mask = da.mask
        self.st = np.zeros(self.n, dtype=np.uint8)
        self.got = np.zeros(self.n, dtype=np.int64)
        self.arrived = np.zeros(self.L, dtype=np.int64)
        self.idx_buf = np.zeros(self.L + 1, dtype=np.int64)
        self.coef_buf = np.zeros(self.L + 1, dtype=np.int64)
        self.support = np.zeros(self.k, dtype=np.int64)


cdef void dag_send(_Dag g, Heap* heap, Rng* rng, int64_t* seq, int64_t link, int64_t v, double t,
                   int64_t[::1] counts):
    cdef double d
    counts[link] += 1
    if rng_lost(rng, g.loss[link]):
        return
    d = rng_delay(rng, g.fixed[link], g.qmax[link])
    heap_push(heap, Ev(t + d, 0, seq[0], link, v, 0))
    seq[0] += 1


cdef void dag_fire(_Dag g, int64_t w, double t, Heap* heap, Pool* pool, Rng* rng, int64_t* seq,
                   int scheme, int64_t q, int64_t[:, ::1] recv, unsigned char[::1] present,
                   int64_t[::1] counts):
    cdef int64_t j, lk, cnt = 0, base, vec, rank, i
    cdef bint hit
    g.st[w] = 2
    for j in range(g.in_ptr[w], g.in_ptr[w + 1]):
        lk = g.in_link[j]
        if g.arrived[lk] >= 0:
            g.idx_buf[cnt] = g.arrived[lk]
            g.coef_buf[cnt] = g.coef[lk]
            cnt += 1
    base = combine(pool, &g.idx_buf[0], &g.coef_buf[0], <int>cnt, 0, scheme, q)
    if g.recv_of[w] >= 0:
        for i in range(g.k):
            recv[g.recv_of[w], i] = pool_row(pool, base)[i]
        present[g.recv_of[w]] = 1
        return
    for i in range(g.k):
        g.support[i] = pool_row(pool, base)[i] != 0
    rank = 0
    for j in range(g.out_ptr[w], g.out_ptr[w + 1]):
        lk = g.out_link[j]
        hit = False
        for i in range(g.k):
            if g.mask[lk, i] and g.support[i]:
                hit = True
                break
        if hit:
            if scheme == DISTINCT:
                vec = combine(pool, &g.idx_buf[0], &g.coef_buf[0], <int>cnt, <int>rank, scheme, q)
            else:
                vec = base
            dag_send(g, heap, rng, seq, lk, vec, t, counts)
        rank += 1


cdef void dag_run(_Dag g, double* starts, double window, double skew, int scheme, int64_t q,
                  Rng* rng, Heap* heap, Pool* pool, int64_t[:, ::1] recv,
                  unsigned char[::1] present, int64_t[::1] counts):
    cdef int64_t i, j, s, lk, w, v, seq = 0
    cdef double t0
    cdef Ev e
    g.st[:] = 0
    g.got[:] = 0
    g.arrived[:] = -1
    recv[:, :] = 0
    present[:] = 0
    heap.size = 0
    pool.size = 0
    for i in range(g.k):
        s = g.sources[i]
        t0 = starts[i] + rng_skew(rng, skew)
        v = pool_new(pool)
        pool_row(pool, v)[i] = 1
        g.st[s] = 2
        for j in range(g.out_ptr[s], g.out_ptr[s + 1]):
            lk = g.out_link[j]
            if g.mask[lk, i]:
                dag_send(g, heap, rng, &seq, lk, v, t0, counts)
    while heap.size > 0:
        e = heap_pop(heap)
        if e.kind == 0:
            w = g.dst[e.a]
            if g.st[w] == 2:
                continue
            if g.st[w] == 0:
                g.st[w] = 1
                heap_push(heap, Ev(e.t + window, 1, seq, w, -1, 0))
                seq += 1
            g.arrived[e.a] = e.v
            g.got[w] += 1
            if g.got[w] == g.in_ptr[w + 1] - g.in_ptr[w]:
                dag_fire(g, w, e.t, heap, pool, rng, &seq, scheme, q, recv, present, counts)
        elif g.st[e.a] == 1:
            dag_fire(g, e.a, e.t, heap, pool, rng, &seq, scheme, q, recv, present, counts)


def dag_experiment(da, starts, double window, double skew, int scheme, int64_t q,
                   uint64_t[::1] state, trace=None):
    if trace is not None:
        raise ValueError("event traces are only produced by the Python backend")
    cdef _Dag g = _Dag(da)
    cdef Rng rng = load_rng(state)
    cdef Heap heap
    cdef Pool pool
    cdef double[::1] st = np.asarray(starts, dtype=np.float64)
    recv_np = np.zeros((g.R, g.k), dtype=np.int64)
    present_np = np.zeros(g.R, dtype=np.uint8)
    counts_np = np.zeros(g.L, dtype=np.int64)
    heap.data = NULL; heap.size = 0; heap.cap = 0
    pool.data = NULL; pool.size = 0; pool.cap = 0; pool.k = <int>g.k
    try:
        dag_run(g, &st[0], window, skew, scheme, q, &rng, &heap, &pool, recv_np, present_np,
                counts_np)
    finally:
        free(heap.data)
        free(pool.data)
    save_rng(&rng, state)
    return recv_np, present_np, counts_np


cdef void update_pairs_c(int64_t[:, ::1] recv, unsigned char[::1] present, bint first, bint lossy,
                         int64_t[::1] pa, int64_t[::1] pb, int64_t[::1] ptype,
                         unsigned char[::1] done, int64_t k):
    cdef int64_t p, a, b, c12, c22, i
    cdef bint same
    for p in range(pa.shape[0]):
        if done[p]:
            continue
        a = pa[p]
        b = pb[p]
        c12 = recv[a, 1]
        c22 = recv[b, 1]
        same = True
        for i in range(k):
            if recv[a, i] != recv[b, i]:
                same = False
                break
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
            elif ptype[p] == 0 and same:
                ptype[p] = 1
        else:
            same = same and present[a] == present[b]
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


def update_pairs(recv, present, bint first, bint lossy, pair_a, pair_b, ptype, done):
    update_pairs_c(recv, present, first, lossy, np.asarray(pair_a, dtype=np.int64),
                   np.asarray(pair_b, dtype=np.int64), ptype, done, recv.shape[1])


def dag_trial(da, int count_max, bint lossy, double window, double frac, double skew, int scheme,
              int64_t q, uint64_t[::1] state, checkpoints=None):
    cdef _Dag g = _Dag(da)
    cdef Rng rng = load_rng(state)
    cdef Heap heap
    cdef Pool pool
    cdef int64_t e, c, used = 0, n_pairs, ncp
    cdef double starts[2]
    cdef bint all_done
    pa_np, pb_np = np.triu_indices(g.R, 1)
    cdef int64_t[::1] pa = pa_np.astype(np.int64)
    cdef int64_t[::1] pb = pb_np.astype(np.int64)
    n_pairs = pa.shape[0]
    ptype_np = np.zeros(n_pairs, dtype=np.int64)
    done_np = np.zeros(n_pairs, dtype=np.uint8)
    cdef int64_t[::1] ptype = ptype_np
    cdef unsigned char[::1] done = done_np
    if checkpoints is None:
        checkpoints = [count_max]
    cdef int64_t[::1] cps = np.asarray(list(checkpoints), dtype=np.int64)
    ncp = cps.shape[0]
    snaps_np = np.zeros((ncp, n_pairs), dtype=np.int64)
    cdef int64_t[:, ::1] snaps = snaps_np
    recv_np = np.zeros((g.R, g.k), dtype=np.int64)
    present_np = np.zeros(g.R, dtype=np.uint8)
    counts_np = np.zeros(g.L, dtype=np.int64)
    cdef int64_t[:, ::1] recv = recv_np
    cdef unsigned char[::1] present = present_np
    cdef int64_t[::1] counts = counts_np
    heap.data = NULL; heap.size = 0; heap.cap = 0
    pool.data = NULL; pool.size = 0; pool.cap = 0; pool.k = <int>g.k
    try:
        for e in range(count_max):
            starts[0] = 0.0
            starts[1] = 0.0 if e == 0 else window * (frac + (1.0 - frac) * rng_uniform(&rng))
            dag_run(g, starts, window, skew, scheme, q, &rng, &heap, &pool, recv, present, counts)
            update_pairs_c(recv, present, e == 0, lossy, pa, pb, ptype, done, g.k)
            used = e + 1
            for c in range(ncp):
                if cps[c] == used:
                    snaps[c, :] = ptype
            all_done = True
            for c in range(n_pairs):
                if not done[c]:
                    all_done = False
                    break
            if all_done:
                break
    finally:
        free(heap.data)
        free(pool.data)
    for c in range(ncp):
        if cps[c] > used:
            snaps[c, :] = ptype
    save_rng(&rng, state)
    return snaps_np, used
