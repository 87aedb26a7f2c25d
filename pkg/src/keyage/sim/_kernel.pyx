# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event-loop kernel for the gossip simulator.

Semantics are defined by keyage.sim.engine; this module replays them at C
speed.  It consumes the same ExpStream in the same order, orders events by
the same (time, sequence) key, and accumulates the per-node age integrals
in the same floating-point order, so outputs are bit-identical to the pure
engine (the build disables FP contraction to keep it that way).

Decode bookkeeping differs by design: instead of provider sets per pending
version, each node's in-edge last-sent versions are kept as a sorted
multiset and the decoded version is its k-th largest entry.  An in-edge
has conveyed version v exactly when its last-sent version is >= v, so both
bookkeepings decode identically; the cross-backend tests enforce that.

The heap holds exactly one pending event per Poisson stream, so each event
is a replace-root followed by one sift-down.
"""

import numpy as np


cdef inline void _sift_down(double* ht, long long* hseq, long long* hstream,
                            Py_ssize_t size, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t l, r, m
    cdef double td
    cdef long long tq, tv
    while True:
        l = 2 * i + 1
        if l >= size:
            return
        m = i
        if ht[l] < ht[m] or (ht[l] == ht[m] and hseq[l] < hseq[m]):
            m = l
        r = l + 1
        if r < size and (ht[r] < ht[m] or (ht[r] == ht[m] and hseq[r] < hseq[m])):
            m = r
        if m == i:
            return
        td = ht[i]; ht[i] = ht[m]; ht[m] = td
        tq = hseq[i]; hseq[i] = hseq[m]; hseq[m] = tq
        tv = hstream[i]; hstream[i] = hstream[m]; hstream[m] = tv
        i = m


def simulate(double lam_s, Py_ssize_t n_nodes, edge_src, edge_dst, edge_rate,
             kreq, bint memoryless, double horizon, stream, Py_ssize_t hist_cap,
             bint record_series=True, bint record_event_log=False):
    """Same contract and return dict as keyage.sim.engine.simulate."""
    cdef Py_ssize_t n = n_nodes
    edst_arr = np.ascontiguousarray(edge_dst, dtype=np.int64)
    erate_arr = np.ascontiguousarray(edge_rate, dtype=np.float64)
    kv_arr = np.ascontiguousarray(kreq, dtype=np.int64)
    cdef long long[::1] edst = edst_arr
    cdef long long[::1] kv = kv_arr
    cdef Py_ssize_t n_edges = erate_arr.shape[0]
    cdef Py_ssize_t n_streams = n_edges + 1

    rate_arr = np.empty(n_streams, dtype=np.float64)
    rate_arr[0] = lam_s
    if n_edges:
        rate_arr[1:] = erate_arr
    cdef double[::1] rate = rate_arr

    # in-edge CSR: per node the offsets of its in-edge block, plus each
    # edge's position within its destination's block (memoryless bit index)
    counts = np.bincount(edst_arr, minlength=n)
    in_off_arr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=in_off_arr[1:])
    in_pos_arr = np.zeros(max(n_edges, 1), dtype=np.int64)
    if n_edges:
        order = np.argsort(edst_arr, kind="stable")
        in_pos_arr[order] = np.arange(n_edges, dtype=np.int64) - in_off_arr[edst_arr[order]]
    cdef long long[::1] in_off = in_off_arr
    cdef long long[::1] in_pos = in_pos_arr

    cdef Py_ssize_t total_in = in_off_arr[n]
    svals_arr = np.zeros(max(total_in, 1), dtype=np.int64)
    cdef long long[::1] svals = svals_arr

    max_in = int(counts.max()) if n_edges else 0
    cdef Py_ssize_t words = max(1, (max_in + 63) // 64)
    bits_arr = np.zeros(max(n, 1) * words, dtype=np.uint64)
    got_arr = np.zeros(max(n, 1), dtype=np.int64)
    cdef unsigned long long[::1] bits = bits_arr
    cdef long long[::1] got = got_arr

    decoded_arr = np.zeros(n, dtype=np.int64)
    last_sent_arr = np.zeros(max(n_edges, 1), dtype=np.int64)
    integral_arr = np.zeros(n, dtype=np.float64)
    last_t_arr = np.zeros(n, dtype=np.float64)
    cdef long long[::1] decoded = decoded_arr
    cdef long long[::1] last_sent = last_sent_arr
    cdef double[::1] integral = integral_arr
    cdef double[::1] last_t = last_t_arr

    msg_count_arr = np.zeros(max(n_edges, 1), dtype=np.int64)
    key_sum_arr = np.zeros(max(n_edges, 1), dtype=np.int64)
    hist_arr = np.zeros(max(n_edges, 1) * hist_cap, dtype=np.int64)
    trunc_arr = np.zeros(max(n_edges, 1), dtype=np.uint8)
    cdef long long[::1] msg_count = msg_count_arr
    cdef long long[::1] key_sum = key_sum_arr
    cdef long long[::1] hist = hist_arr
    cdef unsigned char[::1] trunc = trunc_arr

    # growable outputs
    cdef Py_ssize_t ser_cap = max(1024, n), ser_len = 0
    ser_node_arr = np.empty(ser_cap, dtype=np.int32)
    ser_t_arr = np.empty(ser_cap, dtype=np.float64)
    ser_age_arr = np.empty(ser_cap, dtype=np.int64)
    cdef int[::1] ser_node = ser_node_arr
    cdef double[::1] ser_t = ser_t_arr
    cdef long long[::1] ser_age = ser_age_arr

    cdef Py_ssize_t au_cap = 1024, au_len = 0
    au_arr = np.empty(au_cap * n, dtype=np.int64)
    cdef long long[::1] au = au_arr

    cdef Py_ssize_t ev_cap = 1024 if record_event_log else 1, ev_len = 0
    ev_t_arr = np.empty(ev_cap, dtype=np.float64)
    ev_stream_arr = np.empty(ev_cap, dtype=np.int32)
    ev_ages_arr = np.empty(ev_cap * n, dtype=np.int64)
    cdef double[::1] ev_t = ev_t_arr
    cdef int[::1] ev_stream = ev_stream_arr
    cdef long long[::1] ev_ages = ev_ages_arr

    cdef Py_ssize_t j
    if record_series:
        # every node starts with an explicit (t=0, age=0) change point
        for j in range(n):
            ser_node[j] = <int>j
            ser_t[j] = 0.0
            ser_age[j] = 0
        ser_len = n

    # exponential draw buffer shared with the pure engine
    buf_obj = stream.buf
    cdef double[::1] sbuf = buf_obj
    cdef Py_ssize_t spos = stream.pos
    cdef Py_ssize_t sblen = sbuf.shape[0]

    # heap: one pending event per stream, keyed by (time, sequence)
    ht_arr = np.empty(n_streams, dtype=np.float64)
    hseq_arr = np.empty(n_streams, dtype=np.int64)
    hstream_arr = np.empty(n_streams, dtype=np.int64)
    cdef double[::1] ht_mv = ht_arr
    cdef long long[::1] hseq_mv = hseq_arr
    cdef long long[::1] hstream_mv = hstream_arr
    cdef double* ht = &ht_mv[0]
    cdef long long* hseq = &hseq_mv[0]
    cdef long long* hstream = &hstream_mv[0]

    cdef Py_ssize_t s, e, idx, lo_i, hi_i, w, pos, base, i
    cdef long long seq = 0, ver = 0, n_ev = 0
    cdef long long cnt, old, newdec, age_old, age_new, kj
    cdef double te, draw
    cdef unsigned long long mask

    for s in range(n_streams):
        if spos >= sblen:
            buf_obj = stream.refill()
            sbuf = buf_obj
            spos = 0
            sblen = sbuf.shape[0]
        ht[s] = sbuf[spos] / rate[s]
        spos += 1
        hseq[s] = seq
        hstream[s] = s
        seq += 1
    for i in range((n_streams - 2) // 2, -1, -1):
        _sift_down(ht, hseq, hstream, n_streams, i)

    while True:
        te = ht[0]
        if te > horizon:
            break
        s = <Py_ssize_t>hstream[0]
        n_ev += 1
        if s == 0:
            ver += 1
            if au_len == au_cap:
                new_au = np.empty(au_cap * 2 * n, dtype=np.int64)
                new_au[:au_cap * n] = au_arr
                au_arr = new_au
                au = au_arr
                au_cap *= 2
            base = au_len * n
            for j in range(n):
                kj = kv[j]
                if kj == 0:
                    decoded[j] = ver
                    au[base + j] = 0
                else:
                    age_old = ver - 1 - decoded[j]
                    integral[j] += age_old * (te - last_t[j])
                    last_t[j] = te
                    if memoryless:
                        for w in range(words):
                            bits[j * words + w] = 0
                        got[j] = 0
                    age_new = ver - decoded[j]
                    if record_series:
                        if ser_len == ser_cap:
                            ser_cap *= 2
                            new_node = np.empty(ser_cap, dtype=np.int32)
                            new_t = np.empty(ser_cap, dtype=np.float64)
                            new_age = np.empty(ser_cap, dtype=np.int64)
                            new_node[:ser_len] = ser_node_arr
                            new_t[:ser_len] = ser_t_arr
                            new_age[:ser_len] = ser_age_arr
                            ser_node_arr = new_node
                            ser_t_arr = new_t
                            ser_age_arr = new_age
                            ser_node = ser_node_arr
                            ser_t = ser_t_arr
                            ser_age = ser_age_arr
                        ser_node[ser_len] = <int>j
                        ser_t[ser_len] = te
                        ser_age[ser_len] = age_new
                        ser_len += 1
                    au[base + j] = age_new
            au_len += 1
        else:
            e = s - 1
            j = <Py_ssize_t>edst[e]
            msg_count[e] += 1
            if memoryless:
                key_sum[e] += 1
                hist[e * hist_cap + 1] += 1
                kj = kv[j]
                if kj >= 1 and decoded[j] < ver:
                    pos = <Py_ssize_t>in_pos[e]
                    w = pos >> 6
                    mask = (<unsigned long long>1) << (pos & 63)
                    if not (bits[j * words + w] & mask):
                        bits[j * words + w] = bits[j * words + w] | mask
                        got[j] += 1
                        if got[j] >= kj:
                            age_old = ver - decoded[j]
                            integral[j] += age_old * (te - last_t[j])
                            last_t[j] = te
                            decoded[j] = ver
                            if record_series:
                                if ser_len == ser_cap:
                                    ser_cap *= 2
                                    new_node = np.empty(ser_cap, dtype=np.int32)
                                    new_t = np.empty(ser_cap, dtype=np.float64)
                                    new_age = np.empty(ser_cap, dtype=np.int64)
                                    new_node[:ser_len] = ser_node_arr
                                    new_t[:ser_len] = ser_t_arr
                                    new_age[:ser_len] = ser_age_arr
                                    ser_node_arr = new_node
                                    ser_t_arr = new_t
                                    ser_age_arr = new_age
                                    ser_node = ser_node_arr
                                    ser_t = ser_t_arr
                                    ser_age = ser_age_arr
                                ser_node[ser_len] = <int>j
                                ser_t[ser_len] = te
                                ser_age[ser_len] = 0
                                ser_len += 1
            else:
                cnt = ver - last_sent[e]
                key_sum[e] += cnt
                if cnt >= <long long>hist_cap:
                    hist[e * hist_cap + hist_cap - 1] += 1
                    trunc[e] = 1
                else:
                    hist[e * hist_cap + cnt] += 1
                if cnt > 0:
                    old = last_sent[e]
                    last_sent[e] = ver
                    lo_i = <Py_ssize_t>in_off[j]
                    hi_i = <Py_ssize_t>in_off[j + 1]
                    idx = lo_i
                    while svals[idx] != old:
                        idx += 1
                    while idx < hi_i - 1:
                        svals[idx] = svals[idx + 1]
                        idx += 1
                    svals[hi_i - 1] = ver
                    kj = kv[j]
                    if kj >= 1:
                        newdec = svals[hi_i - kj]
                        if newdec > decoded[j]:
                            age_old = ver - decoded[j]
                            integral[j] += age_old * (te - last_t[j])
                            last_t[j] = te
                            decoded[j] = newdec
                            if record_series:
                                if ser_len == ser_cap:
                                    ser_cap *= 2
                                    new_node = np.empty(ser_cap, dtype=np.int32)
                                    new_t = np.empty(ser_cap, dtype=np.float64)
                                    new_age = np.empty(ser_cap, dtype=np.int64)
                                    new_node[:ser_len] = ser_node_arr
                                    new_t[:ser_len] = ser_t_arr
                                    new_age[:ser_len] = ser_age_arr
                                    ser_node_arr = new_node
                                    ser_t_arr = new_t
                                    ser_age_arr = new_age
                                    ser_node = ser_node_arr
                                    ser_t = ser_t_arr
                                    ser_age = ser_age_arr
                                ser_node[ser_len] = <int>j
                                ser_t[ser_len] = te
                                ser_age[ser_len] = ver - newdec
                                ser_len += 1
        if record_event_log:
            if ev_len == ev_cap:
                ev_cap *= 2
                new_ev_t = np.empty(ev_cap, dtype=np.float64)
                new_ev_s = np.empty(ev_cap, dtype=np.int32)
                new_ev_a = np.empty(ev_cap * n, dtype=np.int64)
                new_ev_t[:ev_len] = ev_t_arr
                new_ev_s[:ev_len] = ev_stream_arr
                new_ev_a[:ev_len * n] = ev_ages_arr
                ev_t_arr = new_ev_t
                ev_stream_arr = new_ev_s
                ev_ages_arr = new_ev_a
                ev_t = ev_t_arr
                ev_stream = ev_stream_arr
                ev_ages = ev_ages_arr
            ev_t[ev_len] = te
            ev_stream[ev_len] = <int>s
            base = ev_len * n
            for j in range(n):
                ev_ages[base + j] = ver - decoded[j]
            ev_len += 1
        # reschedule this stream: replace the heap root and sift down
        if spos >= sblen:
            buf_obj = stream.refill()
            sbuf = buf_obj
            spos = 0
            sblen = sbuf.shape[0]
        draw = sbuf[spos]
        spos += 1
        ht[0] = te + draw / rate[s]
        hseq[0] = seq
        seq += 1
        _sift_down(ht, hseq, hstream, n_streams, 0)

    for j in range(n):
        integral[j] += (ver - decoded[j]) * (horizon - last_t[j])

    stream.pos = spos

    return {
        "n_events": int(n_ev),
        "n_updates": int(au_len),
        "version": int(ver),
        "integral": integral_arr,
        "ser_node": ser_node_arr[:ser_len].copy(),
        "ser_t": ser_t_arr[:ser_len].copy(),
        "ser_age": ser_age_arr[:ser_len].copy(),
        "ages_at_update": au_arr[:au_len * n].copy().reshape(au_len, n),
        "msg_count": msg_count_arr[:n_edges],
        "key_sum": key_sum_arr[:n_edges],
        "hist": hist_arr.reshape(max(n_edges, 1), hist_cap)[:n_edges],
        "hist_truncated": trunc_arr[:n_edges].astype(np.bool_),
        "ev_t": ev_t_arr[:ev_len].copy(),
        "ev_stream": ev_stream_arr[:ev_len].copy(),
        "ev_ages": ev_ages_arr[:ev_len * n].copy().reshape(ev_len, n),
    }
