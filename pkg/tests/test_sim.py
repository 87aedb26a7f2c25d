"""Tests for the event-driven gossip simulator.

The stepwise tests drive the pure-Python state machine event by event and
check every transition by hand; the run-level tests exercise the public
runner, the compiled kernel, and the statistical contracts.
"""

import math

import numpy as np
import pytest

from keyage import analysis, net, sim, stats
from keyage.sim.engine import GossipState


def _two_node_state(memoryless, k=1):
    # edge 0: node0 -> node1, edge 1: node1 -> node0
    return GossipState(2, [0, 1], [1, 0], [1.0, 1.0], [k, k], memoryless,
                       hist_cap=16, record_event_log=True)


def test_first_update_raises_every_age():
    st = _two_node_state(memoryless=False)
    st.handle_source_update(0.5)
    assert st.version == 1
    assert st.decoded == [0, 0]
    assert [st.version - d for d in st.decoded] == [1, 1]


def test_memory_message_carries_whole_backlog():
    """After three updates a single activation conveys three keys and lets
    the receiver decode the newest version."""
    st = _two_node_state(memoryless=False)
    for t in (0.1, 0.2, 0.3):
        st.handle_source_update(t)
    st.handle_edge_activation(0, 0.4)
    assert st.key_sum[0] == 3
    assert st.msg_count[0] == 1
    assert st.hist[0, 3] == 1
    assert st.decoded[1] == 3
    assert st.decoded[0] == 0


def test_memoryless_message_carries_single_key():
    st = _two_node_state(memoryless=True)
    for t in (0.1, 0.2, 0.3):
        st.handle_source_update(t)
    st.handle_edge_activation(0, 0.4)
    assert st.key_sum[0] == 1
    assert st.msg_count[0] == 1
    assert st.decoded[1] == 3  # k=1: the one key is enough for the current version


def test_memoryless_discards_partial_progress_on_update():
    """k=2: one provider of version 1 is wiped by the next update, so the
    receiver needs two fresh providers of version 2."""
    st = GossipState(3, [0, 2], [1, 1], [1.0, 1.0], [0, 2, 0], True,
                     hist_cap=16)
    st.handle_source_update(0.1)        # version 1
    st.handle_edge_activation(0, 0.2)   # provider {edge0} for v1
    assert st.decoded[1] == 0
    st.handle_source_update(0.3)        # version 2 wipes progress
    st.handle_edge_activation(1, 0.4)   # provider {edge1} for v2
    assert st.decoded[1] == 0
    st.handle_edge_activation(0, 0.5)   # second distinct provider
    assert st.decoded[1] == 2


def test_memory_decode_per_version_providers_and_pruning():
    """k=2: version v decodes once two distinct in-edges have conveyed it,
    and a later catch-up decodes the rest."""
    st = GossipState(3, [0, 2], [1, 1], [1.0, 1.0], [0, 2, 0], False,
                     hist_cap=16)
    st.handle_source_update(0.1)        # version 1
    st.handle_edge_activation(0, 0.2)   # edge0 conveys v1
    assert st.decoded[1] == 0
    st.handle_source_update(0.3)        # version 2
    st.handle_edge_activation(1, 0.4)   # edge1 conveys v1 and v2
    # v1 now has two providers, v2 only one: decode stops at 1
    assert st.decoded[1] == 1
    st.handle_edge_activation(0, 0.5)   # edge0 conveys v2
    assert st.decoded[1] == 2
    assert st.providers[1] == {}        # decoded versions are pruned


def test_memory_zero_key_message_changes_nothing():
    st = _two_node_state(memoryless=False)
    st.handle_source_update(0.1)
    st.handle_edge_activation(0, 0.2)
    dec = list(st.decoded)
    st.handle_edge_activation(0, 0.3)   # nothing new to send
    assert st.msg_count[0] == 2
    assert st.hist[0, 0] == 1
    assert st.decoded == dec


def test_backends_bit_identical():
    if "cython" not in sim.available_backends():
        pytest.skip("compiled kernel not built")
    nw = net.shn(6, 100.0, 10.0)
    for scheme in ("memory", "memoryless"):
        rc = sim.run(nw, 2, scheme, 60.0, 5, backend="cython",
                     record_event_log=True)
        rp = sim.run(nw, 2, scheme, 60.0, 5, backend="python",
                     record_event_log=True)
        assert rc.n_events == rp.n_events
        assert np.array_equal(rc.age_integral, rp.age_integral)
        assert np.array_equal(rc.ages_at_update, rp.ages_at_update)
        assert np.array_equal(rc.key_hist, rp.key_hist)
        assert np.array_equal(rc.event_times, rp.event_times)
        assert np.array_equal(rc.event_streams, rp.event_streams)
        assert np.array_equal(rc.event_ages, rp.event_ages)
        for j in (1, 4):
            tc, ac = rc.age_series(j)
            tp, ap = rp.age_series(j)
            assert np.array_equal(tc, tp) and np.array_equal(ac, ap)


def test_same_seed_reproduces_different_seed_does_not():
    nw = net.shn(4, 30.0, 5.0)
    a = sim.run(nw, 2, "memoryless", 100.0, 42)
    b = sim.run(nw, 2, "memoryless", 100.0, 42)
    c = sim.run(nw, 2, "memoryless", 100.0, 43)
    assert np.array_equal(a.age_integral, b.age_integral)
    assert a.n_events == b.n_events
    assert not np.array_equal(a.age_integral, c.age_integral)


def test_age_integral_matches_event_log_reconstruction():
    """The streaming integral equals the step-function integral rebuilt
    from the post-event age log, to within accumulation noise."""
    nw = net.shn(5, 40.0, 8.0)
    for scheme in ("memory", "memoryless"):
        res = sim.run(nw, 2, scheme, 200.0, 17, record_event_log=True)
        t = np.concatenate(([0.0], res.event_times))
        for j in range(5):
            ages = np.concatenate(([0], res.event_ages[:, j])).astype(float)
            rebuilt = stats.integrate_step(t, ages, 0.0, 200.0)
            assert math.isclose(rebuilt, res.age_integral[j],
                                rel_tol=1e-9, abs_tol=1e-9)


def test_memoryless_decode_time_is_kth_distinct_activation():
    """Between consecutive updates, a node's age drops to zero exactly when
    the k-th distinct in-edge fires (checked against the raw event log)."""
    k = 2
    nw = net.shn(4, 20.0, 6.0)
    res = sim.run(nw, k, "memoryless", 80.0, 23, record_event_log=True)
    streams = res.event_streams
    times = res.event_times
    ages = res.event_ages
    upd_idx = np.flatnonzero(streams == 0)
    for j0 in range(4):
        in_edges = set(nw.in_edge_ids(j0 + 1))
        for u, nxt in zip(upd_idx, list(upd_idx[1:]) + [len(streams)]):
            seen = set()
            expect = None
            for i in range(u + 1, nxt):
                e = streams[i] - 1
                if e in in_edges:
                    seen.add(e)
                    if len(seen) == k:
                        expect = times[i]
                        break
            drops = [i for i in range(u + 1, nxt)
                     if ages[i, j0] == 0 and ages[i - 1, j0] > 0]
            if expect is None:
                assert not drops
            else:
                assert len(drops) == 1 and times[drops[0]] == expect


def test_message_histogram_consistent_with_counters():
    nw = net.shn(3, 12.0, 30.0)
    res = sim.run(nw, 1, "memory", 150.0, 9)
    assert not res.hist_truncated.any()
    assert np.array_equal(res.key_hist.sum(axis=1), res.msg_count)
    sizes = np.arange(res.key_hist.shape[1])
    assert np.array_equal(res.key_hist @ sizes, res.key_sum)
    assert res.mean_message_keys(0) == pytest.approx(
        res.key_sum[0] / res.msg_count[0])


def test_histogram_cap_truncation_flag():
    nw = net.shn(2, 0.5, 50.0)
    res = sim.run(nw, 1, "memory", 100.0, 3, hist_cap=4)
    assert res.hist_truncated.all()
    assert np.array_equal(res.key_hist.sum(axis=1), res.msg_count)
    # the capped top bin absorbs everything >= cap-1, so the dot product
    # undercounts while the exact counter keeps the true total
    sizes = np.arange(4)
    assert (res.key_hist @ sizes <= res.key_sum).all()


def test_memory_backlog_stays_small():
    """Ages at update times are stochastically dominated by a geometric
    law, so the maximum over the run obeys a log(N) + slack bound."""
    nw = net.shn(6, 100.0, 10.0)
    res = sim.run(nw, 2, "memory", 500.0, 77)
    mu = analysis.prob_service_before_update([20.0] * 5, 2, 10.0)
    q = 1 - mu
    samples = res.ages_at_update.size
    bound = 1 + (math.log(samples) + 10.0) / math.log(1 / q)
    assert res.ages_at_update.max() <= bound


def test_infeasible_network_rejected():
    spec = net.NetworkSpec(n=2, source_rate=1.0, edges=((1, 2, 3.0),))
    nw = net.build_network(spec)
    with pytest.raises(sim.InfeasibleNetworkError) as err:
        sim.run(nw, [1, 2], "memoryless", 10.0, 1)
    assert "2" in str(err.value)
    # node 1 has no in-edges at all
    with pytest.raises(sim.InfeasibleNetworkError):
        sim.run(nw, [1, 1], "memory", 10.0, 1)
    # requirement zero everywhere is trivially fine
    sim.run(nw, [0, 1], "memory", 1.0, 1)


def test_run_argument_validation():
    nw = net.shn(3, 10.0, 2.0)
    with pytest.raises(sim.SchemeError):
        sim.run(nw, 1, "psychic", 10.0, 1)
    with pytest.raises(ValueError):
        sim.run(nw, 1, "memory", -1.0, 1)
    with pytest.raises(ValueError):
        sim.run(nw, 1, "memory", 10.0, 1, warmup=1.5)
    with pytest.raises(ValueError):
        sim.run(nw, 1, "memory", 10.0, 1, backend="fortran")


def test_extract_cycles_memoryless_only():
    nw = net.shn(4, 40.0, 10.0)
    res = sim.run(nw, 2, "memoryless", 100.0, 6)
    cycles = sim.extract_cycles(res, 1)
    assert cycles.sum() <= res.n_updates
    assert (cycles >= 1).all()
    with pytest.raises(sim.SchemeError):
        sim.extract_cycles(sim.run(nw, 2, "memory", 10.0, 6), 1)


def test_cycles_stretch_when_updates_outpace_gossip():
    """With updates much faster than gossip, decodes are rare and the
    geometric cycle length 1/mu grows accordingly."""
    nw = net.shn(4, 3.0, 30.0)
    res = sim.run(nw, 2, "memoryless", 400.0, 15)
    cycles = sim.extract_cycles(res, 2)
    mu = analysis.prob_service_before_update([1.0] * 3, 2, 30.0)
    assert cycles.size > 50
    assert cycles.mean() > 0.5 / mu
    assert cycles.mean() > 10


def test_simulation_matches_closed_forms():
    nw = net.shn(6, 100.0, 10.0)
    for scheme, exact in (("memory", 0.225), ("memoryless", 0.2375)):
        res = sim.run(nw, 2, scheme, 2000.0, 101)
        emp = float(res.time_average().mean())
        assert abs(emp - exact) / exact < 0.02


def test_time_average_warmup_window():
    nw = net.shn(3, 15.0, 4.0)
    res = sim.run(nw, 1, "memory", 50.0, 31)
    t, a = res.age_series(2)
    manual = stats.integrate_step(t, a, 10.0, 50.0) / 40.0
    assert res.time_average(node=2, warmup=0.2) == pytest.approx(manual, rel=1e-12)
    whole = res.age_integral[1] / 50.0
    assert res.time_average(node=2) == pytest.approx(whole, rel=1e-12)


def test_k_zero_node_always_current():
    nw = net.shn(3, 10.0, 6.0)
    res = sim.run(nw, [0, 1, 1], "memoryless", 100.0, 12)
    assert res.age_integral[0] == 0.0
    assert (res.ages_at_update[:, 0] == 0).all()
    t, a = res.age_series(1)
    assert (a == 0).all()


def test_default_backend_env_override(monkeypatch):
    monkeypatch.setenv("KEYAGE_BACKEND", "python")
    assert sim.default_backend() == "python"
    monkeypatch.setenv("KEYAGE_BACKEND", "cobol")
    with pytest.raises(ValueError):
        sim.default_backend()
