"""Acceptance gate: end-to-end checks of the analytics, the simulator, and
the command line interface at their stated tolerances.

Each test covers one numbered criterion and prints a single PASS/FAIL line
(visible with `pytest -s`, and echoed by pytest's own verbose listing).
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import t as student_t

from keyage import analysis, net, sim, stats, threshold
from keyage.cli import main

LAM_S = 10.0
HORIZON = 1.0e4
BATCHES = 30
GRID = [(n, k, lam_e)
        for n in (6, 8) for k in (2, 4)
        for lam_e in (25.0, 50.0, 100.0, 200.0)]


def _report(tag: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {tag}: {detail}")
    assert ok, f"{tag}: {detail}"


def _pooled_estimate(res: sim.SimResult) -> tuple[float, float]:
    """Network-wide age estimate with a batch-means CI.

    Batch averages are computed per node, averaged across nodes within each
    batch (the cross-node mean is itself a time average, so the point
    estimate stays exact), and the t interval is taken over batches.
    """
    n = res.network.n
    mat = np.vstack([stats.batch_averages(*res.age_series(j), res.horizon,
                                          BATCHES) for j in range(1, n + 1)])
    col = mat.mean(axis=0)
    half = float(student_t.ppf(0.975, BATCHES - 1)
                 * col.std(ddof=1) / math.sqrt(BATCHES))
    return float(col.mean()), half


def _run_grid(scheme: str, seed0: int) -> tuple[dict, float]:
    t0 = time.perf_counter()
    out = {}
    for i, (n, k, lam_e) in enumerate(GRID):
        res = sim.run(net.shn(n, lam_e, LAM_S), k, scheme, HORIZON, seed0 + i)
        out[(n, k, lam_e)] = _pooled_estimate(res)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def memory_grid():
    return _run_grid("memory", 9000)


@pytest.fixture(scope="module")
def memoryless_grid():
    return _run_grid("memoryless", 9100)


def _check_grid(grid, exact_fn) -> list[str]:
    bad = []
    for (n, k, lam_e), (emp, half) in grid.items():
        exact = exact_fn(n, k, lam_e, LAM_S)
        tol = max(0.02 * exact, half)
        if abs(emp - exact) > tol:
            bad.append(f"n={n} k={k} lam_e={lam_e}: "
                       f"{emp:.5f} vs {exact:.5f} (tol {tol:.5f})")
    return bad


def test_c01_memory_scheme_matches_closed_form_grid(memory_grid):
    grid, elapsed = memory_grid
    bad = _check_grid(grid, analysis.shn_age_memory)
    ok = not bad and elapsed < 60.0
    _report("criterion 1", ok,
            f"16-point memory grid within max(2%, CI) in {elapsed:.1f}s"
            + ("" if not bad else f"; misses: {bad}"))


def test_c02_memoryless_scheme_matches_closed_form_grid(memoryless_grid):
    grid, elapsed = memoryless_grid
    bad = _check_grid(grid, analysis.shn_age_memoryless)
    nw = net.shn(6, 100.0, LAM_S)
    anchors = (
        abs(analysis.shn_age_memory(6, 2, 100.0, LAM_S) - 0.225) < 1e-12,
        abs(analysis.age_memory(nw, 1, 2).value - 0.225) < 1e-12,
        abs(analysis.shn_age_memoryless(6, 2, 100.0, LAM_S) - 0.2375) < 1e-12,
        abs(analysis.age_memoryless(nw, 1, 2).value - 0.2375) < 1e-12,
    )
    sim_anchor = abs(grid[(6, 2, 100.0)][0] - 0.2375) / 0.2375 < 0.02
    ok = not bad and elapsed < 60.0 and all(anchors) and sim_anchor
    _report("criterion 2", ok,
            f"16-point memoryless grid within max(2%, CI) in {elapsed:.1f}s, "
            f"anchors 0.225/0.2375 reproduced"
            + ("" if not bad else f"; misses: {bad}"))


def test_c03_memory_never_older_than_memoryless():
    bad = []
    for n, k, lam_e in GRID:
        mem = analysis.shn_age_memory(n, k, lam_e, LAM_S)
        nom = analysis.shn_age_memoryless(n, k, lam_e, LAM_S)
        if mem > nom * (1 + 1e-12):
            bad.append((n, k, lam_e))
    eq = all(
        abs(analysis.shn_age_memory(n, 1, lam_e, LAM_S) - LAM_S / lam_e) < 1e-12
        and abs(analysis.shn_age_memoryless(n, 1, lam_e, LAM_S) - LAM_S / lam_e)
        < 1e-12
        for n in (6, 8) for lam_e in (25.0, 50.0, 100.0, 200.0))
    _report("criterion 3", not bad and eq,
            "memory <= memoryless on all 16 grid points; k=1 equals "
            "lambda_s/lambda_e to 1e-12")


def test_c04_age_asymptote_in_network_size():
    ns = [12, 50, 100, 500, 1000]
    vals = [analysis.shn_age_memory(n, 10, 150.0, 15.0) for n in ns]
    decreasing = all(a > b for a, b in zip(vals, vals[1:]))
    near_limit = abs(vals[-1] - 1.0) <= 0.01
    _report("criterion 4", decreasing and near_limit,
            f"age falls {vals[0]:.3f} -> {vals[-1]:.5f} toward limit 1.0")


def test_c05_success_run_cycles_are_geometric():
    res = sim.run(net.shn(6, 30.0, LAM_S), 3, "memoryless", 4000.0, 9200)
    cycles = sim.extract_cycles(res, 1)
    mu = analysis.prob_service_before_update([30.0 / 5] * 5, 3, LAM_S)
    rep = stats.geometric_fit(cycles, mu, support_start=1)
    ok = cycles.size >= 10 ** 4 and abs(rep.z) < 4.0
    _report("criterion 5", ok,
            f"{cycles.size} cycles, z = {rep.z:.2f} against p = {mu:.4f}")


def test_c06_message_sizes_match_geometric_mean():
    res = sim.run(net.shn(2, 20.0, LAM_S), 1, "memory", 2.0e4, 9300)
    law = analysis.message_size_law(res.network.edge_rate[0], LAM_S)
    mean = res.mean_message_keys(0)
    count = int(res.msg_count[0])
    ok = count >= 10 ** 5 and abs(mean - law.mean) / law.mean < 0.02
    _report("criterion 6", ok,
            f"{count} messages, mean keys {mean:.4f} vs {law.mean}")


def test_c07_oracles_bracket_the_analytics():
    t0 = time.perf_counter()
    rng = np.random.default_rng(777)
    worst = 0.0
    for i in range(50):
        m = int(rng.integers(1, 7))
        rates = rng.uniform(0.1, 10.0, size=m).tolist()
        k = int(rng.integers(1, m + 1))
        lam_s = float(rng.uniform(0.5, 20.0))
        trials = 10 ** 6
        checks = (
            (analysis.order_stat_mean(rates, k),
             stats.mc_order_stat_oracle(rates, k, trials, 5000 + i)),
            (analysis.exp_min_with_update(rates, k, lam_s),
             stats.mc_min_with_update_oracle(rates, k, lam_s, trials, 6000 + i)),
            (analysis.prob_service_before_update(rates, k, lam_s),
             stats.mc_service_prob_oracle(rates, k, lam_s, trials, 7000 + i)),
        )
        for exact, est in checks:
            if est.stderr > 0:
                worst = max(worst, abs(exact - est.value) / est.stderr)
    elapsed = time.perf_counter() - t0
    ok = worst < 4.0 and elapsed < 120.0
    _report("criterion 7", ok,
            f"50 instances x 3 quantities, worst |z| = {worst:.2f} "
            f"in {elapsed:.1f}s")


def test_c08_critical_rate_monotone_in_k():
    rates = [analysis.critical_gossip_rate(k, 30, 15.0, 0.1, (0.5, 1e5)).rate
             for k in range(2, 11)]
    res1 = analysis.critical_gossip_rate(1, 30, 15.0, 0.1, (0.5, 1e5))
    ok = (all(a <= b * (1 + 1e-9) for a, b in zip(rates, rates[1:]))
          and res1.rate == 0.5 and res1.gap == 0.0)
    _report("criterion 8", ok,
            f"rates {rates[0]:.1f} .. {rates[-1]:.1f} nondecreasing over "
            "k=2..10; k=1 hits the lower bracket with zero gap")


def test_c09_precision_sweep_shape():
    alphas = np.linspace(0.05, 0.99, 25)
    n = 30
    ks = {}
    ok = True
    for beta in (0.2, 0.5, 0.8):
        kcur = [threshold.required_keys(n, beta, float(a)) for a in alphas]
        ok &= all(k is not None for k in kcur)
        ok &= all(a <= b for a, b in zip(kcur, kcur[1:]))
        for age_of in (analysis.shn_age_memory, analysis.shn_age_memoryless):
            ages = [age_of(n, k, 100.0, LAM_S) if k else 0.0 for k in kcur]
            ok &= all(a <= b + 1e-12 for a, b in zip(ages, ages[1:]))
        ks[beta] = kcur
    for i in range(len(alphas)):
        ok &= ks[0.2][i] <= ks[0.5][i] <= ks[0.8][i]
    _report("criterion 9", ok,
            "required keys step up with alpha and beta; ages follow")


def test_c10_deterministic_csv_is_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("""{
      "network": {"kind": "shn", "n": 6, "lambda_e": 100.0},
      "lambda_s": 10.0, "threshold": {"k": 2},
      "scheme": ["memory", "memoryless"],
      "horizon": 100.0, "seed": 31, "batches": 10
    }""")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code1 = main(["simulate", "--config", str(cfg), "--deterministic",
                  "--out", str(a)])
    code2 = main(["simulate", "--config", str(cfg), "--deterministic",
                  "--out", str(b)])
    ok = code1 == 0 and code2 == 0 and a.read_bytes() == b.read_bytes()
    _report("criterion 10", ok,
            f"two runs, {len(a.read_bytes())} bytes, identical")
