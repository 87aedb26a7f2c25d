"""Built-in validation suite behind `keyage validate`.

Each check cross-examines one contract: frozen hand-derived values, fast
paths against general paths, analytics against Monte Carlo oracles,
simulation against analytics, and reproducibility guarantees.  The suite
is budgeted to finish in well under five minutes; `quick` trims the Monte
Carlo trial counts further.
"""

from __future__ import annotations

import math

import numpy as np

from . import analysis, net, sim, stats, threshold
from .rng import generator

__all__ = ["run_validation"]


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _threshold_checks() -> list[dict]:
    out = []
    anchors = [
        (threshold.precision(2, 6, 0.5), 22 / 64),
        (threshold.precision(0, 4, 0.5), 0.0625),
        (threshold.precision(6, 6, 0.3), 1.0),
    ]
    ok = all(_rel(a, b) < 1e-12 for a, b in anchors)
    out.append(_check("threshold.precision anchors", ok,
                      "binomial CDF values at hand-checked points"))
    ok = (threshold.required_keys(6, 0.5, 0.5) == 3
          and threshold.required_keys(6, 0.5, 0.01) == 0
          and threshold.required_keys(6, 0.5, 1.0) is None)
    out.append(_check("threshold.required_keys anchors", ok,
                      "0.01 -> 0, 0.5 -> 3, 1.0 -> unreachable"))
    grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    mono = True
    for beta in grid:
        ks = [threshold.required_keys(12, beta, a) for a in grid]
        ks = [13 if k is None else k for k in ks]
        mono &= all(x <= y for x, y in zip(ks, ks[1:]))
    for alpha in grid:
        ks = [threshold.required_keys(12, b, alpha) for b in grid]
        ks = [13 if k is None else k for k in ks]
        mono &= all(x <= y for x, y in zip(ks, ks[1:]))
    out.append(_check("threshold.required_keys monotone", mono,
                      "nondecreasing in alpha and in beta on a 5x5 grid"))
    return out


def _analysis_checks() -> list[dict]:
    out = []
    anchors = [
        ("order_stat_mean {1,2} k=2", analysis.order_stat_mean([1, 2], 2), 7 / 6),
        ("order_stat_mean hom", analysis.order_stat_mean([20] * 5, 2), 0.0225),
        ("shn memory 6/2", analysis.shn_age_memory(6, 2, 100, 10), 0.225),
        ("shn memoryless 6/2", analysis.shn_age_memoryless(6, 2, 100, 10), 0.2375),
        ("shn memoryless low rate", analysis.shn_age_memoryless(6, 2, 20, 10), 23 / 16),
        ("mu 6/2", analysis.prob_service_before_update([20] * 5, 2, 10), 80 / 99),
        ("emin 6/2", analysis.exp_min_with_update([20] * 5, 2, 10), 19 / 990),
        ("asymptote", analysis.asymptotic_age_memory(10, 15, 150), 1.0),
    ]
    bad = [n for n, a, b in anchors if _rel(a, b) > 1e-12]
    out.append(_check("analysis closed-form anchors", not bad,
                      "all hand-derived values to 1e-12" if not bad else f"off: {bad}"))

    worst = 0.0
    for n in (4, 8, 12):
        nw = net.shn(n, 37.0, 9.0)
        for k in {1, (n - 1) // 2 or 1, n - 1}:
            worst = max(worst,
                        _rel(analysis.age_memory(nw, 1, k).value,
                             analysis.shn_age_memory(n, k, 37.0, 9.0)),
                        _rel(analysis.age_memoryless(nw, 1, k).value,
                             analysis.shn_age_memoryless(n, k, 37.0, 9.0)))
    # The general path sums thousands of signed terms for large k, so a
    # few dozen ulps of cancellation noise are expected.
    out.append(_check("shn fast paths equal general paths", worst < 1e-9,
                      f"worst relative gap {worst:.2e}"))

    ordered = True
    eq_k1 = True
    for n in range(4, 13):
        for k in range(1, n):
            for ratio in (0.1, 1.0, 10.0, 100.0):
                mem = analysis.shn_age_memory(n, k, ratio, 1.0)
                nom = analysis.shn_age_memoryless(n, k, ratio, 1.0)
                ordered &= mem <= nom * (1 + 1e-12)
                if k == 1:
                    eq_k1 &= _rel(mem, 1.0 / ratio) < 1e-12 and _rel(nom, 1.0 / ratio) < 1e-12
    out.append(_check("memory age <= memoryless age on grid", ordered,
                      "n in 4..12, k in 1..n-1, rate ratios 0.1..100"))
    out.append(_check("k=1 collapse to lambda_s/lambda_e", eq_k1,
                      "both schemes, same grid"))
    return out


def _oracle_checks(seed: int, quick: bool) -> list[dict]:
    rng = generator(seed, "oracle", index=999)
    instances = 6 if quick else 12
    trials = 10 ** 5 if quick else 5 * 10 ** 5
    worst = 0.0
    for i in range(instances):
        m = int(rng.integers(1, 7))
        rates = rng.uniform(0.1, 10.0, size=m).tolist()
        k = int(rng.integers(1, m + 1))
        lam_s = float(rng.uniform(0.5, 20.0))
        sub = seed * 1000 + i
        pairs = [
            (analysis.order_stat_mean(rates, k),
             stats.mc_order_stat_oracle(rates, k, trials, sub)),
            (analysis.exp_min_with_update(rates, k, lam_s),
             stats.mc_min_with_update_oracle(rates, k, lam_s, trials, sub)),
            (analysis.prob_service_before_update(rates, k, lam_s),
             stats.mc_service_prob_oracle(rates, k, lam_s, trials, sub)),
        ]
        for exact, est in pairs:
            if est.stderr > 0:
                worst = max(worst, abs(exact - est.value) / est.stderr)
    return [_check("analytics within 4 SE of Monte Carlo oracles", worst < 4.0,
                   f"{instances} random instances, worst |z| = {worst:.2f}")]


def _sim_checks(seed: int, quick: bool) -> list[dict]:
    out = []
    horizon = 500.0 if quick else 2000.0
    nw = net.shn(6, 100.0, 10.0)
    ok = True
    details = []
    for scheme in ("memory", "memoryless"):
        exact = (analysis.shn_age_memory if scheme == "memory"
                 else analysis.shn_age_memoryless)(6, 2, 100.0, 10.0)
        res = sim.run(nw, 2, scheme, horizon, seed)
        emp = float(np.mean(res.time_average()))
        ok &= _rel(emp, exact) < 0.02
        details.append(f"{scheme} {emp:.4f} vs {exact:.4f}")
    out.append(_check("simulation matches closed forms (2%)", ok, "; ".join(details)))

    nw2 = net.shn(2, 20.0, 10.0)
    res = sim.run(nw2, 1, "memory", 2000.0 if quick else 5000.0, seed)
    law = analysis.message_size_law(nw2.edge_rate[0], 10.0)
    mean = res.mean_message_keys(0)
    counts = res.key_hist[0]
    samples = np.repeat(np.arange(counts.size), counts)
    fit = stats.geometric_fit(samples, law.p, support_start=0)
    ok = (_rel(mean, law.mean) < 0.02 and abs(fit.z) < 4.0
          and not bool(res.hist_truncated[0]))
    out.append(_check("message key counts follow the geometric law", ok,
                      f"mean {mean:.4f} vs {law.mean}, z = {fit.z:.2f}"))

    res = sim.run(net.shn(6, 30.0, 10.0), 3, "memoryless",
                  500.0 if quick else 2000.0, seed)
    cycles = sim.extract_cycles(res, 1)
    mu = analysis.prob_service_before_update([30.0 / 5] * 5, 3, 10.0)
    fit = stats.geometric_fit(cycles, mu, support_start=1)
    out.append(_check("success-run cycles follow the geometric law",
                      abs(fit.z) < 4.0,
                      f"{cycles.size} cycles, z = {fit.z:.2f}"))

    r1 = sim.run(nw, 2, "memoryless", 200.0, seed)
    r2 = sim.run(nw, 2, "memoryless", 200.0, seed)
    same = (np.array_equal(r1.age_integral, r2.age_integral)
            and np.array_equal(r1._ser_t, r2._ser_t)
            and r1.n_events == r2.n_events)
    out.append(_check("equal seeds reproduce bit-identical runs", same,
                      f"{r1.n_events} events compared"))

    if "cython" in sim.available_backends():
        rc = sim.run(nw, 2, "memory", 100.0, seed, backend="cython")
        rp = sim.run(nw, 2, "memory", 100.0, seed, backend="python")
        same = (np.array_equal(rc.age_integral, rp.age_integral)
                and np.array_equal(rc._ser_t, rp._ser_t)
                and np.array_equal(rc._ser_age, rp._ser_age)
                and np.array_equal(rc.ages_at_update, rp.ages_at_update)
                and np.array_equal(rc.key_hist, rp.key_hist))
        out.append(_check("compiled and pure backends agree bit for bit", same,
                          f"{rc.n_events} events compared"))
    else:
        out.append(_check("compiled and pure backends agree bit for bit", True,
                          "skipped: compiled kernel not built"))
    return out


def run_validation(seed: int = 20260814, quick: bool = False) -> dict:
    checks = []
    checks.extend(_threshold_checks())
    checks.extend(_analysis_checks())
    checks.extend(_oracle_checks(seed, quick))
    checks.extend(_sim_checks(seed, quick))
    return {"passed": all(c["passed"] for c in checks), "checks": checks,
            "seed": seed, "quick": quick}
