"""Command-line interface.

Commands:

  analyze        closed-form ages for one configuration
  simulate       one simulated run per scheme, with analytic counterparts and CIs
  sweep          parameter-grid study (analytic rows, plus simulation when a
                 horizon is configured), optionally parallel over points
  critical-rate  smallest gossip rate closing the memory/memoryless gap
  precision      required-key solver over an alpha grid, with ages when a
                 network is configured
  validate       self-check suite (oracles, invariants, determinism)

All commands read a JSON config (see keyage.config) and write the fixed
CSV schema of keyage.csvio.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product

import numpy as np

from . import __version__, analysis
from .config import ConfigError, RunConfig, parse_config, resolve_k_vector
from .csvio import Row, render_event_log, write_csv
from .net import Network
from .rng import GENERATOR_ID, spawn_seed
from .sim import run as sim_run
from .stats import batch_averages
from scipy import stats as sps

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="PATH",
                        help="output CSV path (default: config 'output' or stdout)")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, metavar="N",
                        help="worker processes for sweep points (default 1)")
    common.add_argument("--deterministic", action="store_true",
                        help="suppress the timestamp so equal runs give identical bytes")

    p = argparse.ArgumentParser(
        prog="keyage",
        description="Version age of threshold-encoded updates on gossip networks.")
    p.add_argument("--version", action="version", version=f"keyage {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common],
                   help="closed-form ages for the configured network")
    psim = sub.add_parser("simulate", parents=[common],
                          help="simulate and compare against the closed forms")
    psim.add_argument("--emit-event-log", metavar="PATH",
                      help="also write a per-event trace (single-scheme configs only)")
    sub.add_parser("sweep", parents=[common], help="parameter-grid study")
    sub.add_parser("critical-rate", parents=[common],
                   help="bisect for the smallest gap-closing gossip rate")
    sub.add_parser("precision", parents=[common],
                   help="required keys and ages over an alpha grid")
    pval = sub.add_parser("validate", parents=[common],
                          help="run the built-in validation suite")
    pval.add_argument("--quick", action="store_true",
                      help="reduced Monte Carlo budgets")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "validate":
        return _cmd_validate(args)
    if args.config is None:
        raise ConfigError(f"the {args.command} command requires --config")
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out if args.out is not None else cfg.output
    handler = {
        "analyze": _cmd_analyze,
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "critical-rate": _cmd_critical_rate,
        "precision": _cmd_precision,
    }[args.command]
    return handler(cfg, args, out)


def _base_meta(command: str, cfg: RunConfig | None) -> dict:
    meta = {"artifact": f"keyage {__version__}", "command": command,
            "generator": GENERATOR_ID}
    if cfg is not None:
        meta["config"] = cfg.raw
    return meta


def _network_column(network: Network):
    return network.gossip_rate if network.kind == "shn" else network.profile_id


def _analytic_value(scheme: str, network: Network, node: int, kj: int,
                    exact_threshold: int) -> float:
    """Closed-form age of one node; SHN uses the harmonic/spacing fast paths."""
    if kj == 0:
        return 0.0
    if network.kind == "shn":
        fn = (analysis.shn_age_memory if scheme == "memory"
              else analysis.shn_age_memoryless)
        return fn(network.n, kj, network.gossip_rate, network.source_rate)
    age = (analysis.age_memory if scheme == "memory" else analysis.age_memoryless)(
        network, node, kj, exact_threshold=exact_threshold)
    return age.value


def _threshold_columns(cfg: RunConfig, params: dict, node: int | None) -> dict:
    """beta/alpha columns for one row (empty for fixed-k thresholds)."""
    if cfg.threshold_kind != "beta_alpha":
        return {"beta": None, "alpha": None}

    def pick(v):
        if isinstance(v, list):
            return v[node - 1] if node is not None else None
        return v

    return {"beta": pick(params["beta"]), "alpha": pick(params["alpha"])}


def _uniform(kvec: tuple[int, ...]) -> int | None:
    return kvec[0] if len(set(kvec)) == 1 else None


def _analytic_rows(cfg: RunConfig, network: Network, params: dict,
                   kvec: tuple[int, ...], schemes: list[str]) -> list[Row]:
    """Analytic-only rows: one 'all' row per scheme on a symmetric SHN,
    else one row per node."""
    rows = []
    ku = _uniform(kvec)
    base = {"n": network.n, "lambda_s": network.source_rate,
            "lambda_e_or_edge_profile_id": _network_column(network)}
    for scheme in schemes:
        if network.kind == "shn" and ku is not None:
            rows.append(Row(scheme=scheme, k=ku, node_id="all",
                            analytic_age=_analytic_value(scheme, network, 1, ku,
                                                         cfg.exact_threshold),
                            **base, **_threshold_columns(cfg, params, 1)))
        else:
            for j in range(1, network.n + 1):
                rows.append(Row(scheme=scheme, k=kvec[j - 1], node_id=j,
                                analytic_age=_analytic_value(scheme, network, j,
                                                             kvec[j - 1],
                                                             cfg.exact_threshold),
                                **base, **_threshold_columns(cfg, params, j)))
    return rows


def _tcrit(level: float, dof: int) -> float:
    return float(sps.t.ppf(0.5 * (1.0 + level), dof))


def _simulated_rows(cfg: RunConfig, network: Network, params: dict,
                    kvec: tuple[int, ...], scheme: str, seed: int,
                    emit_event_log: str | None = None,
                    deterministic: bool = False) -> list[Row]:
    """Per-node rows for one run, plus a cross-node 'all' row on the SHN.

    empirical_age is the batch-means point (the exact window time average);
    the 'all' CI comes from the per-batch cross-node means so node
    correlation within a batch is respected.
    """
    result = sim_run(network, kvec, scheme, cfg.horizon, seed,
                     warmup=cfg.warmup,
                     record_event_log=emit_event_log is not None)
    start = cfg.warmup * cfg.horizon
    matrix = np.empty((network.n, cfg.batches))
    for j in range(1, network.n + 1):
        t, a = result.age_series(j)
        matrix[j - 1] = batch_averages(t, a, cfg.horizon, cfg.batches, start)
    tcrit = _tcrit(0.95, cfg.batches - 1)

    base = {"scheme": scheme, "n": network.n, "lambda_s": network.source_rate,
            "lambda_e_or_edge_profile_id": _network_column(network),
            "horizon": cfg.horizon, "seed": seed}
    rows = []
    for j in range(1, network.n + 1):
        avg = matrix[j - 1]
        rows.append(Row(
            k=kvec[j - 1], node_id=j,
            analytic_age=_analytic_value(scheme, network, j, kvec[j - 1],
                                         cfg.exact_threshold),
            empirical_age=float(np.mean(avg)),
            ci_half_width=tcrit * float(np.std(avg, ddof=1)) / math.sqrt(cfg.batches),
            **base, **_threshold_columns(cfg, params, j)))
    ku = _uniform(kvec)
    if network.kind == "shn" and ku is not None:
        node_means = matrix.mean(axis=0)
        rows.append(Row(
            k=ku, node_id="all",
            analytic_age=_analytic_value(scheme, network, 1, ku, cfg.exact_threshold),
            empirical_age=float(np.mean(node_means)),
            ci_half_width=tcrit * float(np.std(node_means, ddof=1)) / math.sqrt(cfg.batches),
            **base, **_threshold_columns(cfg, params, 1)))
    if emit_event_log is not None:
        meta = _base_meta("simulate-event-log", cfg)
        meta["seed"] = seed
        meta["scheme"] = scheme
        text = render_event_log(result, meta, deterministic)
        with open(emit_event_log, "w", newline="") as fh:
            fh.write(text)
    return rows


def _resolve(cfg: RunConfig, params: dict):
    """Network and key vector for one parameter point."""
    network = cfg.make_network(params)
    kvec, resolved = resolve_k_vector(network.n, cfg.threshold_kind,
                                      params["k"], params["beta"], params["alpha"])
    return network, kvec, resolved


def _cmd_analyze(cfg: RunConfig, args, out) -> int:
    params = cfg.base_params()
    network, kvec, resolved = _resolve(cfg, params)
    rows = _analytic_rows(cfg, network, params, kvec, cfg.schemes)
    meta = _base_meta("analyze", cfg)
    if resolved is not None:
        meta["resolved_k"] = [r["k"] for r in resolved]
    write_csv(out, rows, meta, args.deterministic)
    return 0


def _cmd_simulate(cfg: RunConfig, args, out) -> int:
    if cfg.horizon is None:
        raise ConfigError("simulate requires 'horizon'")
    if cfg.seed is None:
        raise ConfigError("simulate requires a seed (config 'seed' or --seed)")
    emit = getattr(args, "emit_event_log", None)
    if emit is not None and len(cfg.schemes) != 1:
        raise ConfigError("--emit-event-log needs a single-scheme config")
    params = cfg.base_params()
    network, kvec, resolved = _resolve(cfg, params)
    rows = []
    for scheme in cfg.schemes:
        rows.extend(_simulated_rows(cfg, network, params, kvec, scheme, cfg.seed,
                                    emit_event_log=emit,
                                    deterministic=args.deterministic))
    meta = _base_meta("simulate", cfg)
    meta["seed"] = cfg.seed
    from .sim import default_backend
    meta["backend"] = default_backend()
    meta["warmup"] = cfg.warmup
    meta["batches"] = cfg.batches
    if resolved is not None:
        meta["resolved_k"] = [r["k"] for r in resolved]
    write_csv(out, rows, meta, args.deterministic)
    return 0


def _sweep_points(cfg: RunConfig) -> list[dict]:
    base = cfg.base_params()
    names = [p for p, _ in cfg.sweep]
    grids = [v for _, v in cfg.sweep]
    points = []
    for combo in product(*grids):
        params = dict(base)
        params.update(dict(zip(names, combo)))
        points.append(params)
    return points


def _sweep_sim_task(payload: dict) -> list[dict]:
    """Worker entry for one sweep point (module level so it pickles)."""
    cfg = RunConfig(raw=payload["raw"])
    for name in ("network", "threshold_kind", "horizon", "warmup",
                 "exact_threshold", "batches", "schemes"):
        setattr(cfg, name, payload[name])
    params = payload["params"]
    network, kvec, _ = _resolve(cfg, params)
    rows = []
    for scheme in cfg.schemes:
        rows.extend(_simulated_rows(cfg, network, params, kvec, scheme,
                                    payload["seed"]))
    return rows


def _cmd_sweep(cfg: RunConfig, args, out) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep requires a 'sweep' section")
    simulate = cfg.horizon is not None
    if simulate and cfg.seed is None:
        raise ConfigError("a sweep with a horizon simulates and needs a seed")
    points = _sweep_points(cfg)

    sim_rows: dict[int, list] = {}
    if simulate:
        payloads = []
        for idx, params in enumerate(points):
            payloads.append({
                "raw": cfg.raw, "network": cfg.network,
                "threshold_kind": cfg.threshold_kind, "horizon": cfg.horizon,
                "warmup": cfg.warmup, "exact_threshold": cfg.exact_threshold,
                "batches": cfg.batches, "schemes": cfg.schemes,
                "params": params, "seed": spawn_seed(cfg.seed, "sweep", idx),
            })
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for idx, rows in enumerate(pool.map(_sweep_sim_task, payloads)):
                    sim_rows[idx] = rows
        else:
            for idx, payload in enumerate(payloads):
                sim_rows[idx] = _sweep_sim_task(payload)

    rows = []
    for idx, params in enumerate(points):
        network, kvec, _ = _resolve(cfg, params)
        rows.extend(_analytic_rows(cfg, network, params, kvec, cfg.schemes))
        if simulate:
            rows.extend(sim_rows[idx])
    meta = _base_meta("sweep", cfg)
    meta["sweep_parameters"] = [p for p, _ in cfg.sweep]
    meta["points"] = len(points)
    if simulate:
        meta["seed"] = cfg.seed
        from .sim import default_backend
        meta["backend"] = default_backend()
    write_csv(out, rows, meta, args.deterministic)
    return 0


def _cmd_critical_rate(cfg: RunConfig, args, out) -> int:
    if cfg.critical_rate is None:
        raise ConfigError("critical-rate requires a 'critical_rate' section")
    if cfg.lambda_s is None:
        raise ConfigError("critical-rate requires 'lambda_s'")
    cr = cfg.critical_rate
    rows = []
    for eps in cr["epsilon"]:
        for k in cr["k"]:
            res = analysis.critical_gossip_rate(k, cr["n"], cfg.lambda_s, eps,
                                                cr["bracket"])
            rows.append(Row(n=cr["n"], k=k, lambda_s=cfg.lambda_s,
                            lambda_e_or_edge_profile_id=res.rate,
                            analytic_age=res.gap))
    meta = _base_meta("critical-rate", cfg)
    meta["epsilon_grid"] = cr["epsilon"]
    meta["k_grid"] = cr["k"]
    meta["bracket"] = list(cr["bracket"])
    meta["note"] = ("rows ordered epsilon-major then k; "
                    "lambda_e column holds the critical rate, "
                    "analytic_age holds the achieved gap")
    write_csv(out, rows, meta, args.deterministic)
    return 0


def _cmd_precision(cfg: RunConfig, args, out) -> int:
    if cfg.precision is None:
        raise ConfigError("precision requires a 'precision' section")
    from .threshold import required_keys

    pr = cfg.precision
    n = pr["n"]
    network = None
    if cfg.network is not None and cfg.lambda_s is not None:
        params = cfg.base_params()
        if cfg.network["kind"] == "shn" and params["lambda_e"] is not None:
            network = cfg.make_network(params)
    rows = []
    for beta in pr["beta"]:
        for alpha in pr["alpha_grid"]:
            k = required_keys(n, beta, alpha)
            common = {"n": n, "beta": beta, "alpha": alpha,
                      "k": k, "lambda_s": cfg.lambda_s}
            if network is not None and k is not None:
                for scheme in cfg.schemes:
                    rows.append(Row(
                        scheme=scheme, node_id="all",
                        lambda_e_or_edge_profile_id=network.gossip_rate,
                        analytic_age=_analytic_value(scheme, network, 1, k,
                                                     cfg.exact_threshold),
                        **common))
            else:
                rows.append(Row(**common))
    meta = _base_meta("precision", cfg)
    if network is None:
        meta["note"] = "no shn network configured; ages omitted"
    write_csv(out, rows, meta, args.deterministic)
    return 0


def _cmd_validate(args) -> int:
    from .validate import run_validation

    summary = run_validation(seed=args.seed if args.seed is not None else 20260814,
                             quick=getattr(args, "quick", False))
    for check in summary["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {check['name']}: {check['detail']}")
    print(f"{'OK' if summary['passed'] else 'FAILED'} "
          f"({sum(c['passed'] for c in summary['checks'])}/{len(summary['checks'])} checks)")
    if args.out:
        import json

        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if summary["passed"] else 1


if __name__ == "__main__":
    raise SystemExit(main())
