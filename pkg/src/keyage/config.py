"""Run configuration: JSON schema, strict validation, resolution helpers.

A config file is one JSON object.  Field reference (see README for
examples):

  network           {"kind": "shn", "n": int, "lambda_e": rate}
                    or {"kind": "explicit", "n": int, "edges": [[src, dst, rate], ...]}
  lambda_s          source update rate
  threshold         {"k": int or [int per node]}  XOR  {"beta": b, "alpha": a}
                    (beta/alpha may be per-node lists; k is resolved via the
                    precision-rate function)
  scheme            "memory" | "memoryless" | list of both (default both)
  horizon           simulated time span T
  seed              base RNG seed (required to simulate)
  warmup            initial fraction of the horizon to discard (default 0)
  exact_threshold   in-edge count above which analytics switch to quadrature (default 16)
  batches           batch count for confidence intervals (default 30)
  output            default CSV path (--out overrides)
  sweep             {"parameter": p, "values": [...]} or a list of those;
                    parameters form a product grid; p in {lambda_e,
                    lambda_s, k, n, beta, alpha}
  critical_rate     {"n": int, "k": int|[int], "epsilon": e|[e], "bracket": [lo, hi]}
  precision         {"n": int (optional with a network), "beta": b|[b], "alpha_grid": [...]}

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .net import NetworkSpec, build_network

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config",
           "SWEEP_PARAMETERS", "resolve_k_vector"]

SWEEP_PARAMETERS = ("lambda_e", "lambda_s", "k", "n", "beta", "alpha")

_TOP_KEYS = {"network", "lambda_s", "threshold", "scheme", "horizon", "seed",
             "warmup", "exact_threshold", "batches", "output", "sweep",
             "critical_rate", "precision"}


class ConfigError(ValueError):
    """Unparseable or semantically invalid run configuration."""


def _fail(fieldname: str, msg: str):
    raise ConfigError(f"config field '{fieldname}': {msg}")


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _pos_number(v, fieldname: str) -> float:
    if not (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v) and v > 0):
        _fail(fieldname, f"must be a finite positive number, got {v!r}")
    return float(v)


def _pos_int(v, fieldname: str) -> int:
    if not (isinstance(v, int) and not isinstance(v, bool) and v > 0):
        _fail(fieldname, f"must be a positive integer, got {v!r}")
    return v


@dataclass
class RunConfig:
    """Validated configuration, still parameterized (sweeps not expanded)."""

    raw: dict
    network: dict | None = None
    lambda_s: float | None = None
    threshold_kind: str | None = None      # "k" | "beta_alpha"
    k: int | list[int] | None = None
    beta: float | list[float] | None = None
    alpha: float | list[float] | None = None
    schemes: list[str] = field(default_factory=lambda: ["memory", "memoryless"])
    horizon: float | None = None
    seed: int | None = None
    warmup: float = 0.0
    exact_threshold: int = 16
    batches: int = 30
    output: str | None = None
    sweep: list[tuple[str, list]] | None = None
    critical_rate: dict | None = None
    precision: dict | None = None

    def base_params(self) -> dict:
        """Sweepable parameters at their configured values."""
        p = {"lambda_s": self.lambda_s, "k": self.k, "beta": self.beta,
             "alpha": self.alpha, "n": None, "lambda_e": None}
        if self.network is not None:
            p["n"] = self.network["n"]
            p["lambda_e"] = self.network.get("lambda_e")
        return p

    def make_network(self, params: dict):
        """Build the Network for one parameter point."""
        if self.network is None:
            raise ConfigError("this command requires a 'network' section")
        if self.network["kind"] == "shn":
            spec = NetworkSpec(n=params["n"], source_rate=params["lambda_s"],
                               topology_kind="shn", gossip_rate=params["lambda_e"])
        else:
            spec = NetworkSpec(n=params["n"], source_rate=params["lambda_s"],
                               topology_kind="explicit",
                               edges=tuple(tuple(e) for e in self.network["edges"]))
        return build_network(spec)


def load_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a JSON config from a string."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    _check_keys(data, _TOP_KEYS, "config")
    cfg = RunConfig(raw=data)

    if "network" in data:
        cfg.network = _validate_network(data["network"])
    if "lambda_s" in data:
        cfg.lambda_s = _pos_number(data["lambda_s"], "lambda_s")
    if "threshold" in data:
        _validate_threshold(data["threshold"], cfg)
    if "scheme" in data:
        cfg.schemes = _validate_schemes(data["scheme"])
    if "horizon" in data:
        cfg.horizon = _pos_number(data["horizon"], "horizon")
    if "seed" in data:
        s = data["seed"]
        if not (isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2 ** 64):
            _fail("seed", f"must be an unsigned 64-bit integer, got {s!r}")
        cfg.seed = s
    if "warmup" in data:
        w = data["warmup"]
        if not (isinstance(w, (int, float)) and not isinstance(w, bool) and 0.0 <= w < 1.0):
            _fail("warmup", f"must be a fraction in [0, 1), got {w!r}")
        cfg.warmup = float(w)
    if "exact_threshold" in data:
        cfg.exact_threshold = _pos_int(data["exact_threshold"], "exact_threshold")
    if "batches" in data:
        b = _pos_int(data["batches"], "batches")
        if b < 2:
            _fail("batches", "must be at least 2")
        cfg.batches = b
    if "output" in data:
        if not isinstance(data["output"], str):
            _fail("output", "must be a path string")
        cfg.output = data["output"]
    if "sweep" in data:
        cfg.sweep = _validate_sweep(data["sweep"], cfg)
    if "critical_rate" in data:
        cfg.critical_rate = _validate_critical_rate(data["critical_rate"])
    if "precision" in data:
        cfg.precision = _validate_precision(data["precision"], cfg)
    return cfg


def parse_config(path) -> RunConfig:
    """Read and validate a JSON config file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return load_config(text, source=str(p))


def _validate_network(nw) -> dict:
    if not isinstance(nw, dict):
        _fail("network", "must be an object")
    kind = nw.get("kind")
    if kind == "shn":
        _check_keys(nw, {"kind", "n", "lambda_e"}, "network")
        n = _pos_int(nw.get("n"), "network.n")
        out = {"kind": "shn", "n": n}
        if "lambda_e" in nw:
            out["lambda_e"] = _pos_number(nw["lambda_e"], "network.lambda_e")
        return out
    if kind == "explicit":
        _check_keys(nw, {"kind", "n", "edges"}, "network")
        n = _pos_int(nw.get("n"), "network.n")
        edges = nw.get("edges")
        if not isinstance(edges, list):
            _fail("network.edges", "must be a list of [src, dst, rate] triples")
        for e in edges:
            if not (isinstance(e, list) and len(e) == 3):
                _fail("network.edges", f"entry {e!r} is not a [src, dst, rate] triple")
        return {"kind": "explicit", "n": n, "edges": edges}
    _fail("network.kind", f"must be 'shn' or 'explicit', got {kind!r}")


def _validate_threshold(th, cfg: RunConfig) -> None:
    if not isinstance(th, dict):
        _fail("threshold", "must be an object")
    has_k = "k" in th
    has_ba = "beta" in th or "alpha" in th
    if has_k and has_ba:
        _fail("threshold", "give either 'k' or 'beta'/'alpha', not both")
    if has_k:
        _check_keys(th, {"k"}, "threshold")
        k = th["k"]
        if isinstance(k, list):
            cfg.k = [kj if isinstance(kj, int) and not isinstance(kj, bool) and kj >= 0
                     else _fail("threshold.k", f"entries must be integers >= 0, got {kj!r}")
                     for kj in k]
        elif isinstance(k, int) and not isinstance(k, bool) and k >= 0:
            cfg.k = k
        else:
            _fail("threshold.k", f"must be an integer >= 0 or a list, got {k!r}")
        cfg.threshold_kind = "k"
        return
    if not ("beta" in th and "alpha" in th):
        _fail("threshold", "beta and alpha must be given together")
    _check_keys(th, {"beta", "alpha"}, "threshold")

    def unit(v, name, closed_top):
        if isinstance(v, list):
            return [unit(x, name, closed_top) for x in v]
        hi_ok = (v <= 1.0) if closed_top else (v < 1.0)
        if not (isinstance(v, (int, float)) and not isinstance(v, bool) and 0.0 < v and hi_ok):
            _fail(name, f"must lie in (0, 1{']' if closed_top else ')'}, got {v!r}")
        return float(v)

    cfg.beta = unit(th["beta"], "threshold.beta", closed_top=False)
    cfg.alpha = unit(th["alpha"], "threshold.alpha", closed_top=True)
    cfg.threshold_kind = "beta_alpha"


def _validate_schemes(s) -> list[str]:
    vals = s if isinstance(s, list) else [s]
    for v in vals:
        if v not in ("memory", "memoryless"):
            _fail("scheme", f"must be 'memory' or 'memoryless', got {v!r}")
    if len(set(vals)) != len(vals):
        _fail("scheme", "duplicate scheme")
    return list(vals)


def _validate_sweep(sw, cfg: RunConfig) -> list[tuple[str, list]]:
    entries = sw if isinstance(sw, list) else [sw]
    out = []
    seen = set()
    for entry in entries:
        if not isinstance(entry, dict):
            _fail("sweep", "each sweep entry must be an object")
        _check_keys(entry, {"parameter", "values"}, "sweep entry")
        p = entry.get("parameter")
        if p not in SWEEP_PARAMETERS:
            _fail("sweep.parameter", f"must be one of {SWEEP_PARAMETERS}, got {p!r}")
        if p in seen:
            _fail("sweep.parameter", f"'{p}' swept twice")
        seen.add(p)
        values = entry.get("values")
        if not (isinstance(values, list) and values):
            _fail("sweep.values", "must be a nonempty list")
        if p in ("n", "k"):
            values = [_pos_int(v, f"sweep value for {p}") if p == "n" else _nonneg_int(v, p)
                      for v in values]
        elif p in ("lambda_e", "lambda_s"):
            values = [_pos_number(v, f"sweep value for {p}") for v in values]
        else:
            for v in values:
                top = 1.0 if p == "alpha" else 0.999999999999
                if not (isinstance(v, (int, float)) and 0.0 < v <= top):
                    _fail(f"sweep value for {p}", f"out of range: {v!r}")
            values = [float(v) for v in values]
        out.append((p, values))
    if cfg.network is not None and cfg.network["kind"] == "explicit":
        for p, _ in out:
            if p in ("n", "lambda_e"):
                _fail("sweep.parameter", f"'{p}' cannot be swept on an explicit network")
    for p, _ in out:
        if p in ("beta", "alpha") and cfg.threshold_kind == "k":
            _fail("sweep.parameter", f"'{p}' sweep conflicts with a fixed-k threshold")
        if p == "k" and cfg.threshold_kind == "beta_alpha":
            _fail("sweep.parameter", "'k' sweep conflicts with a beta/alpha threshold")
    return out


def _nonneg_int(v, name: str) -> int:
    if not (isinstance(v, int) and not isinstance(v, bool) and v >= 0):
        _fail(name, f"must be an integer >= 0, got {v!r}")
    return v


def _validate_critical_rate(cr) -> dict:
    if not isinstance(cr, dict):
        _fail("critical_rate", "must be an object")
    _check_keys(cr, {"n", "k", "epsilon", "bracket"}, "critical_rate")
    n = _pos_int(cr.get("n"), "critical_rate.n")
    k = cr.get("k")
    ks = k if isinstance(k, list) else [k]
    ks = [_pos_int(v, "critical_rate.k") for v in ks]
    eps = cr.get("epsilon")
    eps_list = eps if isinstance(eps, list) else [eps]
    eps_list = [_pos_number(v, "critical_rate.epsilon") for v in eps_list]
    br = cr.get("bracket")
    if not (isinstance(br, list) and len(br) == 2):
        _fail("critical_rate.bracket", "must be [low, high]")
    lo = _pos_number(br[0], "critical_rate.bracket[0]")
    hi = _pos_number(br[1], "critical_rate.bracket[1]")
    if not lo < hi:
        _fail("critical_rate.bracket", "low must be less than high")
    return {"n": n, "k": ks, "epsilon": eps_list, "bracket": (lo, hi)}


def _validate_precision(pr, cfg: RunConfig) -> dict:
    if not isinstance(pr, dict):
        _fail("precision", "must be an object")
    _check_keys(pr, {"n", "beta", "alpha_grid"}, "precision")
    if "n" in pr:
        n = _pos_int(pr["n"], "precision.n")
        if cfg.network is not None and cfg.network["n"] != n:
            _fail("precision.n", f"disagrees with network.n = {cfg.network['n']}")
    elif cfg.network is not None:
        n = cfg.network["n"]
    else:
        _fail("precision.n", "required when no network section is given")
    betas = pr.get("beta")
    beta_list = betas if isinstance(betas, list) else [betas]
    for b in beta_list:
        if not (isinstance(b, (int, float)) and 0.0 < b < 1.0):
            _fail("precision.beta", f"must lie in (0, 1), got {b!r}")
    grid = pr.get("alpha_grid")
    if not (isinstance(grid, list) and grid):
        _fail("precision.alpha_grid", "must be a nonempty list")
    for a in grid:
        if not (isinstance(a, (int, float)) and 0.0 < a <= 1.0):
            _fail("precision.alpha_grid", f"entries must lie in (0, 1], got {a!r}")
    return {"n": n, "beta": [float(b) for b in beta_list],
            "alpha_grid": [float(a) for a in grid]}


def resolve_k_vector(n: int, kind: str | None, k, beta, alpha):
    """Per-node key requirements plus resolution metadata.

    Returns (kvec tuple, resolved) where resolved is None for explicit k
    and a list of per-node dicts for beta/alpha thresholds.  Raises
    ConfigError when some node's requirement is unreachable (required_keys
    returned its infeasibility marker) or a list length mismatches n.
    """
    from .threshold import required_keys

    if kind is None:
        raise ConfigError("this command requires a 'threshold' section")
    if kind == "k":
        if isinstance(k, list):
            if len(k) != n:
                raise ConfigError(f"threshold.k list has length {len(k)}, expected n={n}")
            return tuple(k), None
        return tuple([k] * n), None

    betas = beta if isinstance(beta, list) else [beta] * n
    alphas = alpha if isinstance(alpha, list) else [alpha] * n
    if len(betas) != n:
        raise ConfigError(f"threshold.beta list has length {len(betas)}, expected n={n}")
    if len(alphas) != n:
        raise ConfigError(f"threshold.alpha list has length {len(alphas)}, expected n={n}")
    kvec = []
    resolved = []
    for j, (b, a) in enumerate(zip(betas, alphas), start=1):
        kj = required_keys(n, b, a)
        if kj is None:
            raise ConfigError(
                f"node {j}: no key count up to n-1={n - 1} reaches precision {a} at beta={b}")
        kvec.append(kj)
        resolved.append({"node": j, "beta": b, "alpha": a, "k": kj})
    return tuple(kvec), resolved
