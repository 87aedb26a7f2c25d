"""CSV emission with the fixed column schema and a metadata header block.

Every command writes the same columns (empty where not applicable):

  scheme, n, k, lambda_s, lambda_e_or_edge_profile_id, beta, alpha,
  analytic_age, empirical_age, ci_half_width, horizon, seed, node_id

Floats are rendered with repr (shortest round-trip form) so equal runs
produce byte-identical files; the metadata header carries the config echo,
seed, and generator id, plus a timestamp unless suppressed for
deterministic output.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

__all__ = ["COLUMNS", "Row", "format_value", "render_csv", "write_csv", "render_event_log"]

COLUMNS = ("scheme", "n", "k", "lambda_s", "lambda_e_or_edge_profile_id",
           "beta", "alpha", "analytic_age", "empirical_age", "ci_half_width",
           "horizon", "seed", "node_id")


class Row(dict):
    """One output row; missing columns render empty."""


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _metadata_lines(meta: Mapping[str, object], deterministic: bool) -> list[str]:
    lines = []
    for key, value in meta.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, separators=(",", ":"), sort_keys=True)
        lines.append(f"# {key} = {format_value(value)}")
    if not deterministic:
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        lines.append(f"# timestamp = {stamp}")
    return lines


def render_csv(rows: Iterable[Mapping], meta: Mapping[str, object],
               deterministic: bool = False) -> str:
    buf = io.StringIO()
    for line in _metadata_lines(meta, deterministic):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def write_csv(path, rows: Iterable[Mapping], meta: Mapping[str, object],
              deterministic: bool = False) -> str:
    """Render and write; path None writes to stdout. Returns the text."""
    text = render_csv(rows, meta, deterministic)
    if path is None:
        print(text, end="")
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def render_event_log(result, meta: Mapping[str, object],
                     deterministic: bool = False) -> str:
    """One line per event: time, kind, src, dst, and resulting per-node ages."""
    if result.event_times is None:
        raise ValueError("run was executed without record_event_log")
    nw = result.network
    buf = io.StringIO()
    for line in _metadata_lines(meta, deterministic):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "kind", "src", "dst"]
                    + [f"age_{j}" for j in range(1, nw.n + 1)])
    for t, s, ages in zip(result.event_times, result.event_streams, result.event_ages):
        if s == 0:
            kind, src, dst = "update", 0, None
        else:
            e = int(s) - 1
            kind, src, dst = "edge", nw.edge_src[e], nw.edge_dst[e]
        writer.writerow([repr(float(t)), kind, format_value(src), format_value(dst)]
                        + [int(a) for a in ages])
    return buf.getvalue()
