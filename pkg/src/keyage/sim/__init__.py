"""Deterministic discrete-event simulator of the gossip protocol.

run() dispatches to the compiled kernel when the extension built, else to
the pure-Python engine; both produce bit-identical results for the same
arguments (the KEYAGE_BACKEND environment variable or the backend= keyword
force a choice).  See engine for the event semantics.
"""

from .runner import (
    SCHEMES,
    InfeasibleNetworkError,
    SchemeError,
    SimResult,
    available_backends,
    default_backend,
    extract_cycles,
    run,
)

__all__ = [
    "SCHEMES",
    "InfeasibleNetworkError",
    "SchemeError",
    "SimResult",
    "available_backends",
    "default_backend",
    "extract_cycles",
    "run",
]
