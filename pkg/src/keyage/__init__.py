"""keyage: version age of threshold-encoded updates on gossip networks.

A source encodes each update into n keys and broadcasts one key per
receiver; receivers gossip keys over Poisson-activated edges and can decode
an update once they hold k+1 distinct keys of the same version.  This
package computes the exact time-average "k-keys version age" for nodes with
and without memory, and validates the closed forms against a deterministic
discrete-event simulation.
"""

from .net import Network, NetworkSpec, FeasibilityReport, build_network, check_feasibility, shn
from .threshold import precision, required_keys
from . import analysis, sim, stats

__version__ = "0.1.0"

__all__ = [
    "Network",
    "NetworkSpec",
    "FeasibilityReport",
    "build_network",
    "check_feasibility",
    "shn",
    "precision",
    "required_keys",
    "analysis",
    "sim",
    "stats",
    "__version__",
]
