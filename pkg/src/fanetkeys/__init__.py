"""fanetkeys: a seed-reproducible simulator of opportunistic key management
in cooperative ad hoc networks.

Mobile nodes exchange expiring, self-signed public keys whenever they come
into radio range, route through key-paths (chains of mutually known keys),
and manage bounded key stores under pluggable replacement strategies. The
package simulates aerial (3D, free-space) and ground (2D, two-ray) networks
and reports the connectivity, path-length and meeting-time statistics of the
resulting key graphs.
"""

__version__ = "0.1.0"

from .engine import ScenarioConfig, SweepSpec, run, sweep  # noqa: E402,F401
