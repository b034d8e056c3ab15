"""Two-team graph-control contest with autonomous agents that coordinate by auction.

The environment (``world``, ``sim``) is deterministic given a seed. Agents
(``agents``) keep mergeable belief stores, plan energy-aware routes
(``pathfind``) and split goals through a lock-step auction (``auction``) run
over a simulated lossy channel (``netsim``).
"""

from .sim import MatchConfig, MatchLog, run_match

__all__ = ["MatchConfig", "MatchLog", "run_match"]
__version__ = "0.1.0"
