"""Drivers shared by the protocol and acceptance tests."""

from __future__ import annotations

import random
from fractions import Fraction

from mapcsim.agents import Adjacency, EdgeWeight, Sighting, VertexValue
from mapcsim.auction import AuctionAgent, run_epoch
from mapcsim.netsim import ChannelConfig, Harness
from mapcsim.pathfind import CostModel
from mapcsim.world import AgentState, random_graph


def matrix_agents(utilities, rmax=None, aretry=2, tround=2, start_tick=0):
    """One auction agent per matrix row; goals are column indices."""
    n = len(utilities)
    rmax = n + 2 if rmax is None else rmax
    return {
        a: AuctionAgent(a, tuple(b for b in range(n) if b != a),
                        {g: u for g, u in enumerate(row) if u is not None}, start_tick,
                        tround=tround, aretry=aretry, rmax=rmax)
        for a, row in enumerate(utilities)
    }


def run_matrix_auction(utilities, drop=Fraction(0), seed=0, crashed=(), kinds=("bid",), harness_cls=Harness):
    """Run one epoch; returns ``(agents, harness, last_tick)``.

    ``crashed`` agents are dead before the first tick. ``kinds`` limits which
    payloads the drop rate applies to.
    """
    agents = matrix_agents(utilities)
    teams = {a: "A" for a in agents}
    cfg = ChannelConfig(drop, {a: 0 for a in crashed}, seed, frozenset(kinds) if kinds else None)
    harness = harness_cls(teams, cfg)
    last = run_epoch(agents, harness, 0)
    return agents, harness, last


def live_ledgers(agents, crashed=()):
    return {a: ag.owner for a, ag in agents.items() if a not in crashed}


def as_owner(assignment):
    """Agent -> goal map turned into goal -> agent, sorted by goal."""
    return dict(sorted((g, a) for a, g in assignment.items()))


def reduced(utilities, crashed):
    """Matrix with crashed agents' rows made ineligible (keeps agent ids stable)."""
    return [[None] * len(row) if a in crashed else list(row) for a, row in enumerate(utilities)]


def no_double_ownership(agents):
    for ag in agents.values():
        owners = list(ag.owner.values())
        if len(owners) != len(set(owners)):
            return False
    return True


def trajectory(rng, graph, agents=6, steps=10):
    """Ground truth ``(agent, step) -> (vertex, health)`` for generated sightings."""
    return {(a, t): (rng.randrange(graph.n), rng.choice([0, 10])) for a in range(agents) for t in range(steps)}


def random_facts(rng, graph, count, truth):
    """Facts consistent with ``graph`` and random provenance.

    Sightings follow ``truth``, so two reports for the same agent and step
    always agree.
    """
    facts = []
    for _ in range(count):
        kind = rng.randrange(4)
        step, rep = rng.randint(0, 9), rng.randint(0, 4)
        v = rng.randrange(graph.n)
        if kind == 0:
            facts.append(VertexValue(v, graph.values[v], step, rep))
        elif kind == 1 and graph.edges:
            u, w, wt = rng.choice(graph.edges)
            facts.append(EdgeWeight(u, w, wt, step, rep))
        elif kind == 2:
            facts.append(Adjacency(v, tuple(sorted(graph.adj[v])), step, rep))
        else:
            a = rng.randrange(6)
            pos, health = truth[(a, step)]
            facts.append(Sighting.of(AgentState(a, "A", "Explorer", pos, 20, 20, health, 10), step, rep))
    return facts


def planning_instance(seed, max_v=12):
    """Random graph with some unknown weights and a random cost model.

    Returns ``(rng, adj, model)``; ``rng`` continues the seeded stream.
    """
    rng = random.Random(seed)
    n = rng.randint(1, max_v)
    g = random_graph(rng, n, rng.randint(0, n))
    emax = rng.randint(1, 10)
    model = CostModel(rng.randint(0, emax), emax, rng.randint(1, 9))
    adj = [{u: (None if rng.random() < 0.2 else w) for u, w in g.adj[v].items()} for v in g.vertices]
    for v in g.vertices:  # keep unknown marks symmetric
        for u in adj[v]:
            adj[u][v] = adj[v][u]
    return rng, adj, model
