"""Scenario ground truth: terrain graph, agent records and zone scoring."""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import InputError

TEAMS = ("A", "B")
ROLES = ("Explorer", "Repairer", "Sentinel")

VALUE_RANGE = (1, 10)
WEIGHT_RANGE = (1, 9)


def other_team(team: str) -> str:
    return "B" if team == "A" else "A"


@dataclass(frozen=True)
class WorldGraph:
    """Undirected weighted graph with a value on every vertex.

    Vertices are ``0 .. len(values) - 1``. ``edges`` holds ``(u, v, weight)``
    triples with ``u < v``.
    """

    values: tuple[int, ...]
    edges: tuple[tuple[int, int, int], ...]
    adj: tuple[dict[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.values)
        if n == 0:
            raise InputError("graph needs at least one vertex")
        adj: list[dict[int, int]] = [{} for _ in range(n)]
        norm = []
        for u, v, w in self.edges:
            if u == v:
                raise InputError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"edge ({u}, {v}) has an unknown endpoint")
            if v in adj[u]:
                raise InputError(f"parallel edge ({u}, {v})")
            if not WEIGHT_RANGE[0] <= w <= WEIGHT_RANGE[1]:
                raise InputError(f"edge weight {w} outside {WEIGHT_RANGE}")
            adj[u][v] = w
            adj[v][u] = w
            norm.append((min(u, v), max(u, v), w))
        for x in self.values:
            if not VALUE_RANGE[0] <= x <= VALUE_RANGE[1]:
                raise InputError(f"vertex value {x} outside {VALUE_RANGE}")
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "adj", tuple(adj))
        if not self._connected():
            raise InputError("graph is not connected")

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def vertices(self) -> range:
        return range(len(self.values))

    def has_vertex(self, v: int) -> bool:
        return isinstance(v, int) and 0 <= v < len(self.values)

    def weight(self, u: int, v: int) -> int:
        return self.adj[u][v]

    def _connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(self.values)


def random_graph(rng: random.Random, n: int, extra_edges: int) -> WorldGraph:
    """Random connected graph: a random spanning tree plus ``extra_edges`` chords."""
    if n < 1:
        raise InputError("n must be positive")
    order = list(range(n))
    rng.shuffle(order)
    edges: dict[tuple[int, int], int] = {}
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        edges[(min(u, v), max(u, v))] = rng.randint(*WEIGHT_RANGE)
    budget = min(extra_edges, n * (n - 1) // 2 - (n - 1))
    while budget > 0:
        u, v = rng.randrange(n), rng.randrange(n)
        key = (min(u, v), max(u, v))
        if u == v or key in edges:
            continue
        edges[key] = rng.randint(*WEIGHT_RANGE)
        budget -= 1
    values = tuple(rng.randint(*VALUE_RANGE) for _ in range(n))
    return WorldGraph(values, tuple((u, v, w) for (u, v), w in edges.items()))


@dataclass(frozen=True)
class AgentState:
    id: int
    team: str
    role: str
    position: int
    energy: int
    max_energy: int
    health: int
    max_health: int

    def __post_init__(self) -> None:
        if self.team not in TEAMS:
            raise InputError(f"unknown team {self.team!r}")
        if self.role not in ROLES:
            raise InputError(f"unknown role {self.role!r}")
        if not 0 <= self.energy <= self.max_energy:
            raise InputError(f"agent {self.id}: energy {self.energy} outside [0, {self.max_energy}]")
        if not 0 <= self.health <= self.max_health:
            raise InputError(f"agent {self.id}: health {self.health} outside [0, {self.max_health}]")

    @property
    def disabled(self) -> bool:
        return self.health == 0

    def evolve(self, **changes) -> "AgentState":
        return replace(self, **changes)


@dataclass(frozen=True)
class Coloring:
    color_of: Mapping[int, str]
    score_of: Mapping[str, int]


def _check_positions(graph: WorldGraph, agents: Iterable[AgentState]) -> None:
    for a in agents:
        if not graph.has_vertex(a.position):
            raise InputError(f"agent {a.id} stands on unknown vertex {a.position}")


def _majority(counts: Counter) -> str | None:
    if not counts:
        return None
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return None
    return ranked[0][0] if ranked[0][1] > 0 else None


def dominant_team(graph: WorldGraph, vertex: int, agents: Sequence[AgentState]) -> str | None:
    """Team with strictly more non-disabled agents on ``vertex`` than any other."""
    if not graph.has_vertex(vertex):
        raise InputError(f"unknown vertex {vertex}")
    _check_positions(graph, agents)
    return _majority(Counter(a.team for a in agents if a.position == vertex and not a.disabled))


def color_zones(graph: WorldGraph, agents: Sequence[AgentState]) -> Coloring:
    """Three-phase zone coloring: direct domination, neighbour majority, enclosed fill."""
    _check_positions(graph, agents)
    present: dict[int, Counter] = {}
    for a in agents:
        if not a.disabled:
            present.setdefault(a.position, Counter())[a.team] += 1

    direct: dict[int, str] = {}
    for v in sorted(present):
        team = _majority(present[v])
        if team is not None:
            direct[v] = team

    colored = dict(direct)
    # only phase-1 colors vote here, so the pass is order independent
    for v in graph.vertices:
        if v in direct:
            continue
        votes = Counter(direct[u] for u in graph.adj[v] if u in direct)
        team = _majority(votes)
        if team is not None:
            colored[v] = team

    filled: dict[int, str] = {}
    seen: set[int] = set()
    for start in graph.vertices:
        if start in colored or start in seen:
            continue
        component = [start]
        border: set[str] = set()
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in graph.adj[u]:
                if w in colored:
                    border.add(colored[w])
                elif w not in seen:
                    seen.add(w)
                    component.append(w)
                    queue.append(w)
        if len(border) == 1:
            team = next(iter(border))
            for u in component:
                filled[u] = team
    colored.update(filled)

    color_of = {v: colored[v] for v in sorted(colored)}
    score_of = {t: 0 for t in TEAMS}
    for v, team in color_of.items():
        score_of[team] += graph.values[v]
    return Coloring(color_of, score_of)


def zone_score(coloring: Coloring, team: str) -> int:
    if team not in TEAMS:
        raise InputError(f"unknown team {team!r}")
    return coloring.score_of.get(team, 0)
