"""Step-minimal planning where moving spends energy and recharging costs a step.

The search runs over ``(vertex, energy)`` states. Every action takes one step,
so a level-synchronous breadth-first search is exact. For one-to-all queries
each vertex only keeps labels whose energy beats every earlier arrival: a
state reached later with no more energy can always be imitated by arriving
earlier and recharging in place.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Mapping, NamedTuple, Sequence, Union

from .errors import InputError, UnreachableError

Adjacency = Union[Sequence[Mapping[int, "int | None"]], Mapping[int, Mapping[int, "int | None"]]]


@dataclass(frozen=True)
class CostModel:
    recharge_rate: int
    max_energy: int
    unknown_weight: int = 5

    def __post_init__(self) -> None:
        if self.recharge_rate < 0 or self.recharge_rate > self.max_energy:
            raise InputError(f"recharge rate {self.recharge_rate} outside [0, {self.max_energy}]")
        if not 1 <= self.unknown_weight <= 9:
            raise InputError(f"unknown edge weight {self.unknown_weight} outside [1, 9]")

    def disabled(self) -> "CostModel":
        """Model for a disabled agent: recharge rate halved, rounded down."""
        return replace(self, recharge_rate=self.recharge_rate // 2)


@dataclass(frozen=True)
class Move:
    src: int
    dst: int
    weight: int


@dataclass(frozen=True)
class Recharge:
    at: int


Step = Union[Move, Recharge]


@dataclass(frozen=True)
class PathPlan:
    actions: tuple[Step, ...]
    start: int
    goal: int
    start_energy: int
    final_energy: int

    @property
    def steps(self) -> int:
        return len(self.actions)

    def vertices(self) -> list[int]:
        """Position after each action; the tie-break key among equal plans."""
        return [a.dst if isinstance(a, Move) else a.at for a in self.actions]

    def validate(self, model: CostModel) -> None:
        """Replay the plan and raise ``AssertionError`` on any broken invariant."""
        pos, energy = self.start, self.start_energy
        for a in self.actions:
            if isinstance(a, Move):
                assert a.src == pos, f"move from {a.src} but standing on {pos}"
                assert energy >= a.weight, f"energy {energy} below edge weight {a.weight}"
                energy -= a.weight
                pos = a.dst
            else:
                assert a.at == pos
                energy = min(energy + model.recharge_rate, model.max_energy)
            assert 0 <= energy <= model.max_energy
        assert pos == self.goal, f"plan ends on {pos}, not {self.goal}"
        assert energy == self.final_energy


def _adj(graph) -> Adjacency:
    return graph.adj if hasattr(graph, "adj") else graph


def _has(adj: Adjacency, v: int) -> bool:
    if isinstance(adj, Mapping):
        return v in adj
    return isinstance(v, int) and 0 <= v < len(adj)


def _vertices(adj: Adjacency):
    return sorted(adj) if isinstance(adj, Mapping) else range(len(adj))


class LevelSearch:
    """Resumable one-to-all search; each :meth:`advance` settles one more level.

    ``best`` maps every vertex seen so far to the highest energy it has been
    reached with. Plain state, so it can be copied mid-search.
    """

    def __init__(self, graph, start: int, energy: int, model: CostModel, limit: int | None = None):
        adj = _adj(graph)
        if not _has(adj, start):
            raise InputError(f"unknown start vertex {start}")
        if not 0 <= energy <= model.max_energy:
            raise InputError(f"start energy {energy} outside [0, {model.max_energy}]")
        self.adj = adj
        self.model = model
        self.limit = -1 if limit is None else limit
        self.level = 0
        self.best = {start: energy}
        self.frontier = {start: energy}

    def advance(self) -> list[int] | None:
        """Vertices first reached at the next level, sorted; ``None`` once exhausted."""
        frontier, best, adj = self.frontier, self.best, self.adj
        if not frontier or self.level == self.limit:
            return None
        emax, rate, wdef = self.model.max_energy, self.model.recharge_rate, self.model.unknown_weight
        self.level += 1
        cand: dict[int, int] = {}
        cget, bget = cand.get, best.get
        for v, e in frontier.items():
            if rate and e < emax:
                e2 = e + rate if e + rate < emax else emax
                if e2 > cget(v, -1):
                    cand[v] = e2
            for u, w in adj[v].items():
                r = e - (wdef if w is None else w)
                if r >= 0 and r > bget(u, -1) and r > cget(u, -1):
                    cand[u] = r
        frontier = self.frontier = {}
        new = []
        for u, e2 in cand.items():
            old = bget(u)
            if old is None:
                new.append(u)
            elif e2 <= old:
                continue
            best[u] = e2
            frontier[u] = e2
        new.sort()
        return new


def reach_levels(graph, start: int, energy: int, model: CostModel,
                 limit: int | None = None) -> Iterator[tuple[int, list[int], dict[int, int]]]:
    """Yield ``(level, newly_reached, best)`` for each search level.

    ``newly_reached`` lists the vertices whose minimum step count is ``level``;
    ``best`` is the live map of the highest energy seen per vertex so far.
    """
    search = LevelSearch(graph, start, energy, model, limit)
    yield 0, [start], search.best
    while (new := search.advance()) is not None:
        yield search.level, new, search.best


def step_table(graph, start: int, energy: int, model: CostModel, limit: int | None = None) -> dict[int, int]:
    """Minimum step count from ``(start, energy)`` to every reachable vertex."""
    steps: dict[int, int] = {}
    for level, new, _ in reach_levels(graph, start, energy, model, limit):
        for v in new:
            steps[v] = level
    return steps


def _successors(adj, v: int, e: int, model: CostModel):
    if model.recharge_rate and e < model.max_energy:
        yield v, min(e + model.recharge_rate, model.max_energy), None
    for u, w in adj[v].items():
        w = model.unknown_weight if w is None else w
        if e >= w:
            yield u, e - w, w


def plan_path(graph, start: int, start_energy: int, goal: int, model: CostModel) -> PathPlan:
    """Minimum-step plan from ``(start, start_energy)`` to ``goal``.

    Among minimum-step plans the one ending with the most energy wins, then
    the one whose sequence of positions is lexicographically smallest.
    Edges with unknown weight (``None``) cost ``model.unknown_weight``.
    """
    adj = _adj(graph)
    if not _has(adj, goal):
        raise InputError(f"unknown goal vertex {goal}")
    fwd: dict[int, int] = {}
    target_energy = None
    for level, new, best in reach_levels(adj, start, start_energy, model):
        for v in new:
            fwd[v] = level
        if goal in fwd:
            target_energy = best[goal]
            break
    if target_energy is None:
        raise UnreachableError(f"vertex {goal} unreachable from {start}")
    total = fwd[goal]
    if total == 0:
        return PathPlan((), start, goal, start_energy, start_energy)

    # exact distances to the target state, restricted to states that can lie
    # on a minimum-step plan (vertex lower bound + distance-to-target <= total)
    emax, rate = model.max_energy, model.recharge_rate
    target = (goal, target_energy)
    bwd = {target: 0}
    queue = deque([target])
    while queue:
        v, e = queue.popleft()
        d = bwd[(v, e)] + 1
        preds = []
        if rate:
            if e < emax:
                if e - rate >= 0:
                    preds.append((v, e - rate))
            else:
                preds.extend((v, x) for x in range(max(0, emax - rate), emax))
        for u, w in adj[v].items():
            w = model.unknown_weight if w is None else w
            if e + w <= emax:
                preds.append((u, e + w))
        for p in preds:
            if p not in bwd and fwd.get(p[0], total + 1) + d <= total:
                bwd[p] = d
                queue.append(p)

    actions: list[Step] = []
    v, e = start, start_energy
    for i in range(total):
        need = total - i - 1
        choice = None
        for u, e2, w in _successors(adj, v, e, model):
            if bwd.get((u, e2)) == need and (choice is None or u < choice[0]):
                choice = (u, e2, w)
        assert choice is not None, "search tables disagree"
        u, e2, w = choice
        actions.append(Recharge(v) if w is None else Move(v, u, w))
        v, e = u, e2
    return PathPlan(tuple(actions), start, goal, start_energy, e)


class MeetingPoint(NamedTuple):
    meet: int
    steps_repairer: int
    steps_disabled: int
    last_mover: str  # "Repairer" or "Disabled"


def meeting_point(graph, repairer: tuple[int, int], disabled: tuple[int, int], model: CostModel) -> MeetingPoint:
    """Vertex minimising the later of the two arrivals.

    Ties go to the smaller arrival sum, then to the smaller vertex id. The
    disabled agent plans with the halved recharge rate. The agent arriving
    strictly later takes the last step; on equal counts the repairer does.
    """
    rep = step_table(graph, repairer[0], repairer[1], model)
    dis = step_table(graph, disabled[0], disabled[1], model.disabled())
    best = None
    for m in sorted(rep.keys() & dis.keys()):
        key = (max(rep[m], dis[m]), rep[m] + dis[m], m)
        if best is None or key < best:
            best = key
    if best is None:
        raise UnreachableError("no vertex reachable by both agents")
    m = best[2]
    last = "Disabled" if dis[m] > rep[m] else "Repairer"
    return MeetingPoint(m, rep[m], dis[m], last)


def best_first_target(beliefs, agent_pos: int, candidate_score: Callable[[int], int], model: CostModel,
                      energy: int | None = None) -> int | None:
    """Nearest vertex (in plan steps) with a positive score.

    Vertices at the same step count are ranked by higher score, then lower id.
    ``energy`` defaults to the believed own energy when ``beliefs`` carries a
    ``self_state``, else to full energy.
    """
    if energy is None:
        self_state = getattr(beliefs, "self_state", None)
        energy = self_state.energy if self_state is not None else model.max_energy
    for _, new, _ in reach_levels(beliefs, agent_pos, energy, model):
        hits = [(candidate_score(v), v) for v in new]
        hits = [(s, v) for s, v in hits if s > 0]
        if hits:
            return min(hits, key=lambda sv: (-sv[0], sv[1]))[1]
    return None
