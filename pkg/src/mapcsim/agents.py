"""Agent controllers: belief stores, percept sharing and the control loop."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Iterable, Union

from .actions import ACTION_COST, Action, goto, recharge, skip
from .auction import AuctionAgent, BidOrder, GoalId, GoalSet
from .errors import StalePerceptError, UnreachableError
from .messages import PerceptShare, Rendezvous
from .netsim import BROADCAST, Envelope
from .pathfind import CostModel, Move, PathPlan, best_first_target, meeting_point, plan_path
from .world import AgentState

log = logging.getLogger(__name__)


# -- facts -----------------------------------------------------------------


@dataclass(frozen=True)
class VertexValue:
    vertex: int
    value: int
    step: int
    reporter: int


@dataclass(frozen=True)
class EdgeWeight:
    u: int
    v: int
    weight: int
    step: int
    reporter: int


@dataclass(frozen=True)
class Adjacency:
    """The complete neighbour set of ``vertex`` (seen by standing on it)."""

    vertex: int
    neighbors: tuple[int, ...]
    step: int
    reporter: int


@dataclass(frozen=True)
class Sighting:
    agent: int
    team: str
    role: str
    vertex: int
    health: int
    energy: int
    max_energy: int
    max_health: int
    step: int
    reporter: int

    @property
    def disabled(self) -> bool:
        return self.health == 0

    def as_state(self) -> AgentState:
        return AgentState(self.agent, self.team, self.role, self.vertex, self.energy,
                          self.max_energy, self.health, self.max_health)

    @classmethod
    def of(cls, a: AgentState, step: int, reporter: int) -> "Sighting":
        return cls(a.id, a.team, a.role, a.position, a.health, a.energy, a.max_energy, a.max_health, step, reporter)


Fact = Union[VertexValue, EdgeWeight, Adjacency, Sighting]


@dataclass(frozen=True)
class Percept:
    agent: int
    step: int
    self_state: AgentState
    neighbors: tuple[int, ...]
    visible: tuple[AgentState, ...] = ()
    probed: tuple[int, int] | None = None
    surveyed: tuple[tuple[int, int, int], ...] = ()
    team_score: int = 0


def _older(a, b) -> bool:
    """True when static fact ``a`` has earlier provenance than ``b``."""
    return (a.step, a.reporter) < (b.step, b.reporter)


class BeliefStore:
    """Mergeable local world model.

    Vertex values, edge weights and adjacency are grow-only; a recorded value
    never changes, only its provenance may move to an earlier report so that
    stores converge. Sightings are last-writer-wins on ``(step, -reporter)``.
    """

    def __init__(self, owner: int, team: str, self_state: AgentState | None = None):
        self.owner = owner
        self.team = team
        self.self_state = self_state
        self.current_step = -1
        self.vertex_values: dict[int, VertexValue] = {}
        self.edge_weights: dict[tuple[int, int], EdgeWeight] = {}
        self.adjacency: dict[int, Adjacency] = {}
        self.sightings: dict[int, Sighting] = {}
        self.adj: dict[int, dict[int, int | None]] = {}
        self.graph_version = 0
        self._unknown: dict[int, int] = {}

    # -- queries ------------------------------------------------------------

    def known_vertices(self) -> list[int]:
        return sorted(self.adj)

    def unknown_edge_vertices(self) -> list[int]:
        return [v for v, n in self._unknown.items() if n > 0]

    def explored(self, v: int) -> bool:
        return v in self.adjacency

    def teammates(self) -> list[AgentState]:
        return [s.as_state() for a, s in sorted(self.sightings.items()) if s.team == self.team]

    def snapshot(self) -> tuple:
        """Shared content only; equal snapshots mean converged stores."""
        return (
            dict(sorted(self.vertex_values.items())),
            dict(sorted(self.edge_weights.items())),
            dict(sorted(self.adjacency.items())),
            dict(sorted(self.sightings.items())),
        )

    def facts(self) -> list[Fact]:
        vv, ew, ad, si = self.snapshot()
        return [*vv.values(), *ew.values(), *ad.values(), *si.values()]

    # -- updates ------------------------------------------------------------

    def _add_edge(self, u: int, v: int) -> None:
        a, b = (u, v) if u < v else (v, u)
        if b in self.adj.setdefault(a, {}):
            return
        self.adj.setdefault(b, {})
        w = self.edge_weights.get((a, b))
        w = None if w is None else w.weight
        self.adj[a][b] = w
        self.adj[b][a] = w
        if w is None:
            self._unknown[a] = self._unknown.get(a, 0) + 1
            self._unknown[b] = self._unknown.get(b, 0) + 1
        self.graph_version += 1

    def _learn_weight(self, a: int, b: int, w: int) -> None:
        if b in self.adj.get(a, ()):
            if self.adj[a][b] is None:
                self._unknown[a] -= 1
                self._unknown[b] -= 1
            self.adj[a][b] = w
            self.adj[b][a] = w
            self.graph_version += 1
        else:
            self._add_edge(a, b)

    def add(self, fact: Fact) -> bool:
        """Merge one fact; True when the store changed in content."""
        if isinstance(fact, Sighting):
            # the vertex is known even when the sighting itself is superseded
            self.adj.setdefault(fact.vertex, {})
            old = self.sightings.get(fact.agent)
            if old is not None and (old.step, -old.reporter) >= (fact.step, -fact.reporter):
                return False
            self.sightings[fact.agent] = fact
            return True
        if isinstance(fact, VertexValue):
            old = self.vertex_values.get(fact.vertex)
            if old is not None:
                return self._keep_static(old, fact, old.value == fact.value, self.vertex_values, fact.vertex)
            self.vertex_values[fact.vertex] = fact
            self.adj.setdefault(fact.vertex, {})
            return True
        if isinstance(fact, EdgeWeight):
            key = (fact.u, fact.v) if fact.u < fact.v else (fact.v, fact.u)
            old = self.edge_weights.get(key)
            if old is not None:
                return self._keep_static(old, fact, old.weight == fact.weight, self.edge_weights, key)
            self.edge_weights[key] = fact
            self._learn_weight(key[0], key[1], fact.weight)
            return True
        if isinstance(fact, Adjacency):
            old = self.adjacency.get(fact.vertex)
            if old is not None:
                return self._keep_static(old, fact, old.neighbors == fact.neighbors, self.adjacency, fact.vertex)
            self.adjacency[fact.vertex] = fact
            self.adj.setdefault(fact.vertex, {})
            for u in fact.neighbors:
                self._add_edge(fact.vertex, u)
            return True
        log.warning("store %s: ignoring unknown fact %r", self.owner, fact)
        return False

    @staticmethod
    def _keep_static(old, new, same: bool, table: dict, key) -> bool:
        if not same:
            log.warning("conflicting static facts %r and %r; keeping the first", old, new)
            return False
        if _older(new, old):
            table[key] = new
            return True
        return False

    def merge(self, facts: Iterable[Fact]) -> list[Fact]:
        return [f for f in facts if self.add(f)]

    def copy(self) -> "BeliefStore":
        return copy.deepcopy(self)

    def ingest(self, percept: Percept) -> list[Fact]:
        if percept.step < self.current_step:
            raise StalePerceptError(f"percept for step {percept.step} after step {self.current_step}")
        self.current_step = percept.step
        self.self_state = percept.self_state
        me, step = self.owner, percept.step
        facts: list[Fact] = [Sighting.of(percept.self_state, step, me)]
        facts.extend(Sighting.of(a, step, me) for a in percept.visible)
        here = percept.self_state.position
        facts.append(Adjacency(here, tuple(sorted(percept.neighbors)), step, me))
        if percept.probed is not None:
            facts.append(VertexValue(percept.probed[0], percept.probed[1], step, me))
        for u, v, w in percept.surveyed:
            facts.append(EdgeWeight(min(u, v), max(u, v), w, step, me))
        # new content only; provenance-only improvements are not re-shared
        return [f for f in facts if self._is_new(f) and self.add(f)]

    def _is_new(self, f: Fact) -> bool:
        if isinstance(f, VertexValue):
            return f.vertex not in self.vertex_values
        if isinstance(f, EdgeWeight):
            return (f.u, f.v) not in self.edge_weights
        if isinstance(f, Adjacency):
            return f.vertex not in self.adjacency
        return True


def on_percept(store: BeliefStore, percept: Percept) -> tuple[BeliefStore, list[Fact]]:
    """Update ``store`` in place from a percept; return it with the facts to share."""
    share = store.ingest(percept)
    return store, share


def merge_beliefs(store: BeliefStore, facts: Iterable[Fact]) -> BeliefStore:
    """Pure merge: a new store holding ``store`` joined with ``facts``."""
    out = store.copy()
    out.merge(facts)
    return out


# -- controller --------------------------------------------------------------


@dataclass(frozen=True)
class RendezvousPlan:
    repairer: int
    patient: int
    meet_vertex: int
    last_mover: int
    step_announced: int
    patient_route: frozenset = frozenset()
    steps_repairer: int = 0
    steps_patient: int = 0

    def message(self) -> Rendezvous:
        return Rendezvous(self.repairer, self.patient, self.meet_vertex, self.last_mover, self.step_announced)


@dataclass
class _PlanCache:
    target: int
    version: int
    plan: PathPlan
    states: list = field(default_factory=list)


def _plan_states(plan: PathPlan, model: CostModel) -> list[tuple[int, int]]:
    pos, e = plan.start, plan.start_energy
    out = [(pos, e)]
    for a in plan.actions:
        if isinstance(a, Move):
            pos, e = a.dst, e - a.weight
        else:
            e = min(e + model.recharge_rate, model.max_energy)
        out.append((pos, e))
    return out


class AgentController:
    """Autonomous agent acting on its own belief store.

    All interaction with other agents goes through envelopes produced by the
    methods here and routed by the engine.
    """

    def __init__(self, state: AgentState, model: CostModel, occupy_goals: int = 0):
        self.id = state.id
        self.team = state.team
        self.role = state.role
        self.model = model
        self.occupy_goals = occupy_goals
        self.store = BeliefStore(state.id, state.team, state)
        self.store.add(Sighting.of(state, -1, state.id))
        self.auction: AuctionAgent | None = None
        self.goal: GoalId | None = None
        self.rendezvous: RendezvousPlan | None = None
        self._plan: _PlanCache | None = None

    @property
    def state(self) -> AgentState:
        return self.store.self_state

    # -- messaging --------------------------------------------------------------

    def perceive(self, percept: Percept) -> list[tuple[int, object]]:
        _, share = on_percept(self.store, percept)
        if self.rendezvous is not None and self.rendezvous.patient == self.id and not self.state.disabled:
            self.rendezvous = None
        return [(BROADCAST, PerceptShare(tuple(share)))] if share else []

    def receive(self, env: Envelope) -> None:
        msg = env.payload
        if isinstance(msg, PerceptShare):
            self.store.merge(msg.facts)
        elif isinstance(msg, Rendezvous):
            if msg.patient != self.id or not self.state.disabled:
                return
            cur = self.rendezvous
            if cur is None or (msg.step_announced, -msg.repairer) > (cur.step_announced, -cur.repairer):
                self.rendezvous = RendezvousPlan(msg.repairer, msg.patient, msg.meet_vertex,
                                                 msg.last_mover, msg.step_announced)
        elif self.auction is not None:
            self.auction.receive(env)

    # -- auction ----------------------------------------------------------------

    def goals(self) -> GoalSet:
        mates = [s.as_state() for s in self.store.sightings.values() if s.team == self.team and s.disabled]
        return GoalSet.of(self.store, mates, self.occupy_goals)

    def start_epoch(self, epoch: int, start_tick: int, teammates: tuple[int, ...],
                    tround: int, aretry: int, rmax: int) -> AuctionAgent:
        utilities = BidOrder.search(self.state, self.goals(), self.store, self.model)
        self.auction = AuctionAgent(self.id, teammates, utilities, start_tick, epoch, tround, aretry, rmax)
        return self.auction

    def finish_epoch(self) -> list[tuple[int, object]]:
        """Adopt the agreed goal; a repairer holding a Repair goal announces the meeting."""
        self.goal = self.auction.goal if self.auction is not None else None
        self.auction = None
        if self.goal is None or self.goal.kind != "Repair":
            if self.rendezvous is not None and self.rendezvous.repairer == self.id:
                self.rendezvous = None
            return []
        patient = self.goal.target
        rv = self.rendezvous
        seen = self.store.sightings.get(patient)
        if rv is not None and rv.repairer == self.id and rv.patient == patient and seen is not None \
                and seen.vertex in rv.patient_route:
            return []
        try:
            plan, msg = rendezvous_announce(self, patient)
        except UnreachableError:
            log.info("agent %s abandons repair of %s: unreachable", self.id, patient)
            self.goal = None
            return []
        return [(BROADCAST, msg)]

    # -- control loop -----------------------------------------------------------

    def _next_step(self, target: int, model: CostModel) -> Action:
        me = self.state
        cache = self._plan
        here = (me.position, me.energy)
        if cache is not None and cache.target == target and cache.version == self.store.graph_version \
                and here in cache.states:
            i = cache.states.index(here)
            plan = cache.plan
            action = plan.actions[i] if i < len(plan.actions) else None
        else:
            try:
                plan = plan_path(self.store.adj, me.position, me.energy, target, model)
            except UnreachableError:
                self._plan = None
                return recharge(self.id) if me.energy < model.max_energy else skip(self.id)
            self._plan = _PlanCache(target, self.store.graph_version, plan, _plan_states(plan, model))
            action = plan.actions[0] if plan.actions else None
        if action is None:
            return skip(self.id)
        if isinstance(action, Move):
            if action.weight > me.energy:
                return recharge(self.id)
            return goto(self.id, action.dst)
        return recharge(self.id)

    def _stand(self) -> Action:
        return recharge(self.id) if self.state.energy < self.model.max_energy else skip(self.id)

    def decide_action(self) -> Action:
        return decide_action(self)


def decide_action(ctl: AgentController) -> Action:
    """Priority ladder: disabled rendezvous, energy guard, assigned goal, exploration, skip."""
    me = ctl.state
    store = ctl.store
    if me.disabled:
        rv = ctl.rendezvous
        if rv is None or rv.patient != ctl.id:
            return recharge(ctl.id)
        if me.position == rv.meet_vertex:
            return recharge(ctl.id)
        return ctl._next_step(rv.meet_vertex, ctl.model.disabled())

    goal = ctl.goal
    if goal is not None:
        if goal.kind == "Repair":
            rv = ctl.rendezvous
            target = rv.meet_vertex if rv is not None and rv.repairer == ctl.id else None
        else:
            target = goal.target
        if target is not None:
            if me.position == target:
                if goal.kind == "Occupy":
                    return ctl._stand()
                kind = goal.kind.lower()
                if ACTION_COST[kind] > me.energy:
                    return recharge(ctl.id)
                return Action(kind, ctl.id, goal.target if kind == "repair" else None)
            return ctl._next_step(target, ctl.model)

    def unexplored(v: int) -> int:
        return 0 if store.explored(v) else 1

    target = best_first_target(store, me.position, unexplored, ctl.model, me.energy)
    if target is not None:
        return ctl._next_step(target, ctl.model)
    return skip(ctl.id)


def rendezvous_announce(ctl: AgentController, patient: int) -> tuple[RendezvousPlan, Rendezvous]:
    """Repairer side: fix the meeting vertex and who takes the last step."""
    me = ctl.state
    seen = ctl.store.sightings.get(patient)
    if seen is None:
        raise UnreachableError(f"patient {patient} never sighted")
    mp = meeting_point(ctl.store.adj, (me.position, me.energy), (seen.vertex, seen.energy), ctl.model)
    route = {seen.vertex}
    try:
        p_plan = plan_path(ctl.store.adj, seen.vertex, seen.energy, mp.meet, ctl.model.disabled())
        route.update(p_plan.vertices())
    except UnreachableError:
        pass
    last = ctl.id if mp.last_mover == "Repairer" else patient
    plan = RendezvousPlan(ctl.id, patient, mp.meet, last, ctl.store.current_step, frozenset(route),
                          mp.steps_repairer, mp.steps_disabled)
    ctl.rendezvous = plan
    return plan, plan.message()
