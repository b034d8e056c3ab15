"""Environment engine: resolves actions, emits percepts, injects faults, runs matches."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Mapping

from .actions import ACTION_COST, Action, skip
from .agents import Adjacency, AgentController, EdgeWeight, Percept
from .auction import TimerExpired
from .errors import ConfigError, InputError
from .messages import Rendezvous
from .netsim import ChannelConfig, Harness
from .pathfind import CostModel
from .world import ROLES, TEAMS, AgentState, WorldGraph, color_zones, random_graph

LOG_VERSION = 1
FAULT_KINDS = ("disable", "crash", "drop_rate")


@dataclass(frozen=True)
class Fault:
    """``disable``/``crash`` take an agent id; ``drop_rate`` a probability.

    ``kinds`` optionally limits a drop rate to some payload kinds.
    """

    step: int
    kind: str
    value: object
    kinds: tuple[str, ...] | None = None


@dataclass
class MatchConfig:
    seed: int = 0
    steps: int = 100
    vertices: int = 60
    extra_edges: int = 60
    team_size: int = 6
    max_energy: int = 20
    recharge_rate: int = 5
    unknown_weight: int = 5
    occupy_goals: int | None = None
    tround: int = 2
    aretry: int = 2
    rmax: int | None = None
    max_health: int = 10
    swap_starts: bool = False
    reveal_map: bool = False
    fault_schedule: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.occupy_goals is None:
            self.occupy_goals = self.team_size
        if self.rmax is None:
            self.rmax = self.team_size + 2
        self.fault_schedule = [f if isinstance(f, Fault) else _fault(f) for f in self.fault_schedule]
        self.validate()

    def validate(self) -> None:
        for name in ("vertices", "team_size", "max_energy", "recharge_rate", "unknown_weight",
                     "tround", "aretry", "rmax", "max_health"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        for name in ("steps", "extra_edges", "occupy_goals", "seed"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
        if self.recharge_rate > self.max_energy:
            raise ConfigError("recharge_rate exceeds max_energy")
        if self.unknown_weight > 9:
            raise ConfigError("unknown_weight must lie in [1, 9]")
        if self.tround < 2:
            raise ConfigError("tround must be at least 2")
        n = 2 * self.team_size
        for f in self.fault_schedule:
            if not 0 <= f.step <= self.steps:
                raise ConfigError(f"fault step {f.step} outside [0, {self.steps}]")
            if f.kind in ("disable", "crash") and not (isinstance(f.value, int) and 0 <= f.value < n):
                raise ConfigError(f"fault targets unknown agent {f.value!r}")

    def cost_model(self) -> CostModel:
        return CostModel(self.recharge_rate, self.max_energy, self.unknown_weight)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fault_schedule"] = [_fault_dict(f) for f in self.fault_schedule]
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "MatchConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**data)


def _fault(raw) -> Fault:
    if isinstance(raw, Mapping):
        try:
            kinds = raw.get("kinds")
            return _checked_fault(Fault(raw["step"], raw["kind"], raw["value"],
                                        tuple(kinds) if kinds is not None else None))
        except KeyError as exc:
            raise ConfigError(f"fault entry missing {exc}") from None
    step, kind, value, *rest = raw
    return _checked_fault(Fault(step, kind, value, tuple(rest[0]) if rest and rest[0] else None))


def _checked_fault(f: Fault) -> Fault:
    if f.kind not in FAULT_KINDS:
        raise ConfigError(f"unknown fault kind {f.kind!r}")
    if f.kind == "drop_rate":
        try:
            p = Fraction(str(f.value))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad drop rate {f.value!r}") from None
        if not 0 <= p <= 1:
            raise ConfigError(f"drop rate {f.value} outside [0, 1]")
    return f


def _fault_dict(f: Fault) -> dict:
    d = {"step": f.step, "kind": f.kind, "value": f.value if f.kind != "drop_rate" else str(f.value)}
    if f.kinds is not None:
        d["kinds"] = list(f.kinds)
    return d


@dataclass
class World:
    graph: WorldGraph
    agents: dict[int, AgentState]
    step: int = 0
    crashed: frozenset = frozenset()
    cumulative: dict = field(default_factory=lambda: {t: 0 for t in TEAMS})
    recharge_rate: int = 5
    reveals: dict = field(default_factory=dict)

    def live(self) -> list[AgentState]:
        return [self.agents[a] for a in sorted(self.agents)]


@dataclass(frozen=True)
class StepRecord:
    step: int
    actions: tuple  # (agent, action text, success)
    positions: dict
    disabled: tuple
    colored: dict
    score: dict
    cumulative: dict

    def to_json(self) -> str:
        return json.dumps({
            "kind": "step",
            "step": self.step,
            "actions": [list(a) for a in self.actions],
            "positions": {str(k): v for k, v in self.positions.items()},
            "disabled": list(self.disabled),
            "colored": self.colored,
            "score": self.score,
            "cumulative": self.cumulative,
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, obj: Mapping) -> "StepRecord":
        return cls(obj["step"], tuple(tuple(a) for a in obj["actions"]),
                   {int(k): v for k, v in obj["positions"].items()}, tuple(obj["disabled"]),
                   obj["colored"], obj["score"], obj["cumulative"])


def resolve_step(world: World, actions: Mapping[int, Action]) -> tuple[World, StepRecord]:
    """Apply one simultaneous step: recharge, then moves, then the rest."""
    for aid, act in actions.items():
        if aid not in world.agents:
            raise InputError(f"action from absent agent {aid}")
        if act.agent != aid:
            raise InputError(f"action for {act.agent} filed under {aid}")
    graph = world.graph
    agents = dict(world.agents)
    order = sorted(agents)
    acts = {aid: actions.get(aid) for aid in order}
    ok: dict[int, bool] = {}
    reveals: dict[int, dict] = {}

    for aid in order:
        act = acts[aid]
        if act is None:
            ok[aid] = False
        elif act.kind == "skip":
            ok[aid] = True
        elif act.kind == "recharge":
            a = agents[aid]
            rate = world.recharge_rate // 2 if a.disabled else world.recharge_rate
            agents[aid] = a.evolve(energy=min(a.energy + rate, a.max_energy))
            ok[aid] = True
    for aid in order:
        act = acts[aid]
        if act is not None and act.kind == "goto":
            a = agents[aid]
            w = graph.adj[a.position].get(act.target)
            if w is not None:
                # the mover feels the edge cost whether or not it can pay it
                reveals.setdefault(aid, {})["felt"] = (a.position, act.target, w)
            if w is not None and a.energy >= w:
                agents[aid] = a.evolve(position=act.target, energy=a.energy - w)
                ok[aid] = True
            else:
                ok[aid] = False
    for kind in ("probe", "survey", "repair"):
        cost = ACTION_COST[kind]
        for aid in order:
            act = acts[aid]
            if act is None or act.kind != kind:
                continue
            a = agents[aid]
            if a.disabled or a.energy < cost:
                ok[aid] = False
                continue
            if kind == "repair":
                target = agents.get(act.target)
                if a.role != "Repairer" or target is None or target.position != a.position or act.target == aid:
                    ok[aid] = False
                    continue
                agents[act.target] = target.evolve(health=target.max_health)
            elif kind == "probe":
                reveals.setdefault(aid, {})["probed"] = (a.position, graph.values[a.position])
            else:
                reveals.setdefault(aid, {})["surveyed"] = tuple(
                    (min(a.position, u), max(a.position, u), w) for u, w in sorted(graph.adj[a.position].items()))
            agents[aid] = a.evolve(energy=a.energy - cost)
            ok[aid] = True

    live = [agents[a] for a in order]
    coloring = color_zones(graph, live)
    score = dict(coloring.score_of)
    cumulative = {t: world.cumulative[t] + score[t] for t in TEAMS}
    colored = {t: sum(1 for c in coloring.color_of.values() if c == t) for t in TEAMS}
    record = StepRecord(
        world.step,
        tuple((aid, str(acts[aid] or skip(aid)), ok[aid]) for aid in order),
        {aid: agents[aid].position for aid in order},
        tuple(aid for aid in order if agents[aid].disabled),
        colored, score, cumulative,
    )
    new = World(graph, agents, world.step + 1, world.crashed, cumulative, world.recharge_rate, reveals)
    return new, record


def generate_percepts(world: World, for_step: int) -> dict[int, Percept]:
    """One-hop view per live agent plus what its last action revealed.

    A probe reveals the vertex value, a survey the incident edge weights and a
    move attempt the weight of the edge tried.
    """
    by_vertex: dict[int, list[AgentState]] = {}
    for a in world.live():
        by_vertex.setdefault(a.position, []).append(a)
    out: dict[int, Percept] = {}
    for a in world.live():
        nbrs = tuple(sorted(world.graph.adj[a.position]))
        visible = [b for v in (a.position, *nbrs) for b in by_vertex.get(v, ()) if b.id != a.id]
        visible.sort(key=lambda b: b.id)
        rev = world.reveals.get(a.id, {})
        surveyed = rev.get("surveyed", ())
        if "felt" in rev:
            u, v, w = rev["felt"]
            surveyed = tuple(sorted({*surveyed, (min(u, v), max(u, v), w)}))
        out[a.id] = Percept(a.id, for_step, a, nbrs, tuple(visible), rev.get("probed"),
                            surveyed, world.cumulative[a.team])
    return out


def inject_fault(world: World, harness: Harness | None, fault: Fault, tick: int = 0) -> World:
    """Apply ``fault`` at a step boundary; ``tick`` stamps crashes on the channel."""
    if fault.kind == "disable":
        a = world.agents.get(fault.value)
        if a is None:
            return world
        agents = dict(world.agents)
        agents[a.id] = a.evolve(health=0)
        return World(world.graph, agents, world.step, world.crashed, world.cumulative,
                     world.recharge_rate, world.reveals)
    if fault.kind == "crash":
        if fault.value in world.crashed or fault.value not in world.agents:
            return world
        agents = {k: v for k, v in world.agents.items() if k != fault.value}
        if harness is not None:
            harness.crash(fault.value, tick)
        return World(world.graph, agents, world.step, world.crashed | {fault.value}, world.cumulative,
                     world.recharge_rate, world.reveals)
    if fault.kind == "drop_rate":
        if harness is not None:
            harness.set_drop_probability(Fraction(str(fault.value)), fault.kinds)
        return world
    raise ConfigError(f"unknown fault kind {fault.kind!r}")


@dataclass
class MatchLog:
    config: MatchConfig
    records: list[StepRecord]
    net_events: list = field(default_factory=list)
    assignments: list = field(default_factory=list)
    rendezvous: list = field(default_factory=list)

    @property
    def totals(self) -> dict:
        return dict(self.records[-1].cumulative) if self.records else {t: 0 for t in TEAMS}

    @property
    def winner(self) -> str:
        t = self.totals
        if t["A"] == t["B"]:
            return "draw"
        return "A" if t["A"] > t["B"] else "B"

    def header(self) -> str:
        return json.dumps({"kind": "header", "format": "matchlog", "version": LOG_VERSION,
                           "config": self.config.to_dict()}, separators=(",", ":"))

    def summary(self) -> str:
        t = self.totals
        return json.dumps({"kind": "summary", "steps": len(self.records), "scoreA": t["A"],
                           "scoreB": t["B"], "winner": self.winner}, separators=(",", ":"))

    def lines(self) -> list[str]:
        return [self.header(), *(r.to_json() for r in self.records), self.summary()]

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def net_lines(self) -> list[str]:
        """Channel events, one JSON object per line (empty unless recorded)."""
        return [json.dumps(e, separators=(",", ":")) for e in self.net_events]


def read_log(path) -> tuple[dict, list[StepRecord], dict]:
    header, records, summary = None, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.get("kind")
            if kind == "header":
                header = obj
            elif kind == "step":
                records.append(StepRecord.from_json(obj))
            elif kind == "summary":
                summary = obj
    if header is None or summary is None:
        raise InputError(f"{path}: not a match log")
    return header, records, summary


def initial_world(config: MatchConfig) -> World:
    rng = random.Random(config.seed)
    graph = random_graph(rng, config.vertices, config.extra_edges)
    n = config.team_size
    starts = {t: [rng.randrange(config.vertices) for _ in range(n)] for t in TEAMS}
    if config.swap_starts:
        starts = {"A": starts["B"], "B": starts["A"]}
    agents = {}
    for ti, team in enumerate(TEAMS):
        for i in range(n):
            aid = ti * n + i
            agents[aid] = AgentState(aid, team, ROLES[i % len(ROLES)], starts[team][i],
                                     config.max_energy, config.max_energy, config.max_health, config.max_health)
    return World(graph, agents, recharge_rate=config.recharge_rate)


def run_match(config: MatchConfig, net_log: bool = False) -> MatchLog:
    """Play a full match; the result depends on ``config`` alone."""
    config.validate()
    world = initial_world(config)
    model = config.cost_model()
    teams = {a.id: a.team for a in world.live()}
    harness = Harness(teams, ChannelConfig(0, {}, config.seed), log=net_log)
    ctls = {a.id: AgentController(a, model, config.occupy_goals) for a in world.live()}
    if config.reveal_map:
        for c in ctls.values():
            _reveal(c, world.graph)
    members = {t: tuple(sorted(a for a in teams if teams[a] == t)) for t in TEAMS}
    faults: dict[int, list[Fault]] = {}
    for f in config.fault_schedule:
        faults.setdefault(f.step, []).append(f)

    records: list[StepRecord] = []
    assignments: list = []
    meetings: list = []
    tick = 0
    max_epoch_ticks = (config.rmax + config.aretry + 1) * config.tround + 1
    for t in range(config.steps):
        for f in faults.get(t, ()):
            world = inject_fault(world, harness, f, tick)
        live = sorted(world.agents)

        inbox = harness.deliver_tick(tick)
        for aid in live:
            for env in inbox.get(aid, ()):
                ctls[aid].receive(env)
        percepts = generate_percepts(world, t)
        for aid in live:
            for dst, msg in ctls[aid].perceive(percepts[aid]):
                harness.send(harness.make(aid, dst, tick, msg))
        harness.end_tick()
        tick += 1

        start = tick
        for tick in range(start, start + max_epoch_ticks):
            inbox = harness.deliver_tick(tick)
            outgoing = []
            for aid in live:
                ctl = ctls[aid]
                for env in inbox.get(aid, ()):
                    ctl.receive(env)
                if tick == start:
                    mates = tuple(a for a in members[ctl.team] if a != aid)
                    ctl.start_epoch(t, start, mates, config.tround, config.aretry, config.rmax)
                outgoing.extend((aid, o) for o in ctl.auction.step(TimerExpired(tick)))
            for aid, o in outgoing:
                harness.send(harness.make(aid, o.dst, tick, o.payload))
            harness.end_tick()
            if harness.in_flight == 0 and all(ctls[a].auction.quiet for a in live):
                break
        step_goals = {}
        for aid in live:
            for dst, msg in ctls[aid].finish_epoch():
                harness.send(harness.make(aid, dst, tick, msg))
                if isinstance(msg, Rendezvous):
                    rv = ctls[aid].rendezvous
                    meetings.append({"step": t, "repairer": aid, "patient": rv.patient, "meet": rv.meet_vertex,
                                     "steps_repairer": rv.steps_repairer, "steps_patient": rv.steps_patient})
            if ctls[aid].goal is not None:
                step_goals[aid] = str(ctls[aid].goal)
        assignments.append(step_goals)
        tick += 1

        actions = {aid: ctls[aid].decide_action() for aid in live}
        world, record = resolve_step(world, actions)
        records.append(record)

    return MatchLog(config, records, harness.events, assignments, meetings)


def _reveal(ctl: AgentController, graph: WorldGraph) -> None:
    for v in graph.vertices:
        ctl.store.add(Adjacency(v, tuple(sorted(graph.adj[v])), -1, -1))
    for u, v, w in graph.edges:
        ctl.store.add(EdgeWeight(u, v, w, -1, -1))
