"""Distributed goal assignment by sequential single-item auction rounds.

Each epoch runs in lock-step rounds of ``tround`` ticks starting at a common
tick. At a round start every unassigned agent broadcasts its best bid; one
tick later each agent picks the winner among the bids it actually received.
An agent that finds itself the winner claims the goal and broadcasts an
``Award``. Awards are authoritative: the ledger is a pure function of the
set of claims an agent has heard, so agents that heard the same claims agree
even when they saw different bids.
"""

from __future__ import annotations

import copy
import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .errors import ProtocolError, SizeError, UnreachableError
from .messages import Award, Bid
from .netsim import BROADCAST, Envelope, Harness
from .pathfind import CostModel, LevelSearch, meeting_point, step_table

log = logging.getLogger(__name__)

KINDS = ("Repair", "Probe", "Survey", "Occupy")
BASE_VALUE = {"Repair": 20, "Probe": 10, "Survey": 6}
ROLE_SCALE = {
    ("Explorer", "Probe"): 2,
    ("Explorer", "Survey"): 2,
    ("Sentinel", "Occupy"): 2,
}


class GoalId(NamedTuple):
    """``(kind, target)`` with kinds ordered Repair < Probe < Survey < Occupy."""

    rank: int
    target: int

    @classmethod
    def of(cls, kind: str, target: int) -> "GoalId":
        return cls(KINDS.index(kind), target)

    @property
    def kind(self) -> str:
        return KINDS[self.rank]

    def __str__(self) -> str:
        return f"{self.kind}({self.target})"


REPAIR, PROBE, SURVEY, OCCUPY = range(len(KINDS))


class Goal(NamedTuple):
    id: GoalId
    base_value: int

    @property
    def kind(self) -> str:
        return KINDS[self.id.rank]

    @property
    def target(self) -> int:
        return self.id.target


@dataclass(frozen=True)
class GoalSet:
    """The goals visible from one belief store, indexed by target vertex.

    Probe goals are the known vertices without a value, Survey goals the
    vertices with an incident edge of unknown weight. Lookups read the store
    directly, so nothing is built per goal.
    """

    repairs: tuple[Goal, ...]
    known: Mapping[int, object]
    values: Mapping[int, object]
    unknown: Mapping[int, int]
    occupy: Mapping[int, int]

    @classmethod
    def of(cls, beliefs, team_agents: Iterable, k: int = 0) -> "GoalSet":
        """``team_agents`` need ``id`` and ``disabled``; ``k`` is the number of Occupy goals."""
        repair = BASE_VALUE["Repair"]
        repairs = tuple(Goal(GoalId(REPAIR, a.id), repair)
                        for a in sorted(team_agents, key=lambda a: a.id) if a.disabled)
        values = beliefs.vertex_values
        occupy = {}
        if k > 0:
            top = heapq.nsmallest(k, ((-f.value, v) for v, f in values.items() if v in beliefs.adj))
            occupy = {v: -neg for neg, v in sorted(top, key=lambda t: t[1])}
        return cls(repairs, beliefs.adj, values, beliefs._unknown, occupy)

    def at(self, v: int) -> list[Goal]:
        """Vertex goals targeting ``v``, in goal order."""
        out = []
        if v in self.known and v not in self.values:
            out.append(Goal(GoalId(PROBE, v), BASE_VALUE["Probe"]))
        if self.unknown.get(v, 0) > 0:
            out.append(Goal(GoalId(SURVEY, v), BASE_VALUE["Survey"]))
        if v in self.occupy:
            out.append(Goal(GoalId(OCCUPY, v), self.occupy[v]))
        return out

    def top_values(self, scales: Sequence[int]) -> int:
        """Largest role-scaled value over the vertex goals (0 when there are none)."""
        top = 0
        if len(self.values) < len(self.known):
            top = scales[PROBE] * BASE_VALUE["Probe"]
        if any(n > 0 for n in self.unknown.values()):
            top = max(top, scales[SURVEY] * BASE_VALUE["Survey"])
        if self.occupy:
            top = max(top, scales[OCCUPY] * max(self.occupy.values()))
        return top

    def goals(self) -> list[Goal]:
        """Every goal, ordered by kind priority then target."""
        goals = list(self.repairs)
        for rank in (PROBE, SURVEY, OCCUPY):
            goals.extend(g for v in sorted(self.known) for g in self.at(v) if g.id.rank == rank)
        return goals


def generate_goals(beliefs, team_agents: Iterable, k: int = 0) -> list[Goal]:
    """Goals visible from ``beliefs``, ordered by kind priority then target.

    ``team_agents`` are believed teammate states; a disabled one yields a
    Repair goal. ``k`` is the number of Occupy goals on the highest-valued
    known vertices.
    """
    return GoalSet.of(beliefs, team_agents, k).goals()


def _scales(role: str) -> tuple[int, ...]:
    return tuple(ROLE_SCALE.get((role, kind), 1) for kind in KINDS)


_SCALES: dict[str, tuple[int, ...]] = {}


def scaled_value(role: str, goal: Goal) -> int:
    scales = _SCALES.get(role)
    if scales is None:
        scales = _SCALES[role] = _scales(role)
    return scales[goal.id.rank] * goal.base_value


def compute_utility(agent, goal: Goal, beliefs, model: CostModel) -> int | None:
    """Role-scaled base value minus planned steps; ``None`` means no bid."""
    if agent.disabled:
        return None
    value = scaled_value(agent.role, goal)
    if goal.id.rank == REPAIR:
        if agent.role != "Repairer" or goal.target == agent.id:
            return None
        patient = beliefs.sightings.get(goal.target)
        if patient is None:
            return None
        try:
            mp = meeting_point(beliefs.adj, (agent.position, agent.energy), (patient.vertex, patient.energy), model)
        except UnreachableError:
            return None
        return value - mp.steps_repairer
    steps = step_table(beliefs.adj, agent.position, agent.energy, model).get(goal.target)
    return None if steps is None else value - steps


def positive_utilities(agent, goals: Sequence[Goal], beliefs, model: CostModel) -> dict[GoalId, int]:
    """``compute_utility`` for every goal, keeping only positive values.

    Shares one depth-limited search across all vertex goals, which is what
    makes per-step bidding affordable.
    """
    out: dict[GoalId, int] = {}
    if agent.disabled or not goals:
        return out
    scales = _SCALES.get(agent.role) or _SCALES.setdefault(agent.role, _scales(agent.role))
    scaled = [(scales[gid[0]] * base, gid) for gid, base in goals if gid[0] != REPAIR]
    if scaled:
        limit = max(scaled)[0] - 1
        steps = step_table(beliefs.adj, agent.position, agent.energy, model, limit=limit) if limit >= 0 else {}
        get = steps.get
        for value, gid in scaled:
            s = get(gid[1])
            if s is not None and value > s:
                out[gid] = value - s
    for g in goals:
        if g.id.rank == REPAIR:
            u = compute_utility(agent, g, beliefs, model)
            if u is not None and u > 0:
                out[g.id] = u
    return out


class BidOrder:
    """Positive utilities in bidding order: higher utility first, then lower goal id.

    :meth:`from_utilities` sorts a ready-made mapping. :meth:`search` produces
    the same sequence lazily, widening the path search only as far as the
    bids requested so far require.
    """

    def __init__(self, ready: Iterable = (), pending: Iterable = (), search: LevelSearch | None = None,
                 goals: GoalSet | None = None, top: int = 0, scales: Sequence[int] = ()):
        self.ready: list = list(ready)
        self._heap = list(pending)
        heapq.heapify(self._heap)
        self._search = search
        self._goals = goals
        self._top = top
        self._scales = scales

    @classmethod
    def from_utilities(cls, utilities: Mapping) -> "BidOrder":
        return cls(sorted((-u, g) for g, u in utilities.items() if u is not None and u > 0))

    @classmethod
    def search(cls, agent, goals: GoalSet, beliefs, model: CostModel) -> "BidOrder":
        if agent.disabled:
            return cls()
        scales = _SCALES.get(agent.role) or _SCALES.setdefault(agent.role, _scales(agent.role))
        pending = []
        for g in goals.repairs:
            u = compute_utility(agent, g, beliefs, model)
            if u is not None and u > 0:
                pending.append((-u, g.id))
        top = goals.top_values(scales)
        search = LevelSearch(beliefs.adj, agent.position, agent.energy, model, limit=top - 1) if top else None
        order = cls((), pending, search, goals, top, scales)
        if search is not None:
            order._collect(0, [agent.position])
        return order

    def _collect(self, level: int, vertices: Iterable[int]) -> None:
        heap, goals, scales = self._heap, self._goals, self._scales
        for v in vertices:
            for gid, base in goals.at(v):
                value = scales[gid.rank] * base
                if value > level:
                    heapq.heappush(heap, (level - value, gid))

    def get(self, i: int):
        """The ``i``-th ``(-utility, goal)`` entry, or ``None`` past the end."""
        ready, heap = self.ready, self._heap
        while len(ready) <= i:
            search = self._search
            # anything not yet found lies deeper, so is worth at most top - (level + 1)
            if heap and (search is None or -heap[0][0] > self._top - search.level - 1):
                ready.append(heapq.heappop(heap))
                continue
            if search is None:
                return None
            new = search.advance()
            if new is None:
                self._search = None
            else:
                self._collect(search.level, new)
        return ready[i]

    def as_dict(self) -> dict:
        i = 0
        while self.get(i) is not None:
            i += 1
        return {g: -neg for neg, g in self.ready}


def _bid_key(b):
    return (-b.utility, b.bidder, b.goal)


def winner_determination(bids: Iterable[Bid]) -> tuple[int, object] | None:
    """Highest utility wins; ties go to the lower bidder id, then lower goal id."""
    bids = list(bids)
    if not bids:
        return None
    rounds = {b.round for b in bids}
    if len(rounds) > 1:
        raise ProtocolError(f"bids from several rounds: {sorted(rounds)}")
    best = min(bids, key=_bid_key)
    return best.bidder, best.goal


Matrix = Sequence[Sequence["int | None"]]


def greedy_assignment_oracle(utilities: Matrix) -> dict[int, int]:
    """Repeatedly take the largest remaining entry (ties: lower agent, lower goal)."""
    entries = sorted(
        (-u, a, g) for a, row in enumerate(utilities) for g, u in enumerate(row) if u is not None
    )
    used_a: set[int] = set()
    used_g: set[int] = set()
    out: dict[int, int] = {}
    for _, a, g in entries:
        if a in used_a or g in used_g:
            continue
        out[a] = g
        used_a.add(a)
        used_g.add(g)
    return out


OPTIMAL_CAP = 12


def optimal_assignment_oracle(utilities: Matrix) -> tuple[dict[int, int], int]:
    """Exact maximum-total partial assignment by dynamic programming over goal subsets."""
    n_agents = len(utilities)
    n_goals = max((len(r) for r in utilities), default=0)
    if n_agents > OPTIMAL_CAP or n_goals > OPTIMAL_CAP:
        raise SizeError(f"{n_agents}x{n_goals} exceeds the {OPTIMAL_CAP}x{OPTIMAL_CAP} cap")
    # best[i][mask]: optimum over agents i.. with goals in mask already taken
    best: list[dict[int, int]] = [dict() for _ in range(n_agents + 1)]

    def solve(i: int, mask: int) -> int:
        if i == n_agents:
            return 0
        memo = best[i]
        if mask in memo:
            return memo[mask]
        value = solve(i + 1, mask)
        for g, u in enumerate(utilities[i]):
            if u is not None and u > 0 and not mask >> g & 1:
                value = max(value, u + solve(i + 1, mask | 1 << g))
        memo[mask] = value
        return value

    total = solve(0, 0)
    out: dict[int, int] = {}
    mask = 0
    for i in range(n_agents):
        rest = solve(i, mask)
        if solve(i + 1, mask) == rest:
            continue
        for g, u in enumerate(utilities[i]):
            if u is not None and u > 0 and not mask >> g & 1 and u + solve(i + 1, mask | 1 << g) == rest:
                out[i] = g
                mask |= 1 << g
                break
    return out, total


def assignment_total(utilities: Matrix, assignment: Mapping[int, int]) -> int:
    return sum(utilities[a][g] for a, g in assignment.items())


# -- protocol state machine ------------------------------------------------


class TimerExpired(NamedTuple):
    tick: int


class Received(NamedTuple):
    envelope: Envelope


Event = Union[TimerExpired, Received]


class Outgoing(NamedTuple):
    dst: int
    payload: object


@dataclass
class AssignmentLedger:
    owner: dict
    assigned: frozenset
    round: int
    phase: str


def resolve_claims(claims: Iterable[Award]) -> dict:
    """Goal -> owner from award claims: each agent's latest claim counts, best claim per goal wins."""
    owner: dict = {}
    for c in sorted(claims, key=_bid_key_award):
        owner.setdefault(c.goal, c.agent)
    return dict(sorted(owner.items()))


def _bid_key_award(c: Award):
    return (-c.utility, c.agent, c.goal)


@dataclass
class AuctionAgent:
    """One agent's view of one auction epoch.

    ``utilities`` holds the agent's positive utilities per goal, either as a
    mapping or as a :class:`BidOrder`; the agent bids on nothing else. ``teammates`` excludes the agent itself.
    """

    id: int
    teammates: tuple[int, ...]
    utilities: Mapping | BidOrder
    start_tick: int
    epoch: int = 0
    tround: int = 2
    aretry: int = 2
    rmax: int = 3
    round: int = 0
    phase: str = "Bidding"
    claims: dict = field(default_factory=dict)
    bids: dict = field(default_factory=dict)
    own_bid: Bid | None = None
    decided: int = 0
    retries: list = field(default_factory=list)
    _order: BidOrder = field(default_factory=BidOrder, repr=False, compare=False)
    _cursor: int = 0
    _owner: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.tround < 2:
            raise ProtocolError("a round needs at least two ticks with one-tick latency")
        u = self.utilities
        self._order = u if isinstance(u, BidOrder) else BidOrder.from_utilities(u)

    # -- views -------------------------------------------------------------

    @property
    def owner(self) -> dict:
        return self._owner

    @property
    def goal(self):
        """Goal this agent owns, if its claim stands."""
        mine = self.claims.get(self.id)
        if mine is not None and self._owner.get(mine.goal) == self.id:
            return mine.goal
        return None

    @property
    def assigned(self) -> bool:
        return self.goal is not None

    @property
    def ledger(self) -> AssignmentLedger:
        return AssignmentLedger(dict(sorted(self._owner.items())), frozenset(self._owner.values()), self.round, self.phase)

    @property
    def quiet(self) -> bool:
        return self.phase == "Done" and not self.retries

    def _round_of(self, tick: int) -> tuple[int, int]:
        k, offset = divmod(tick - self.start_tick, self.tround)
        return k + 1, offset

    # -- transitions -------------------------------------------------------

    def step(self, event: Event) -> list[Outgoing]:
        if isinstance(event, Received):
            self.receive(event.envelope)
            return []
        return self._timer(event.tick)

    def receive(self, env: Envelope) -> None:
        """Record a bid or claim; equivalent to ``step(Received(env))``."""
        msg = env.payload
        if isinstance(msg, Bid):
            if msg.epoch != self.epoch:
                return
            self.bids.setdefault(msg.round, {})[msg.bidder] = msg
        elif isinstance(msg, Award):
            if msg.epoch != self.epoch:
                return
            self._add_claim(msg)
        else:
            log.debug("agent %s ignoring %r", self.id, msg)

    def _add_claim(self, award: Award) -> None:
        prev = self.claims.get(award.agent)
        if prev is not None and prev.round >= award.round:
            return
        was_mine = self.goal
        self.claims[award.agent] = award
        for g in (award.goal,) if prev is None or prev.goal == award.goal else (award.goal, prev.goal):
            best = min((c for c in self.claims.values() if c.goal == g), key=_bid_key_award, default=None)
            if best is None:
                del self._owner[g]
            else:
                self._owner[g] = best.agent
        if was_mine is not None and self.goal is None:
            # beaten: stop advertising, bid again from the next round
            self.retries = []
            self.phase = "Bidding"

    def _best_bid(self, k: int) -> Bid | None:
        order, owned = self._order, self._owner
        entry = order.get(self._cursor)
        while entry is not None and entry[1] in owned:
            self._cursor += 1
            entry = order.get(self._cursor)
        if entry is None:
            return None
        neg_u, g = entry
        return Bid(self.id, g, -neg_u, k, self.epoch)

    def _timer(self, tick: int) -> list[Outgoing]:
        if tick < self.start_tick:
            return []
        k, offset = self._round_of(tick)
        out: list[Outgoing] = []
        if offset == 0:
            self.round = max(self.round, min(k, self.rmax))
            if self.retries:
                out.append(Outgoing(BROADCAST, self.retries.pop()))
            if k > self.rmax or self.assigned:
                self.phase = "Done"
                self.own_bid = None
                return out
            bid = self._best_bid(k)
            self.own_bid = bid
            if bid is None:
                self.phase = "Done"
                return out
            self.phase = "Bidding"
            out.append(Outgoing(BROADCAST, bid))
            return out
        bid = self.own_bid
        if bid is None or self.decided >= k or bid.round != k:
            return out
        heard = self.bids.get(k, {})
        waiting = [a for a in self.teammates if a not in heard and a not in self._owner.values()]
        if waiting and offset < self.tround - 1:
            return out
        self.decided = k
        self.phase = "Awarding"
        winner = winner_determination([bid, *heard.values()])
        if winner is not None and winner[0] == self.id:
            award = Award(self.id, bid.goal, bid.utility, k, self.epoch)
            self._add_claim(award)
            if self.goal == bid.goal:
                self.retries = [award] * (self.aretry - 1)
                out.append(Outgoing(BROADCAST, award))
        return out


def auction_epoch_step(state: AuctionAgent, event: Event) -> tuple[AuctionAgent, list[Outgoing]]:
    """Pure form of :meth:`AuctionAgent.step`: the input state is left untouched."""
    new = copy.deepcopy(state)
    out = new.step(event)
    return new, out


def run_epoch(agents: Mapping[int, AuctionAgent], harness: Harness, start_tick: int,
              max_ticks: int | None = None) -> int:
    """Drive all agents through one epoch over ``harness``.

    Returns the last tick used. Stops once every live agent is quiet and the
    channel is empty, or after ``max_ticks`` ticks.
    """
    if not agents:
        return start_tick
    sample = next(iter(agents.values()))
    if max_ticks is None:
        max_ticks = (sample.rmax + sample.aretry + 1) * sample.tround + 1
    order = sorted(agents)
    tick = start_tick
    for tick in range(start_tick, start_tick + max_ticks):
        inbox = harness.deliver_tick(tick)
        outgoing = []
        for aid in order:
            if harness.crashed(aid, tick):
                continue
            agent = agents[aid]
            for env in inbox.get(aid, ()):
                agent.step(Received(env))
            outgoing.extend((aid, o) for o in agent.step(TimerExpired(tick)))
        for aid, o in outgoing:
            harness.send(harness.make(aid, o.dst, tick, o.payload))
        harness.end_tick()
        live = [agents[a] for a in order if not harness.crashed(a, tick)]
        if harness.in_flight == 0 and all(a.quiet for a in live):
            break
    return tick
