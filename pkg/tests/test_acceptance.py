"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with its measured numbers,
also when run under pytest's output capture. Run alone with::

    pytest tests/test_acceptance.py -v
"""

import random
import time
from fractions import Fraction

import pytest

from mapcsim.agents import BeliefStore, merge_beliefs
from mapcsim.auction import assignment_total, greedy_assignment_oracle, optimal_assignment_oracle
from mapcsim.errors import UnreachableError
from mapcsim.pathfind import meeting_point, plan_path
from mapcsim.sim import Fault, MatchConfig, run_match
from mapcsim.world import AgentState, WorldGraph, color_zones, random_graph
from oracles import random_matrix, reference_coloring, reference_meeting, vertex_steps
from support import (
    as_owner, live_ledgers, no_double_ownership, planning_instance, random_facts, reduced, run_matrix_auction,
    trajectory,
)

SEEDS = range(100)


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok
    return emit


def instance(seed):
    return random_matrix(random.Random(seed))


# -- assignment ---------------------------------------------------------------


def test_auction_agreement(report):
    t0 = time.perf_counter()
    bad = []
    for seed in SEEDS:
        m = instance(seed)
        agents, _, _ = run_matrix_auction(m)
        ledgers = list(live_ledgers(agents).values())
        if any(x != ledgers[0] for x in ledgers) or ledgers[0] != as_owner(greedy_assignment_oracle(m)):
            bad.append(seed)
    dt = time.perf_counter() - t0
    ok = not bad and dt < 10
    assert report("auction agreement", ok, f"{100 - len(bad)}/100 match greedy oracle, {dt:.2f}s (limit 10s)")


def test_greedy_approximation(report):
    t0 = time.perf_counter()
    ratios = []
    for seed in SEEDS:
        m = instance(seed)
        greedy = assignment_total(m, greedy_assignment_oracle(m))
        _, best = optimal_assignment_oracle(m)
        ratios.append(Fraction(greedy, best) if best else Fraction(1))
    dt = time.perf_counter() - t0
    worst, mean = min(ratios), sum(ratios) / len(ratios)
    ok = worst >= Fraction(1, 2) and dt < 10
    assert report("greedy approximation", ok,
                  f"min ratio {float(worst):.4f} (need >= 0.5), mean {float(mean):.4f}, {dt:.2f}s (limit 10s)")


def _crash_instance(seed):
    rng = random.Random(seed)
    m = random_matrix(rng)
    while len(m) < 2:
        m = random_matrix(rng)
    return m, rng.randrange(len(m))


def test_fault_robustness(report):
    t0 = time.perf_counter()
    crash_ok = 0
    for seed in SEEDS:
        m, victim = _crash_instance(seed)
        agents, _, _ = run_matrix_auction(m, crashed=(victim,))
        expect = as_owner(greedy_assignment_oracle(reduced(m, {victim})))
        crash_ok += all(ledger == expect for ledger in live_ledgers(agents, (victim,)).values())
    identical = safe = 0
    for seed in SEEDS:
        m = instance(seed)
        agents, _, _ = run_matrix_auction(m, drop=Fraction(3, 10), seed=seed)
        ledgers = list(live_ledgers(agents).values())
        identical += all(x == ledgers[0] for x in ledgers)
        safe += no_double_ownership(agents)
    dt = time.perf_counter() - t0
    ok = crash_ok == 100 and identical >= 99 and safe == 100 and dt < 30
    assert report("fault robustness", ok,
                  f"crash {crash_ok}/100 exact, 30% bid drop {identical}/100 identical (need 99), "
                  f"{safe}/100 without double ownership, {dt:.2f}s (limit 30s)")


# -- planning -----------------------------------------------------------------


def test_pathfinder(report):
    t0 = time.perf_counter()
    plans = meets = 0
    for seed in range(200):
        rng, adj, model = planning_instance(seed)
        start, goal = rng.randrange(len(adj)), rng.randrange(len(adj))
        e0 = rng.randint(0, model.max_energy)
        want = vertex_steps(adj, start, e0, model.recharge_rate, model.max_energy, model.unknown_weight).get(goal)
        try:
            got = plan_path(adj, start, e0, goal, model).steps
        except UnreachableError:
            got = None
        plans += got == want
    for seed in range(100):
        rng, adj, model = planning_instance(10_000 + seed, max_v=8)
        n = len(adj)
        rep = (rng.randrange(n), rng.randint(0, model.max_energy))
        dis = (rng.randrange(n), rng.randint(0, model.max_energy))
        want = reference_meeting(adj, rep, dis, model.recharge_rate, model.max_energy, model.unknown_weight)
        try:
            got = tuple(meeting_point(adj, rep, dis, model))
        except UnreachableError:
            got = None
        meets += got == want
    dt = time.perf_counter() - t0
    ok = plans == 200 and meets == 100 and dt < 20
    assert report("pathfinder", ok, f"plan_path {plans}/200, meeting_point {meets}/100, {dt:.2f}s (limit 20s)")


# -- beliefs ------------------------------------------------------------------


def test_belief_convergence(report):
    t0 = time.perf_counter()
    converged = 0
    for seed in range(200):
        rng = random.Random(seed)
        g = random_graph(rng, rng.randint(1, 12), rng.randint(0, 10))
        facts = random_facts(rng, g, rng.randint(1, 60), trajectory(rng, g))
        snaps = []
        for k in range(4):
            order = facts[:]
            rng.shuffle(order)
            s = BeliefStore(k, "A")
            i = 0
            while i < len(order):
                j = i + rng.randint(1, 5)
                s.merge(order[i:j])
                i = j
            snaps.append((s.snapshot(), s.adj))
        converged += all(x == snaps[0] for x in snaps)
    algebra = 0
    empty = BeliefStore(0, "A")
    for seed in range(500):
        rng = random.Random(seed)
        g = random_graph(rng, rng.randint(1, 10), rng.randint(0, 8))
        truth = trajectory(rng, g)
        x, y, z = (random_facts(rng, g, rng.randint(0, 25), truth) for _ in range(3))
        sx = merge_beliefs(empty, x)
        idem = merge_beliefs(sx, x).snapshot() == sx.snapshot()
        comm = merge_beliefs(sx, y).snapshot() == merge_beliefs(merge_beliefs(empty, y), x).snapshot()
        left = merge_beliefs(merge_beliefs(sx, y), z)
        right = merge_beliefs(sx, merge_beliefs(merge_beliefs(empty, y), z).facts())
        algebra += idem and comm and left.snapshot() == right.snapshot()
    dt = time.perf_counter() - t0
    ok = converged == 200 and algebra == 500 and dt < 10
    assert report("belief convergence", ok,
                  f"{converged}/200 streams converge, {algebra}/500 merges lawful, {dt:.2f}s (limit 10s)")


# -- coloring -----------------------------------------------------------------


def test_zone_coloring(report):
    exact = 0
    for seed in range(200):
        rng = random.Random(seed)
        n = rng.randint(1, 10)
        g = random_graph(rng, n, rng.randint(0, n))
        agents = [AgentState(i, rng.choice("AB"), "Explorer", rng.randrange(n), 10, 10,
                             rng.choice([0, 10, 10, 10]), 10) for i in range(rng.randint(0, 6))]
        c = color_zones(g, agents)
        want = reference_coloring(g.values, g.edges, [(a.team, a.position, a.disabled) for a in agents])
        exact += (c.color_of, c.score_of) == want
    ring = WorldGraph((1,) * 6, tuple((i, (i + 1) % 6, 1) for i in range(6)))
    placed = [AgentState(i, t, "Explorer", v, 10, 10, 10, 10) for i, (t, v) in enumerate([("A", 0), ("A", 2), ("B", 3)])]
    c6 = color_zones(ring, placed)
    hand = c6.color_of == {0: "A", 1: "A", 2: "A", 3: "B", 4: "B", 5: "A"} and c6.score_of == {"A": 4, "B": 2}
    ok = exact == 200 and hand
    assert report("zone coloring", ok, f"{exact}/200 match reference, 6-cycle {'reproduced' if hand else 'differs'}")


# -- matches ------------------------------------------------------------------


def rendezvous_case(seed):
    """``(delay, bound)`` for one scripted match where explorer 0 is disabled at step 5."""
    cfg = MatchConfig(seed=seed, steps=60, vertices=20, extra_edges=15, team_size=3, reveal_map=True,
                      fault_schedule=[Fault(5, "disable", 0)])
    log = run_match(cfg)
    meets = [m for m in log.rendezvous if m["patient"] == 0]
    if not meets:
        return None, None
    first = meets[0]
    repaired = next((r.step for r in log.records if r.step >= first["step"]
                     and any(ok and text == "repair(0)" for _, text, ok in r.actions)), None)
    bound = first["steps_repairer"] + first["steps_patient"] + 2
    return (None if repaired is None else repaired - first["step"]), bound


def test_rendezvous(report):
    within = 0
    worst = []
    for seed in range(20):
        delay, bound = rendezvous_case(seed)
        if delay is not None and delay <= bound:
            within += 1
        worst.append((delay, bound))
    ok = within == 20
    assert report("rendezvous", ok, f"{within}/20 repaired within steps_repairer + steps_patient + 2; "
                                    f"(delay, bound) per seed {worst}")


def test_determinism_and_performance(report):
    cfg = dict(seed=2024, steps=750, vertices=400, extra_edges=400, team_size=20)
    t0 = time.perf_counter()
    first = run_match(MatchConfig(**cfg)).dumps()
    second = run_match(MatchConfig(**cfg)).dumps()
    dt = time.perf_counter() - t0
    same = first == second
    ok = same and dt < 60
    assert report("determinism and performance", ok,
                  f"byte-identical {same}, two runs {dt:.1f}s (limit 60s), log {len(first)} bytes")
