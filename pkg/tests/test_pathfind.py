import random

import pytest
from hypothesis import given, settings, strategies as st

from mapcsim.errors import InputError, UnreachableError
from mapcsim.pathfind import (
    CostModel, LevelSearch, Move, Recharge, best_first_target, meeting_point, plan_path, reach_levels, step_table,
)
from mapcsim.world import WorldGraph, random_graph
from oracles import reference_meeting, reference_plan, vertex_steps
from support import planning_instance


def path_graph(n, w=1):
    return WorldGraph((1,) * n, tuple((i, i + 1, w) for i in range(n - 1)))


FULL = CostModel(recharge_rate=3, max_energy=10)


def test_cost_model_validation():
    with pytest.raises(InputError):
        CostModel(11, 10)
    with pytest.raises(InputError):
        CostModel(1, 10, unknown_weight=0)
    assert CostModel(5, 20).disabled().recharge_rate == 2


def test_start_is_goal():
    plan = plan_path(path_graph(3), 1, 4, 1, FULL)
    assert plan.actions == () and plan.steps == 0


def test_direct_move():
    plan = plan_path(WorldGraph((1, 1), ((0, 1, 3),)), 0, 5, 1, FULL)
    assert plan.actions == (Move(0, 1, 3),)


def test_recharge_then_move():
    plan = plan_path(WorldGraph((1, 1), ((0, 1, 5),)), 0, 2, 1, FULL)
    assert plan.actions == (Recharge(0), Move(0, 1, 5))
    assert plan.final_energy == 0
    plan.validate(FULL)


def test_unknown_edges_use_default_weight():
    adj = {0: {1: None}, 1: {0: None}}
    assert plan_path(adj, 0, 4, 1, CostModel(1, 10, unknown_weight=5)).steps == 2
    assert plan_path(adj, 0, 4, 1, CostModel(1, 10, unknown_weight=4)).steps == 1


def test_unreachable_is_distinct_error():
    adj = {0: {}, 1: {}}
    with pytest.raises(UnreachableError):
        plan_path(adj, 0, 5, 1, FULL)
    with pytest.raises(InputError):
        plan_path(adj, 0, 5, 9, FULL)
    with pytest.raises(InputError):
        plan_path(adj, 0, 11, 1, FULL)


def test_zero_recharge_strands_agent():
    with pytest.raises(UnreachableError):
        plan_path(WorldGraph((1, 1), ((0, 1, 5),)), 0, 2, 1, CostModel(0, 10))


def test_prefers_more_final_energy():
    # two 2-step routes 0-1-3 (weights 1,1) and 0-2-3 (weights 4,4)
    g = WorldGraph((1,) * 4, ((0, 1, 1), (1, 3, 1), (0, 2, 4), (2, 3, 4)))
    assert plan_path(g, 0, 10, 3, FULL).vertices() == [1, 3]
    g2 = WorldGraph((1,) * 4, ((0, 2, 1), (2, 3, 1), (0, 1, 4), (1, 3, 4)))
    assert plan_path(g2, 0, 10, 3, FULL).vertices() == [2, 3]


def test_lexicographic_tie_break():
    g = WorldGraph((1,) * 4, ((0, 1, 1), (1, 3, 1), (0, 2, 1), (2, 3, 1)))
    assert plan_path(g, 0, 10, 3, FULL).vertices() == [1, 3]


def test_reach_levels_and_resumable_search_agree():
    g = random_graph(random.Random(3), 30, 20)
    levels = [(lvl, new) for lvl, new, _ in reach_levels(g, 0, 4, FULL)]
    search = LevelSearch(g, 0, 4, FULL)
    resumed = [(0, [0])]
    while (new := search.advance()) is not None:
        resumed.append((search.level, new))
    assert levels == resumed
    assert step_table(g, 0, 4, FULL, limit=3) == {v: lvl for lvl, new in levels if lvl <= 3 for v in new}


# -- meeting point ------------------------------------------------------------


def test_meeting_same_vertex():
    assert meeting_point(path_graph(3), (1, 5), (1, 5), FULL) == (1, 0, 0, "Repairer")


def test_meeting_on_path():
    g = path_graph(5)
    assert meeting_point(g, (0, 10), (4, 10), FULL) == (2, 2, 2, "Repairer")


def test_meeting_adjacent_tie():
    g = path_graph(2)
    assert meeting_point(g, (0, 10), (1, 10), FULL) == (0, 0, 1, "Disabled")


def test_meeting_unreachable():
    with pytest.raises(UnreachableError):
        meeting_point({0: {}, 1: {}}, (0, 5), (1, 5), FULL)


# -- best first -----------------------------------------------------------------


def test_best_first_none_when_no_candidates():
    assert best_first_target(path_graph(4), 0, lambda v: 0, FULL, 10) is None


def test_best_first_zero_step_hit():
    assert best_first_target(path_graph(4), 2, lambda v: int(v == 2), FULL, 10) == 2


def test_best_first_nearest_beats_bigger():
    g = path_graph(6)
    assert best_first_target(g, 0, lambda v: {2: 1, 3: 100}.get(v, 0), FULL, 10) == 2


def test_best_first_ties_by_score_then_id():
    g = WorldGraph((1,) * 5, ((0, 1, 1), (0, 2, 1), (0, 3, 1), (3, 4, 1)))
    assert best_first_target(g, 0, lambda v: {1: 2, 2: 5, 3: 5}.get(v, 0), FULL, 10) == 2


@given(st.integers(0, 2**32), st.integers(2, 12), st.integers(0, 10))
@settings(max_examples=80, deadline=None)
def test_best_first_matches_sorting(seed, n, e0):
    rng = random.Random(seed)
    g = random_graph(rng, n, rng.randint(0, n))
    scores = {v: rng.choice([0, 0, 1, 2, 3]) for v in g.vertices}
    steps = vertex_steps(g.adj, 0, e0, FULL.recharge_rate, FULL.max_energy)
    ranked = sorted((steps[v], -scores[v], v) for v in steps if scores[v] > 0)
    expect = ranked[0][2] if ranked else None
    assert best_first_target(g, 0, scores.get, FULL, e0) == expect


# -- against the oracles ---------------------------------------------------------


@given(st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_plan_matches_reference(seed):
    rng, adj, model = planning_instance(seed)
    start, goal = rng.randrange(len(adj)), rng.randrange(len(adj))
    e0 = rng.randint(0, model.max_energy)
    ref = reference_plan(adj, start, e0, goal, model.recharge_rate, model.max_energy, model.unknown_weight)
    if ref is None:
        with pytest.raises(UnreachableError):
            plan_path(adj, start, e0, goal, model)
        return
    plan = plan_path(adj, start, e0, goal, model)
    plan.validate(model)
    assert (plan.steps, plan.final_energy, tuple(plan.vertices())) == ref


@given(st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_more_energy_never_slower(seed):
    rng, adj, model = planning_instance(seed)
    start, goal = rng.randrange(len(adj)), rng.randrange(len(adj))
    counts = []
    for e0 in range(model.max_energy + 1):
        try:
            counts.append(plan_path(adj, start, e0, goal, model).steps)
        except UnreachableError:
            counts.append(float("inf"))
    assert counts == sorted(counts, reverse=True)


@given(st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_meeting_matches_reference(seed):
    rng, adj, model = planning_instance(seed, max_v=8)
    n = len(adj)
    rep = (rng.randrange(n), rng.randint(0, model.max_energy))
    dis = (rng.randrange(n), rng.randint(0, model.max_energy))
    ref = reference_meeting(adj, rep, dis, model.recharge_rate, model.max_energy, model.unknown_weight)
    if ref is None:
        with pytest.raises(UnreachableError):
            meeting_point(adj, rep, dis, model)
    else:
        assert tuple(meeting_point(adj, rep, dis, model)) == ref
