import numpy as np
import pytest
from hypothesis import given, strategies as st

from auditgame.equilibrium import (
    Objective,
    best_response_set,
    evaluate_best,
    evaluate_worst,
    summarize,
)
from auditgame.game import fig1_game, random_game
from auditgame.oracle import (
    GridSpec,
    GridTooLarge,
    enumerate_equilibria,
    equilibrium_value,
    grid_best,
    is_equilibrium,
    misreport_incentive_lp,
    point_value,
)


def test_fig1_grid_worst():
    res = grid_best(fig1_game(), "utility", GridSpec(step=1 / 512))
    assert 1.85 <= res.value < 1.875
    # just above the quarter threshold on the high report, nothing on the low one
    assert res.p_at[0] < 0.01
    assert 0.25 < res.p_at[1] < 0.26
    assert res.cells == 513 ** 2


def test_grid_best_mode_contains_all_ones():
    g = fig1_game()
    res = grid_best(g, "utility", GridSpec(step=1 / 64), mode="best")
    assert res.value >= evaluate_best(g, [1.0, 1.0])[0] - 1e-12


def test_grid_refusals():
    g5 = random_game(np.random.default_rng(0), 5)
    with pytest.raises(GridTooLarge):
        grid_best(g5)
    with pytest.raises(GridTooLarge, match="cap"):
        grid_best(fig1_game(), grid=GridSpec(step=1 / 512, cell_cap=1000))
    with pytest.raises(ValueError):
        GridSpec(step=0.3).points_per_axis()
    with pytest.raises(ValueError):
        grid_best(fig1_game(), mode="median")


def test_enumerate_fig1():
    g = fig1_game()
    eqs = enumerate_equilibria(g, [0.0, 0.25])
    reports = sorted(tuple(e.Q.argmax(axis=1)) for e in eqs)
    assert reports == [(0, 1), (1, 1)]
    assert len(enumerate_equilibria(g, [1.0, 1.0])) == 1
    only = enumerate_equilibria(g, [0.0, 0.1])
    assert len(only) == 1 and tuple(only[0].Q.argmax(axis=1)) == (1, 1)


def test_enumerate_cap():
    g = fig1_game()
    with pytest.raises(GridTooLarge):
        enumerate_equilibria(g, [0.0, 0.25], cap=1)


def test_is_equilibrium_rejects_truth_when_lying_pays():
    assert not is_equilibrium(fig1_game(), [0.0, 0.1], np.eye(2))


def test_mi_lp_fig1():
    p, level = misreport_incentive_lp([1, 2], [3, 4], [0.5, 0.5], 0.25)
    assert level == pytest.approx(4 / 7, abs=1e-9)
    np.testing.assert_allclose(p, [1 / 7, 5 / 14], atol=1e-9)


@given(st.integers(0, 10_000), st.integers(2, 4), st.sampled_from(["utility", "welfare"]))
def test_point_value_matches_evaluator(seed, m, obj):
    rng = np.random.default_rng(seed)
    g = random_game(rng, m)
    p = np.round(rng.uniform(0, 1, m) * 8) / 8
    assert point_value(g, p, obj, True) == pytest.approx(evaluate_worst(g, p, obj)[0], abs=1e-9)
    assert point_value(g, p, obj, False) == pytest.approx(evaluate_best(g, p, obj)[0], abs=1e-9)


@given(st.integers(0, 10_000), st.integers(2, 4))
def test_enumeration_agrees_with_threshold_structure(seed, m):
    rng = np.random.default_rng(seed)
    g = random_game(rng, m)
    p = rng.uniform(0, 1, m)
    if seed % 2:
        # force a three-way tie at the level of pay(0)
        p[1:] = np.clip((g.pay[1:] - g.pay[0]) / g.pen[1:], 0, 1)
        p[0] = 0.0
    eqs = enumerate_equilibria(g, p)
    s = summarize(g, p)
    for i in range(m):
        seen = {int(e.Q[i].argmax()) for e in eqs}
        assert seen == set(best_response_set(g, s, i))
    for obj in Objective:
        vals = [equilibrium_value(g, p, e, obj) for e in eqs]
        assert min(vals) == pytest.approx(evaluate_worst(g, p, obj)[0], abs=1e-9)
        assert max(vals) == pytest.approx(evaluate_best(g, p, obj)[0], abs=1e-9)
