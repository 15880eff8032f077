import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_game
from magt.equilibria import verify_nash
from magt.errors import GameError
from magt.fictitious import (
    RANDOM,
    BeliefState,
    detect_period,
    fp_step,
    is_absorbing,
    opponent_distribution,
    run_fp,
    trace_to_csv,
    update_weights,
)
from magt.game import Game, MixedProfile


def paper_beliefs():
    return [BeliefState(0, (None, [1, 1.5])), BeliefState(1, ([1, 1.5], None))]


def test_update_weights():
    b = update_weights(BeliefState(0, (None, [1, 1.5])), (1, 0))
    assert b.weights[1].tolist() == [2, 1.5]
    b = update_weights(BeliefState(0, (None, [1, 0])), (0, 1))
    assert b.weights[1].tolist() == [1, 1]
    b = update_weights(BeliefState(0, (None, [1, 1], [1, 1])), (0, 0, 1))
    assert b.weights[1].tolist() == [2, 1] and b.weights[2].tolist() == [1, 2]


def test_opponent_distribution():
    d = opponent_distribution(BeliefState(0, (None, [2, 1.5])), 1)
    np.testing.assert_allclose(d.probs, [4 / 7, 3 / 7])
    assert opponent_distribution(BeliefState(0, (None, [1, 1])), 1).probs.tolist() == [.5, .5]
    assert opponent_distribution(BeliefState(0, (None, [0, 3])), 1).probs.tolist() == [0, 1]
    with pytest.raises(GameError):
        BeliefState(0, (None, [0, 0]))
    with pytest.raises(GameError):
        opponent_distribution(BeliefState(0, (None, [1, 1])), 0)


def test_fp_step_fig3(fig3):
    beliefs = paper_beliefs()
    assert fp_step(fig3, beliefs) == (0, 0)
    beliefs = [update_weights(b, (0, 0)) for b in beliefs]
    assert fp_step(fig3, beliefs) == (1, 1)


def test_fp_step_dominant(fig2):
    for w in ([1, 0], [0, 1], [3, 7]):
        beliefs = [BeliefState(0, (None, w)), BeliefState(1, ([1, 1], None))]
        assert fp_step(fig2, beliefs)[0] == 0


def test_run_fp_cycle(fig3):
    trace = run_fp(fig3, paper_beliefs(), budget=100)
    assert trace.profiles == [(0, 0), (1, 1)] * 50
    assert trace.status.kind == "cycle" and trace.status.period == 2
    assert trace.status.describe(fig3) == "cycle period=2 profiles=(A,A),(B,B)"


def test_run_fp_fig2(fig2):
    trace = run_fp(fig2, budget=100)
    assert trace.status.kind == "converged" and trace.status.profile == (0, 1)


def test_forced_play_converges_at_window():
    g = Game.from_payoffs(np.zeros((1, 1, 2)))
    trace = run_fp(g, budget=100, confirm=10, stop_early=True)
    assert trace.status.kind == "converged" and len(trace.steps) == 10


def test_random_tie_rule_is_seeded(fig3):
    a = run_fp(fig3, budget=60, tie_rule=RANDOM, seed=3)
    b = run_fp(fig3, budget=60, tie_rule=RANDOM, seed=3)
    assert trace_to_csv(a) == trace_to_csv(b)


def test_weight_totals(fig1):
    trace = run_fp(fig1, paper_beliefs(), budget=37)
    for b, b0 in zip(trace.final_beliefs, paper_beliefs()):
        for j in b.opponents:
            assert b.total(j) == b0.total(j) + 37


def test_one_model_per_opponent():
    g = Game.from_payoffs(np.random.default_rng(0).integers(0, 5, (2, 3, 2, 3)))
    trace = run_fp(g, budget=20)
    for i, b in enumerate(trace.final_beliefs):
        assert b.opponents == tuple(j for j in range(3) if j != i)
        for j in b.opponents:
            assert b.weights[j].shape == (g.shape[j],)


def test_detect_period():
    assert detect_period([1, 2] * 10, 20) == 2
    assert detect_period([1] * 20, 20) is None
    assert detect_period([1, 2, 3] * 7, 20) == 3
    assert detect_period([1, 2], 20) is None


def test_matching_pennies_not_converged():
    g = Game.bimatrix([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])
    trace = run_fp(g, budget=500)
    assert trace.status.kind != "converged"


def test_absorbing_check(fig2, fig3):
    b = [BeliefState.uniform(fig2, i) for i in range(2)]
    assert is_absorbing(fig2, b, (0, 1))
    assert not is_absorbing(fig3, paper_beliefs(), (0, 0))


def test_csv_layout(fig3):
    text = trace_to_csv(run_fp(fig3, paper_beliefs(), budget=3))
    lines = text.splitlines()
    assert lines[0] == "t,action_P1,action_P2,belief_P1_P2_A,belief_P1_P2_B,belief_P2_P1_A,belief_P2_P1_B,payoff_P1,payoff_P2"
    assert lines[1].startswith("1,A,A,0.4,0.6,0.4,0.6,")
    assert lines[-1].startswith("# status:")


def _seed_strict_equilibrium(game, prof):
    """Smallest extra weight on the equilibrium actions that makes ``prof``
    the unique best response of every player."""
    for extra in range(0, 200):
        beliefs = []
        for i in range(2):
            w = [None, None]
            j = 1 - i
            w[j] = np.ones(game.shape[j])
            w[j][prof[j]] += extra
            beliefs.append(BeliefState(i, tuple(w)))
        if fp_step(game, beliefs) == prof and all(
                len(_brs(game, b, i)) == 1 for i, b in enumerate(beliefs)):
            return beliefs
    raise AssertionError("could not seed beliefs")


def _brs(game, b, i):
    from magt.equilibria import best_response
    model = [None if w is None else w / w.sum() for w in b.weights]
    return best_response(game, i, model).actions


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_strict_equilibrium_locks_in(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    strict = [p for p in game.profiles()
              if verify_nash(game, MixedProfile.pure(game, p)).strict]
    if not strict:
        return
    prof = strict[int(rng.integers(len(strict)))]
    trace = run_fp(game, _seed_strict_equilibrium(game, prof), budget=100)
    assert all(p == prof for p in trace.profiles)


@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
@settings(max_examples=40, deadline=None)
def test_converged_pure_is_nash(seed, n_players):
    game = random_game(np.random.default_rng(seed), n_players, 2, 3)
    trace = run_fp(game, budget=150)
    if trace.status.kind == "converged":
        prof = MixedProfile.pure(game, trace.status.profile)
        assert verify_nash(game, prof, 1e-9).is_equilibrium


def test_tie_rule_validation(fig3):
    with pytest.raises(GameError):
        run_fp(fig3, budget=10, tie_rule="coin")
