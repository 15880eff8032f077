import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import distributions, games, random_game
from oracles import ess_grid_oracle, pure_nash_2p, strict_survivors_random_order
from magt.equilibria import (
    STRICT,
    WEAK,
    best_response,
    check_ess,
    enumerate_nash_2p,
    is_dominated,
    iterated_dominance,
    simplex_grid,
    symmetric_equilibria,
    verify_nash,
)
from magt.errors import GameError, UnsupportedInstance
from magt.game import Game, MixedProfile, MixedStrategy, SymmetricGame, embed_symmetric


def _mixed_set(results):
    return {tuple(tuple(np.round(s.probs, 9)) for s in r.profile) for r in results}


# --- dominance -------------------------------------------------------------

def test_fig2_b_dominated_by_a(fig2):
    dom = is_dominated(fig2, 0, 1, STRICT)
    assert dom is not None and dom.close_to(MixedStrategy.pure(2, 0))


def test_fig3_no_dominance(fig3):
    assert is_dominated(fig3, 0, 0, STRICT) is None


def test_mixed_dominator():
    # row C = average of rows A and B minus 1
    row = np.array([[4.0, 0.0, 2.0], [0.0, 6.0, 2.0]])
    row = np.vstack([row, row.mean(axis=0) - 1])
    g = Game.bimatrix(row, np.zeros_like(row))
    assert is_dominated(g, 0, 0) is None and is_dominated(g, 0, 1) is None
    dom = is_dominated(g, 0, 2, STRICT)
    assert dom is not None and dom.probs[2] == 0
    gaps = dom.probs @ row - row[2]
    assert gaps.min() > 0


def test_weak_dominance():
    g = Game.bimatrix([[1, 1], [1, 0]], [[0, 0], [0, 0]])
    assert is_dominated(g, 0, 1, STRICT) is None
    assert is_dominated(g, 0, 1, WEAK) is not None
    # identical rows: not weakly dominated
    g = Game.bimatrix([[1, 1], [1, 1]], [[0, 0], [0, 0]])
    assert is_dominated(g, 0, 1, WEAK) is None


def test_iterated_fig2(fig2):
    red = iterated_dominance(fig2)
    assert red.profile_names() == [("A", "B")]
    assert [(e.player, e.action, e.step) for e in red.elimination_log] == [(0, 1, 1), (1, 0, 2)]


@pytest.mark.parametrize("name", ["fig1", "fig3"])
def test_no_eliminations(name, request):
    game = request.getfixturevalue(name)
    assert iterated_dominance(game).elimination_log == ()


def test_weak_mode_flagged():
    g = Game.bimatrix([[1, 1], [1, 0]], [[0, 0], [0, 0]])
    red = iterated_dominance(g, WEAK)
    assert red.order_dependent and all(e.mode == WEAK for e in red.elimination_log)
    assert not iterated_dominance(g).order_dependent


@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
@settings(max_examples=60, deadline=None)
def test_strict_elimination_order_independent(seed, n_players):
    rng = np.random.default_rng(seed)
    game = random_game(rng, n_players, 1, 4 if n_players == 2 else 3)
    expected = iterated_dominance(game).surviving
    for _ in range(3):
        assert tuple(strict_survivors_random_order(game, rng)) == expected


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_equilibria_avoid_eliminated_actions(seed):
    game = random_game(np.random.default_rng(seed))
    red = iterated_dominance(game)
    for res in enumerate_nash_2p(game):
        for e in red.elimination_log:
            assert res.profile[e.player].probs[e.action] < 1e-9


# --- best response and Nash --------------------------------------------------

def test_best_response_examples(fig1, fig3):
    br = best_response(fig1, 0, [None, [1, 0]])
    assert br.actions == (1,) and br.value == 3
    br = best_response(fig3, 0, [None, [0.5, 0.5]])
    assert br.actions == (0, 1) and br.value == pytest.approx(0.5)
    g = Game.from_payoffs(np.ones((1, 3, 2)))
    assert best_response(g, 0, [None, [0, 0, 1]]).actions == (0,)


def test_verify_nash_examples(fig1, fig3):
    r = verify_nash(fig1, MixedProfile.pure(fig1, ("A", "B")))
    assert r.is_equilibrium and r.strict and r.regret == 0
    r = verify_nash(fig1, MixedProfile.pure(fig1, ("A", "A")))
    assert not r.is_equilibrium and r.regret == 2
    r = verify_nash(fig3, MixedProfile(([0.5, 0.5], [0.5, 0.5])))
    assert r.is_equilibrium and not r.strict and r.kind == "mixed"


@given(games(), st.data())
@settings(max_examples=80, deadline=None)
def test_regret_zero_iff_support_in_best_responses(game, data):
    mixes = [data.draw(distributions(n)) for n in game.shape]
    # sparsify so supports vary
    mixes = [np.where(m < 0.2, 0, m) if (m >= 0.2).any() else m for m in mixes]
    mixes = [m / m.sum() for m in mixes]
    res = verify_nash(game, MixedProfile(tuple(mixes)))
    assert res.regret >= 0
    ok = True
    for i in range(2):
        vals = game.payoffs[..., i] @ mixes[1] if i == 0 else mixes[0] @ game.payoffs[..., 1]
        support = np.flatnonzero(mixes[i] > 0)
        if vals[support].min() < vals.max() - 1e-9:
            ok = False
    assert res.is_equilibrium == ok


def test_enumerate_fig3(fig3):
    got = _mixed_set(enumerate_nash_2p(fig3))
    assert got == {((1.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (1.0, 0.0)), ((0.5, 0.5), (0.5, 0.5))}


def test_enumerate_fig1(fig1):
    res = enumerate_nash_2p(fig1)
    pure = {r.profile.pure_profile() for r in res if r.kind == "pure"}
    assert pure == pure_nash_2p(*[fig1.payoffs[..., i] for i in range(2)]) == {(0, 1), (1, 0)}


def test_enumerate_fig2(fig2):
    res = enumerate_nash_2p(fig2)
    assert [r.profile.pure_profile() for r in res] == [(0, 1)]


def test_enumerate_rejects_three_players():
    with pytest.raises(UnsupportedInstance):
        enumerate_nash_2p(Game.from_payoffs(np.zeros((2, 2, 2, 3))))


def test_enumerate_cap():
    with pytest.raises(UnsupportedInstance):
        enumerate_nash_2p(Game.from_payoffs(np.zeros((9, 2, 2))))


def test_degenerate_constant_game():
    res = enumerate_nash_2p(Game.from_payoffs(np.zeros((3, 3, 2))))
    assert res and all(r.is_equilibrium for r in res)


@given(games(max_actions=4))
@settings(max_examples=80, deadline=None)
def test_existence_and_validity(game):
    res = enumerate_nash_2p(game)
    assert len(res) >= 1
    for r in res:
        assert verify_nash(game, r.profile).is_equilibrium
    pure = {r.profile.pure_profile() for r in res if r.kind == "pure"}
    assert pure == pure_nash_2p(game.payoffs[..., 0], game.payoffs[..., 1])


# --- ESS ----------------------------------------------------------------------

def test_ess_fig3(fig3_sym):
    v = check_ess(fig3_sym, [0.5, 0.5])
    assert v.is_nash and v.is_ess
    assert ess_grid_oracle(fig3_sym.payoff, [0.5, 0.5])


def test_ess_pure_a_fig3(fig3_sym):
    v = check_ess(fig3_sym, [1, 0])
    assert not v.is_nash and not v.is_ess and v.witness is not None


def test_ess_constant_game():
    sym = SymmetricGame.from_matrix(np.full((3, 3), 0.4))
    v = check_ess(sym, [0.2, 0.3, 0.5])
    assert v.is_nash and not v.is_ess and v.witness is not None


def test_simplex_grid():
    g = simplex_grid(3, 4)
    assert g.shape == (15, 3)
    np.testing.assert_allclose(g.sum(axis=1), 1)
    assert len({tuple(r) for r in g}) == 15


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_ess_two_strategy_oracle(seed):
    u = np.random.default_rng(seed).integers(-3, 4, size=(2, 2)).astype(float)
    sym = SymmetricGame.from_matrix(u)
    for p in symmetric_equilibria(sym):
        assert check_ess(sym, p, 200).is_ess == ess_grid_oracle(u, p.probs)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
@settings(max_examples=40, deadline=None)
def test_ess_implies_nash(seed, n):
    u = np.random.default_rng(seed).integers(-5, 6, size=(n, n)).astype(float)
    sym = SymmetricGame.from_matrix(u)
    game = embed_symmetric(sym)
    for p in symmetric_equilibria(sym):
        v = check_ess(sym, p, 30)
        if v.is_ess:
            assert verify_nash(game, MixedProfile((p, p))).is_equilibrium


def test_check_ess_rejects_wrong_size(fig3_sym):
    with pytest.raises(GameError):
        check_ess(fig3_sym, [1, 0, 0])
