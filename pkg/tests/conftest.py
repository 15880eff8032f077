import numpy as np
import pytest
from hypothesis import strategies as st

from magt.game import Game, SymmetricGame

FIG1 = ([[1, 3], [3, 2]], [[2, 4], [2, 1]])
FIG2 = ([[8, 9], [1, 3]], [[2, 4], [2, 1]])
FIG3_U = [[0, 1], [1, 0]]


@pytest.fixture
def fig1():
    return Game.bimatrix(*FIG1)


@pytest.fixture
def fig2():
    return Game.bimatrix(*FIG2)


@pytest.fixture
def fig3():
    return Game.bimatrix(FIG3_U, FIG3_U)


@pytest.fixture
def fig3_sym():
    return SymmetricGame.from_matrix(FIG3_U)


def random_game(rng, n_players=2, low=2, high=4, span=5):
    shape = tuple(int(rng.integers(low, high + 1)) for _ in range(n_players))
    return Game.from_payoffs(rng.integers(-span, span + 1, size=shape + (n_players,)))


@st.composite
def games(draw, min_players=2, max_players=2, max_actions=4):
    n = draw(st.integers(min_players, max_players))
    shape = tuple(draw(st.integers(1, max_actions)) for _ in range(n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return Game.from_payoffs(rng.integers(-5, 6, size=shape + (n,)).astype(float))


@st.composite
def distributions(draw, n):
    w = draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    w = np.asarray(w) + 1e-3
    return w / w.sum()
