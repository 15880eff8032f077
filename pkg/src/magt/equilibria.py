"""Static solution concepts: dominance, best response, Nash and ESS."""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog

from magt.errors import GameError, UnsupportedInstance
from magt.game import (
    Game,
    MixedProfile,
    MixedStrategy,
    SymmetricGame,
    action_values,
    embed_symmetric,
    expected_utility,
)

STRICT = "strict"
WEAK = "weak"

# LP gaps below this are treated as zero
DOMINANCE_TOL = 1e-9
# payoff differences below this count as ties when listing best responses
TIE_TOL = 1e-12
DEDUP_TOL = 1e-7
DEFAULT_CAP = 8
ESS_EQUAL_TOL = 1e-9
ESS_STRICT_TOL = 1e-12
ESS_MAX_POINTS = 2_000_000


@dataclass(frozen=True)
class Elimination:
    player: int
    action: int
    dominator: MixedStrategy
    mode: str
    step: int


@dataclass(frozen=True)
class ReducedGame:
    original: Game
    surviving: tuple[tuple[int, ...], ...]
    elimination_log: tuple[Elimination, ...]
    mode: str = STRICT

    @property
    def order_dependent(self) -> bool:
        """Weak elimination results may depend on elimination order."""
        return self.mode == WEAK and bool(self.elimination_log)

    def profiles(self):
        return list(itertools.product(*self.surviving))

    def profile_names(self):
        return [self.original.profile_names(p) for p in self.profiles()]

    def subgame(self) -> Game:
        return self.original.restrict(self.surviving)


def _check_mode(mode):
    if mode not in (STRICT, WEAK):
        raise GameError(f"dominance mode must be 'strict' or 'weak', got {mode!r}")


def _gap_matrix(game, player, action, candidates, surviving):
    """Rows: candidate dominators; columns: surviving opponent pure profiles.

    Entry is u(candidate, o) - u(action, o).
    """
    idx = [list(s) for s in surviving]
    idx[player] = list(candidates) + [action]
    sub = game.payoffs[np.ix_(*idx)][..., player]
    sub = np.moveaxis(sub, player, 0).reshape(len(candidates) + 1, -1)
    return sub[:-1] - sub[-1]


def is_dominated(game: Game, player: int, action: int, mode: str = STRICT,
                 surviving=None) -> MixedStrategy | None:
    """Return a (possibly mixed) strategy dominating ``action``, or ``None``.

    Only the player's other surviving actions may carry weight and only the
    surviving opponent profiles are checked.  A pure dominator is preferred
    (lowest index); otherwise a linear program maximises the minimum payoff
    gap (strict) or, once a non-negative gap is feasible, the total gap (weak).
    """
    _check_mode(mode)
    player = game.check_player(player)
    if surviving is None:
        surviving = tuple(tuple(range(n)) for n in game.shape)
    surviving = tuple(tuple(s) for s in surviving)
    if any(len(s) == 0 for s in surviving):
        raise GameError("surviving action sets must be non-empty")
    if action not in surviving[player]:
        raise GameError(f"action {action} is not in player {player}'s surviving set")
    candidates = [a for a in surviving[player] if a != action]
    if not candidates:
        return None
    gaps = _gap_matrix(game, player, action, candidates, surviving)
    n = game.shape[player]

    def strategy(weights):
        p = np.zeros(n)
        p[candidates] = weights
        return MixedStrategy(p / p.sum())

    for k, row in enumerate(gaps):
        if _dominates(row, mode):
            return strategy(np.eye(len(candidates))[k])
    if len(candidates) == 1:
        return None

    m, c = gaps.shape[1], len(candidates)
    # variables: x (c weights), t;   maximise t  s.t.  x.gaps[:, o] >= t
    res = linprog(
        np.r_[np.zeros(c), -1.0],
        A_ub=np.c_[-gaps.T, np.ones(m)], b_ub=np.zeros(m),
        A_eq=np.r_[np.ones(c), 0.0][None, :], b_eq=[1.0],
        bounds=[(0, None)] * c + [(None, None)], method="highs")
    if res.status != 0:
        return None
    best_min = -res.fun
    if mode == STRICT:
        if best_min > DOMINANCE_TOL:
            return strategy(np.clip(res.x[:c], 0, None))
        return None
    if best_min < -DOMINANCE_TOL:
        return None
    # weak: all gaps >= 0; maximise their sum to find a strict one
    res = linprog(
        -gaps.sum(axis=1), A_ub=-gaps.T, b_ub=np.zeros(m),
        A_eq=np.ones((1, c)), b_eq=[1.0], bounds=[(0, None)] * c, method="highs")
    if res.status != 0 or -res.fun <= DOMINANCE_TOL:
        return None
    x = np.clip(res.x, 0, None)
    if np.min(x @ gaps) < -DOMINANCE_TOL:
        return None
    return strategy(x)


def _dominates(row, mode):
    if mode == STRICT:
        return bool(np.all(row > DOMINANCE_TOL))
    return bool(np.all(row >= -DOMINANCE_TOL) and np.any(row > DOMINANCE_TOL))


def iterated_dominance(game: Game, mode: str = STRICT) -> ReducedGame:
    """Remove every dominated action each round, simultaneously, to a fixpoint."""
    _check_mode(mode)
    surviving = [tuple(range(n)) for n in game.shape]
    log = []
    step = 0
    while True:
        step += 1
        removed = []
        for i in range(game.n_players):
            for a in surviving[i]:
                dom = is_dominated(game, i, a, mode, surviving)
                if dom is not None:
                    removed.append(Elimination(i, a, dom, mode, step))
        if not removed:
            break
        for e in removed:
            surviving[e.player] = tuple(a for a in surviving[e.player] if a != e.action)
        log.extend(removed)
    return ReducedGame(game, tuple(surviving), tuple(log), mode)


class BestResponse(NamedTuple):
    actions: tuple[int, ...]
    value: float


def best_response(game: Game, player: int, others) -> BestResponse:
    """All pure best responses of ``player`` to the other players' strategies.

    ``others`` has one entry per player; the entry for ``player`` is ignored.
    """
    return _ties(action_values(game, player, others))


def _ties(values) -> BestResponse:
    """Best responses among precomputed action values, with tie tolerance."""
    best = float(values.max())
    scale = max(1.0, abs(best))
    acts = tuple(int(a) for a in np.flatnonzero(values >= best - TIE_TOL * scale))
    return BestResponse(acts, best)


@dataclass(frozen=True)
class NashResult:
    profile: MixedProfile
    kind: str
    strict: bool
    regret: float
    is_equilibrium: bool = True
    regrets: tuple[float, ...] = field(default=(), compare=False)


def verify_nash(game: Game, profile, tolerance: float = 1e-9) -> NashResult:
    if tolerance < 0:
        raise GameError("tolerance must be non-negative")
    if not isinstance(profile, MixedProfile):
        profile = MixedProfile(tuple(profile))
    profile.validate(game)
    regrets = []
    strict = True
    for i in range(game.n_players):
        br = best_response(game, i, profile.strategies)
        eu = expected_utility(game, profile, i)
        regrets.append(max(0.0, br.value - eu))
        support = profile[i].support
        if not (len(support) == 1 and br.actions == support):
            strict = False
    regret = max(regrets)
    ok = regret <= tolerance
    kind = "pure" if profile.is_pure else "mixed"
    return NashResult(profile, kind, bool(ok and strict), regret, bool(ok), tuple(regrets))


def _solve_indifference(payoff, support_own, support_other):
    """Mix over ``support_other`` making every row in ``support_own`` earn the
    same value.  ``payoff[own, other]`` is the payoff of the indifferent player.
    """
    sub = payoff[np.ix_(support_own, support_other)]
    k_own, k_other = sub.shape
    a = np.zeros((k_own + 1, k_other + 1))
    a[:k_own, :k_other] = sub
    a[:k_own, -1] = -1.0
    a[-1, :k_other] = 1.0
    b = np.zeros(k_own + 1)
    b[-1] = 1.0
    if k_own + 1 == k_other + 1:
        try:
            sol = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(a, b, rcond=None)[0]
    else:
        sol = np.linalg.lstsq(a, b, rcond=None)[0]
    if np.max(np.abs(a @ sol - b)) > 1e-9:
        return None
    return sol[:k_other]


def _expand(n, support, weights):
    p = np.zeros(n)
    p[list(support)] = weights
    return p


def _feasible_mix(payoff, support_own, support_other):
    """LP fallback: a mix on ``support_other`` making ``support_own`` the best
    rows; exact for degenerate games where the square solve fails."""
    n_own, n_other = payoff.shape
    k = len(support_other)
    sub = payoff[:, list(support_other)]
    # variables: y (k), v
    a_eq = [np.r_[np.ones(k), 0.0]]
    b_eq = [1.0]
    for r in support_own:
        a_eq.append(np.r_[sub[r], -1.0])
        b_eq.append(0.0)
    a_ub = [np.r_[sub[r], -1.0] for r in range(n_own) if r not in support_own]
    res = linprog(
        np.zeros(k + 1), A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.zeros(len(a_ub)) if a_ub else None,
        A_eq=np.array(a_eq), b_eq=b_eq,
        bounds=[(0, None)] * k + [(None, None)], method="highs")
    if res.status != 0:
        return None
    return res.x[:k]


def _candidate(game, x, y, tol):
    x = np.clip(x, 0, None)
    y = np.clip(y, 0, None)
    if x.sum() <= 0 or y.sum() <= 0:
        return None
    x, y = x / x.sum(), y / y.sum()
    res = verify_nash(game, MixedProfile((MixedStrategy(x), MixedStrategy(y))), tol)
    return res if res.is_equilibrium else None


def _supports(n):
    for size in range(1, n + 1):
        yield from itertools.combinations(range(n), size)


def enumerate_nash_2p(game: Game, cap: int = DEFAULT_CAP,
                      tolerance: float = 1e-9) -> list[NashResult]:
    """Support enumeration over every pair of supports of a bimatrix game.

    Candidates must have non-negative weights and survive :func:`verify_nash`;
    duplicates within ``DEDUP_TOL`` are merged.  If a degenerate game defeats
    the linear solves, an LP per support pair restores existence.
    """
    if game.n_players != 2:
        raise UnsupportedInstance(
            f"Nash enumeration supports 2-player games only, got {game.n_players}")
    if max(game.shape) > cap:
        raise UnsupportedInstance(
            f"action count {max(game.shape)} exceeds enumeration cap {cap}")
    m, n = game.shape
    a = game.payoffs[..., 0]
    b = game.payoffs[..., 1]
    found: list[NashResult] = []

    def add(res):
        if res is None:
            return
        for prev in found:
            if (prev.profile[0].close_to(res.profile[0], DEDUP_TOL)
                    and prev.profile[1].close_to(res.profile[1], DEDUP_TOL)):
                return
        found.append(res)

    for si in _supports(m):
        for sj in _supports(n):
            y = _solve_indifference(a, si, sj)
            if y is None or y.min() < -tolerance:
                continue
            x = _solve_indifference(b.T, sj, si)
            if x is None or x.min() < -tolerance:
                continue
            add(_candidate(game, _expand(m, si, x), _expand(n, sj, y), tolerance))
    if not found:
        for si in _supports(m):
            for sj in _supports(n):
                y = _feasible_mix(a, si, sj)
                if y is None:
                    continue
                x = _feasible_mix(b.T, sj, si)
                if x is None:
                    continue
                add(_candidate(game, _expand(m, si, x), _expand(n, sj, y), tolerance))
                if found:
                    break
            if found:
                break
    return found


@dataclass(frozen=True)
class EssVerdict:
    strategy: MixedStrategy
    is_nash: bool
    is_ess: bool
    witness: MixedStrategy | None = None


def simplex_grid(n: int, resolution: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of 1/resolution.

    Rows are ordered with the first coordinate descending, then the next, so
    the first row is the pure first action.
    """
    if resolution < 1:
        raise GameError("grid resolution must be at least 1")
    count = math.comb(resolution + n - 1, n - 1)
    if count > ESS_MAX_POINTS:
        raise GameError(
            f"invader grid has {count} points; lower the resolution")
    return _grid(n, resolution) / resolution


@functools.lru_cache(maxsize=32)
def _grid(n: int, total: int) -> np.ndarray:
    if n == 1:
        out = np.array([[total]], dtype=float)
    else:
        blocks = []
        for first in range(total, -1, -1):
            rest = _grid(n - 1, total - first)
            blocks.append(np.column_stack([np.full(len(rest), first, dtype=float), rest]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def max_resolution(n: int, limit: int = 100, max_points: int = ESS_MAX_POINTS) -> int:
    """Largest resolution up to ``limit`` whose grid fits in ``max_points``."""
    res = limit
    while res > 1 and math.comb(res + n - 1, n - 1) > max_points:
        res -= 1
    return res


def check_ess(sym: SymmetricGame, candidate, resolution: int = 100) -> EssVerdict:
    """Two-condition ESS test against pure invaders and a simplex grid.

    For every invader w' != w either u(w, w) > u(w', w), or the two tie and
    u(w, w') > u(w', w').  The first failing invader is the witness.
    """
    if resolution < 1:
        raise GameError("grid resolution must be at least 1")
    n = sym.n_actions
    if not isinstance(candidate, MixedStrategy):
        candidate = MixedStrategy(candidate)
    if len(candidate) != n:
        raise GameError(f"candidate has {len(candidate)} entries, expected {n}")
    u = sym.payoff
    w = candidate.probs
    home = float(w @ u @ w)
    pure = np.eye(n)

    # Nash: no pure invader does better against w
    against_w = pure @ u @ w
    bad = np.flatnonzero(against_w > home + ESS_EQUAL_TOL)
    if bad.size:
        return EssVerdict(candidate, False, False, MixedStrategy(pure[bad[0]]))

    invaders = np.vstack([pure, simplex_grid(n, resolution)])
    keep = np.max(np.abs(invaders - w), axis=1) > 1e-12
    invaders = invaders[keep]
    first = invaders @ u @ w                               # u(w', w)
    second_home = (w @ u) @ invaders.T                     # u(w, w')
    second_inv = np.einsum("ij,jk,ik->i", invaders, u, invaders)  # u(w', w')
    diff1 = home - first
    tie = np.abs(diff1) <= ESS_EQUAL_TOL
    ok = (diff1 > ESS_EQUAL_TOL) | (tie & (second_home - second_inv > ESS_STRICT_TOL))
    failing = np.flatnonzero(~ok)
    if failing.size:
        return EssVerdict(candidate, True, False, MixedStrategy(invaders[failing[0]]))
    return EssVerdict(candidate, True, True, None)


def symmetric_equilibria(sym: SymmetricGame, cap: int = DEFAULT_CAP,
                         tol: float = 1e-9) -> list[MixedStrategy]:
    """Symmetric Nash equilibria (both players use the same strategy) found by
    support enumeration of the embedded game, plus the symmetric-support
    solves that enumeration may skip in degenerate games."""
    game = embed_symmetric(sym)
    out: list[MixedStrategy] = []

    def add(p):
        for q in out:
            if q.close_to(p, DEDUP_TOL):
                return
        out.append(p)

    for res in enumerate_nash_2p(game, cap):
        x, y = res.profile
        if x.close_to(y, tol):
            add(MixedStrategy((x.probs + y.probs) / 2))
    n = sym.n_actions
    for s in _supports(n):
        x = _solve_indifference(sym.payoff, s, s)
        if x is None or x.min() < -tol:
            continue
        p = np.clip(_expand(n, s, x), 0, None)
        p /= p.sum()
        if verify_nash(game, (p, p), tol).is_equilibrium:
            add(MixedStrategy(p))
    return out
