"""Fictitious play for N-player games with one frequency model per opponent."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from magt.equilibria import _ties, best_response
from magt.errors import GameError
from magt.game import Game, MixedStrategy, contract

LOWEST = "lowest-index"
RANDOM = "uniform-random"

DEFAULT_WINDOW = 20
DEFAULT_CONFIRM = 10


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Weights one agent holds over each opponent's actions.

    ``weights[j]`` is ``None`` for the owner and an array over player ``j``'s
    actions otherwise; there is never a joint model over several opponents.
    """

    owner: int
    weights: tuple

    def __post_init__(self):
        ws = []
        for j, w in enumerate(self.weights):
            if j == self.owner:
                ws.append(None)
                continue
            w = np.array(w, dtype=float)
            if w.ndim != 1 or w.size == 0:
                raise GameError(f"weights for opponent {j} must be a 1-d array")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise GameError(f"weights for opponent {j} must be finite and >= 0")
            if w.sum() <= 0:
                raise GameError(f"weights for opponent {j} need a positive entry")
            w.setflags(write=False)
            ws.append(w)
        object.__setattr__(self, "weights", tuple(ws))

    @classmethod
    def uniform(cls, game: Game, owner: int, prior: float = 1.0) -> BeliefState:
        return cls(owner, tuple(
            None if j == owner else np.full(n, prior) for j, n in enumerate(game.shape)))

    @property
    def opponents(self) -> tuple[int, ...]:
        return tuple(j for j, w in enumerate(self.weights) if w is not None)

    def total(self, opponent: int) -> float:
        return float(self.weights[opponent].sum())

    def validate(self, game: Game) -> BeliefState:
        if len(self.weights) != game.n_players:
            raise GameError("belief state does not match the game's player count")
        for j in self.opponents:
            if self.weights[j].size != game.shape[j]:
                raise GameError(f"belief over player {j} has wrong action count")
        return self


def update_weights(beliefs: BeliefState, observed: Sequence[int]) -> BeliefState:
    """Add one to the weight of each opponent's observed action.

    ``observed`` is the full joint action; the owner's own entry is ignored.
    """
    if len(observed) != len(beliefs.weights):
        raise GameError("observed profile length does not match the belief state")
    ws = []
    for j, w in enumerate(beliefs.weights):
        if w is None:
            ws.append(None)
            continue
        a = observed[j]
        if not 0 <= a < w.size:
            raise GameError(f"observed action {a} invalid for opponent {j}")
        w = w.copy()
        w[a] += 1.0
        ws.append(w)
    return BeliefState(beliefs.owner, tuple(ws))


def opponent_distribution(beliefs: BeliefState, opponent: int) -> MixedStrategy:
    w = beliefs.weights[opponent]
    if w is None:
        raise GameError("an agent holds no model of itself")
    total = w.sum()
    if total <= 0:
        raise GameError(f"opponent {opponent} has zero total weight")
    return MixedStrategy(w / total)


def _model(beliefs: BeliefState):
    return [None if w is None else w / w.sum() for w in beliefs.weights]


def _choose(actions, tie_rule, rng):
    if len(actions) == 1 or tie_rule == LOWEST:
        return actions[0]
    if tie_rule == RANDOM:
        if rng is None:
            raise GameError("uniform-random tie rule needs an rng")
        return actions[int(rng.integers(len(actions)))]
    raise GameError(f"unknown tie rule {tie_rule!r}")


def fp_step(game: Game, beliefs: Sequence[BeliefState], tie_rule: str = LOWEST,
            rng: np.random.Generator | None = None) -> tuple[int, ...]:
    """Joint action where each agent best-responds to its opponent models."""
    if len(beliefs) != game.n_players:
        raise GameError("need one belief state per player")
    profile = []
    for i, b in enumerate(beliefs):
        if b.owner != i:
            raise GameError(f"belief state {i} belongs to player {b.owner}")
        br = best_response(game, i, _model(b))
        profile.append(_choose(br.actions, tie_rule, rng))
    return tuple(profile)


def _poly_nonnegative(coeffs, strict: bool, tol: float) -> bool:
    """Whether a polynomial (highest degree first) stays >= 0 (or > 0) on
    [0, inf).  Checked at 0, at interior critical points and at infinity."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if coeffs.size == 0:
        return not strict
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    thresh = tol * scale
    lead = coeffs[0]
    if (lead <= thresh if strict else lead < -thresh) and coeffs.size > 1:
        return False
    points = [0.0]
    if coeffs.size > 2:
        for root in np.roots(np.polyder(coeffs)):
            if abs(root.imag) < 1e-9 and root.real > 0:
                points.append(root.real)
    values = np.polyval(coeffs, points)
    if strict:
        return bool(np.all(values > thresh))
    return bool(np.all(values >= -thresh))


def is_absorbing(game: Game, beliefs: Sequence[BeliefState], profile,
                 tie_rule: str = LOWEST, tol: float = 1e-12) -> bool:
    """True if, from these beliefs, ``profile`` is chosen at every future step
    provided it keeps being played.

    Future weights are ``k + m * e_p`` for ``m = 0, 1, ...``; each agent's
    payoff advantage for its own action is a polynomial in ``m`` whose sign is
    checked on the whole half-line.
    """
    for i, b in enumerate(beliefs):
        own = profile[i]
        # polynomial coefficients (lowest degree first) of each opponent factor
        u = game.payoffs[..., i]
        poly = np.moveaxis(u, i, -1)[..., None]  # trailing axis: degree
        opps = [j for j in range(game.n_players) if j != i]
        for j in reversed(opps):
            axis = j if j < i else j - 1
            e = np.zeros(game.shape[j])
            e[profile[j]] = 1.0
            lead = np.moveaxis(poly, axis, -1)            # (..., deg, n_j)
            base = lead @ b.weights[j]                      # (..., deg)
            step = lead @ e
            poly = np.concatenate(
                [base, np.zeros(base.shape[:-1] + (1,))], axis=-1)
            poly[..., 1:] += step
        # poly: (n_i, deg+1), lowest degree first
        for a in range(game.shape[i]):
            if a == own:
                continue
            diff = (poly[own] - poly[a])[::-1]
            strict = not (tie_rule == LOWEST and own < a)
            if not _poly_nonnegative(diff, strict, tol):
                return False
    return True


@dataclass(frozen=True)
class FpStep:
    t: int
    profile: tuple[int, ...]
    beliefs: tuple[tuple, ...]      # beliefs[i][j]: agent i's distribution over j
    payoffs: tuple[float, ...]


@dataclass(frozen=True)
class FpStatus:
    kind: str                       # converged | cycle | budget_exhausted
    profile: tuple[int, ...] | None = None
    period: int | None = None
    profiles: tuple[tuple[int, ...], ...] = ()

    def describe(self, game: Game) -> str:
        def fmt(p):
            return "(" + ",".join(game.profile_names(p)) + ")"
        if self.kind == "converged":
            return f"converged profile={fmt(self.profile)}"
        if self.kind == "cycle":
            return (f"cycle period={self.period} profiles="
                    + ",".join(fmt(p) for p in self.profiles))
        return "budget_exhausted"


@dataclass(frozen=True)
class FpTrace:
    game: Game
    steps: tuple[FpStep, ...]
    status: FpStatus
    final_beliefs: tuple[BeliefState, ...]

    @property
    def profiles(self) -> list[tuple[int, ...]]:
        return [s.profile for s in self.steps]


def detect_period(seq, window: int) -> int | None:
    """Smallest period >= 2 of the last ``window`` items, if any."""
    if len(seq) < window:
        return None
    tail = seq[-window:]
    if all(x == tail[0] for x in tail):
        return None
    for p in range(2, window // 2 + 1):
        if all(tail[k] == tail[k + p] for k in range(window - p)):
            return p
    return None


def _canonical_cycle(tail, period):
    block = list(tail[-period:])
    start = block.index(min(block))
    return tuple(block[start:] + block[:start])


def run_fp(game: Game, initial_beliefs: Sequence[BeliefState] | None = None,
           budget: int = 100, window: int = DEFAULT_WINDOW,
           tie_rule: str = LOWEST, seed: int | None = 0,
           confirm: int = DEFAULT_CONFIRM, stop_early: bool = False) -> FpTrace:
    """Iterate fictitious play and classify where it ended up.

    A run is ``converged`` when the last ``confirm`` joint actions agree and
    that profile is absorbing under the current beliefs; otherwise it is a
    ``cycle`` when the last ``window`` joint actions are periodic with period
    at least 2; otherwise ``budget_exhausted``.  By default the run uses the
    whole budget and is classified at the end; ``stop_early`` stops at the
    first convergence.
    """
    if budget < 1:
        raise GameError("budget must be at least 1")
    if window < 2:
        raise GameError("window must be at least 2")
    if confirm < 1:
        raise GameError("confirmation window must be at least 1")
    if initial_beliefs is None:
        beliefs = [BeliefState.uniform(game, i) for i in range(game.n_players)]
    else:
        beliefs = [b.validate(game) for b in initial_beliefs]
    rng = np.random.default_rng(seed) if tie_rule == RANDOM else None
    if tie_rule not in (LOWEST, RANDOM):
        raise GameError(f"unknown tie rule {tie_rule!r}")
    # mutable working copy of the weights; BeliefStates are rebuilt only for checks
    weights = [[None if w is None else w.copy() for w in b.weights] for b in beliefs]
    own = [game.payoffs[..., i] for i in range(game.n_players)]
    steps = []
    status = None
    for t in range(1, budget + 1):
        models = [[None if w is None else w / w.sum() for w in ws] for ws in weights]
        snapshot = tuple(tuple(None if m is None else tuple(m.tolist()) for m in ms)
                         for ms in models)
        profile = tuple(
            _choose(_ties(contract(own[i], i, models[i])).actions, tie_rule, rng)
            for i in range(game.n_players))
        payoffs = tuple(float(x) for x in game.payoffs[profile])
        steps.append(FpStep(t, profile, snapshot, payoffs))
        for ws in weights:
            for j, w in enumerate(ws):
                if w is not None:
                    w[profile[j]] += 1.0
        if stop_early:
            status = _converged(game, _freeze(weights), steps, confirm, tie_rule)
            if status is not None:
                break
    beliefs = _freeze(weights)
    if status is None:
        status = _classify(game, beliefs, steps, window, confirm, tie_rule)
    return FpTrace(game, tuple(steps), status, tuple(beliefs))


def _freeze(weights):
    return [BeliefState(i, tuple(ws)) for i, ws in enumerate(weights)]


def _converged(game, beliefs, steps, confirm, tie_rule):
    if len(steps) < confirm:
        return None
    last = steps[-1].profile
    if any(s.profile != last for s in steps[-confirm:]):
        return None
    if not is_absorbing(game, beliefs, last, tie_rule):
        return None
    return FpStatus("converged", profile=last)


def _classify(game, beliefs, steps, window, confirm, tie_rule):
    status = _converged(game, beliefs, steps, confirm, tie_rule)
    if status is not None:
        return status
    seq = [s.profile for s in steps]
    period = detect_period(seq, window)
    if period is not None:
        return FpStatus("cycle", period=period,
                        profiles=_canonical_cycle(seq[-window:], period))
    return FpStatus("budget_exhausted")


def trace_to_csv(trace: FpTrace) -> str:
    game = trace.game
    header = ["t"] + [f"action_{p}" for p in game.players]
    cols = []
    for i in range(game.n_players):
        for j in range(game.n_players):
            if i == j:
                continue
            for a in game.actions[j]:
                cols.append((i, j))
                header.append(f"belief_{game.players[i]}_{game.players[j]}_{a}")
    header += [f"payoff_{p}" for p in game.players]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for s in trace.steps:
        row = [s.t] + list(game.profile_names(s.profile))
        for i in range(game.n_players):
            for j in range(game.n_players):
                if i != j:
                    row.extend(repr(x) for x in s.beliefs[i][j])
        row.extend(repr(x) for x in s.payoffs)
        writer.writerow(row)
    buf.write(f"# status: {trace.status.describe(game)}\n")
    return buf.getvalue()
