"""Finite normal-form games, mixed strategies and the JSON game-file format.

A :class:`Game` stores a dense payoff tensor of shape ``(n_1, ..., n_N, N)``
indexed by pure strategy profiles.  Actions carry string names for files and
reports; all computation uses integer indices.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from magt.errors import GameError, ParseError, ValidationError

PROB_TOL = 1e-9


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Game:
    players: tuple[str, ...]
    actions: tuple[tuple[str, ...], ...]
    payoffs: np.ndarray

    def __post_init__(self):
        players = tuple(str(p) for p in self.players)
        actions = tuple(tuple(str(a) for a in acts) for acts in self.actions)
        if len(players) < 1:
            raise ValidationError("a game needs at least one player")
        if len(actions) != len(players):
            raise ValidationError(
                f"{len(players)} players but {len(actions)} action lists")
        for name, acts in zip(players, actions):
            if not acts:
                raise ValidationError(f"player {name!r} has an empty action list")
            if len(set(acts)) != len(acts):
                raise ValidationError(f"player {name!r} has duplicate action names")
        payoffs = _frozen(self.payoffs)
        shape = tuple(len(a) for a in actions) + (len(players),)
        if payoffs.shape != shape:
            raise ValidationError(
                f"payoff tensor has shape {payoffs.shape}, expected {shape}")
        if not np.all(np.isfinite(payoffs)):
            raise ValidationError("payoffs must be finite")
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "payoffs", payoffs)

    @classmethod
    def from_payoffs(cls, payoffs, actions=None, players=None) -> Game:
        """Build a game from a ``(n_1, ..., n_N, N)`` array with default names."""
        payoffs = np.asarray(payoffs, dtype=float)
        n = payoffs.ndim - 1
        if players is None:
            players = tuple(f"P{i + 1}" for i in range(n))
        if actions is None:
            actions = tuple(_default_names(k) for k in payoffs.shape[:-1])
        return cls(tuple(players), tuple(tuple(a) for a in actions), payoffs)

    @classmethod
    def bimatrix(cls, row, col, actions=None, players=None) -> Game:
        """Two-player game from the row player's and column player's matrices."""
        row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        if row.shape != col.shape or row.ndim != 2:
            raise ValidationError("bimatrix needs two matrices of equal 2-d shape")
        return cls.from_payoffs(np.stack([row, col], axis=-1), actions, players)

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.payoffs.shape[:-1]

    def profiles(self):
        """All pure strategy profiles as index tuples, in row-major order."""
        return itertools.product(*(range(k) for k in self.shape))

    def action_index(self, player: int, action) -> int:
        if isinstance(action, (int, np.integer)):
            if not 0 <= action < self.shape[player]:
                raise GameError(
                    f"action index {action} out of range for player "
                    f"{self.players[player]!r}")
            return int(action)
        try:
            return self.actions[player].index(action)
        except ValueError:
            raise GameError(
                f"unknown action {action!r} for player {self.players[player]!r}"
            ) from None

    def profile_index(self, profile) -> tuple[int, ...]:
        if len(profile) != self.n_players:
            raise GameError(
                f"profile has {len(profile)} entries for {self.n_players} players")
        return tuple(self.action_index(i, a) for i, a in enumerate(profile))

    def profile_names(self, profile) -> tuple[str, ...]:
        return tuple(self.actions[i][a] for i, a in enumerate(profile))

    def check_player(self, player: int) -> int:
        if not isinstance(player, (int, np.integer)) or not 0 <= player < self.n_players:
            raise GameError(f"player index {player!r} out of range")
        return int(player)

    def restrict(self, surviving: Sequence[Sequence[int]]) -> Game:
        """Subgame keeping only the given action indices per player."""
        idx = np.ix_(*[list(s) for s in surviving], range(self.n_players))
        actions = tuple(
            tuple(self.actions[i][a] for a in s) for i, s in enumerate(surviving))
        return Game(self.players, actions, self.payoffs[idx])

    def affine(self, scale: float, shift: float = 0.0) -> Game:
        """Positive affine payoff transform; preserves all solution concepts."""
        if scale <= 0:
            raise GameError("scale must be positive")
        return Game(self.players, self.actions, self.payoffs * scale + shift)

    def __eq__(self, other):
        if not isinstance(other, Game):
            return NotImplemented
        return (self.players == other.players and self.actions == other.actions
                and np.array_equal(self.payoffs, other.payoffs))

    def __hash__(self):
        return hash((self.players, self.actions, self.payoffs.tobytes()))

    def __repr__(self):
        return f"Game(players={self.players}, actions={self.actions})"


def _default_names(k: int) -> tuple[str, ...]:
    if k <= 26:
        return tuple(chr(ord("A") + i) for i in range(k))
    return tuple(f"a{i}" for i in range(k))


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Probability vector over one player's actions.

    Vectors within ``PROB_TOL`` of the simplex are renormalised; anything
    further off is rejected.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size == 0:
            raise GameError("a mixed strategy needs at least one action")
        if not np.all(np.isfinite(p)) or p.min() < -PROB_TOL:
            raise GameError(f"negative or non-finite probability in {p}")
        total = p.sum()
        if abs(total - 1.0) > PROB_TOL:
            raise GameError(f"probabilities sum to {total!r}, not 1")
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def pure(cls, n: int, action: int) -> MixedStrategy:
        p = np.zeros(n)
        p[action] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, n: int) -> MixedStrategy:
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return self.probs.size

    def __getitem__(self, i):
        return float(self.probs[i])

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.probs > 0))

    @property
    def is_pure(self) -> bool:
        return len(self.support) == 1

    def close_to(self, other, tol: float = 1e-9) -> bool:
        other = np.asarray(getattr(other, "probs", other), dtype=float)
        return other.shape == self.probs.shape and bool(
            np.max(np.abs(other - self.probs)) <= tol)

    def __eq__(self, other):
        if not isinstance(other, MixedStrategy):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"MixedStrategy({np.round(self.probs, 6).tolist()})"


@dataclass(frozen=True)
class MixedProfile:
    strategies: tuple[MixedStrategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(
            s if isinstance(s, MixedStrategy) else MixedStrategy(s)
            for s in self.strategies))

    @classmethod
    def pure(cls, game: Game, profile) -> MixedProfile:
        idx = game.profile_index(profile)
        return cls(tuple(MixedStrategy.pure(n, a) for n, a in zip(game.shape, idx)))

    @classmethod
    def uniform(cls, game: Game) -> MixedProfile:
        return cls(tuple(MixedStrategy.uniform(n) for n in game.shape))

    def __len__(self):
        return len(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    def __iter__(self):
        return iter(self.strategies)

    def validate(self, game: Game) -> MixedProfile:
        if len(self.strategies) != game.n_players:
            raise GameError(
                f"profile has {len(self.strategies)} strategies for "
                f"{game.n_players} players")
        for i, (s, n) in enumerate(zip(self.strategies, game.shape)):
            if len(s) != n:
                raise GameError(
                    f"strategy for player {game.players[i]!r} has {len(s)} "
                    f"entries, expected {n}")
        return self

    @property
    def is_pure(self) -> bool:
        return all(s.is_pure for s in self.strategies)

    def pure_profile(self) -> tuple[int, ...] | None:
        if not self.is_pure:
            return None
        return tuple(s.support[0] for s in self.strategies)


@dataclass(frozen=True, eq=False)
class SymmetricGame:
    """Two-player symmetric game: ``payoff[s, t]`` is u(s, t) for an s-player
    meeting a t-player."""

    actions: tuple[str, ...]
    payoff: np.ndarray

    def __post_init__(self):
        actions = tuple(str(a) for a in self.actions)
        if not actions:
            raise ValidationError("a symmetric game needs at least one action")
        if len(set(actions)) != len(actions):
            raise ValidationError("duplicate action names")
        u = _frozen(self.payoff)
        if u.shape != (len(actions), len(actions)):
            raise ValidationError(
                f"payoff matrix has shape {u.shape}, expected "
                f"{(len(actions), len(actions))}")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "payoff", u)

    @classmethod
    def from_matrix(cls, payoff, actions=None) -> SymmetricGame:
        payoff = np.asarray(payoff, dtype=float)
        if actions is None:
            actions = _default_names(payoff.shape[0])
        return cls(tuple(actions), payoff)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def affine(self, scale: float, shift: float = 0.0) -> SymmetricGame:
        if scale <= 0:
            raise GameError("scale must be positive")
        return SymmetricGame(self.actions, self.payoff * scale + shift)

    def rescaled(self, low: float = 0.0, high: float = 1.0) -> SymmetricGame:
        """Affinely map the payoff range onto ``[low, high]``.

        Constant games are shifted to ``low``.  Use this to bring payoffs into
        a range where replicator growth factors stay positive.
        """
        lo, hi = float(self.payoff.min()), float(self.payoff.max())
        if hi == lo:
            return SymmetricGame(self.actions, np.full_like(self.payoff, low))
        scale = (high - low) / (hi - lo)
        return self.affine(scale, low - lo * scale)

    def __eq__(self, other):
        if not isinstance(other, SymmetricGame):
            return NotImplemented
        return self.actions == other.actions and np.array_equal(
            self.payoff, other.payoff)

    def __hash__(self):
        return hash((self.actions, self.payoff.tobytes()))


def utility(game: Game, profile) -> np.ndarray:
    """Payoff vector of a pure profile given by action indices or names."""
    idx = game.profile_index(profile)
    return game.payoffs[idx]


def _strategy_arrays(game: Game, profile) -> list[np.ndarray]:
    if isinstance(profile, MixedProfile):
        profile.validate(game)
        return [s.probs for s in profile]
    if len(profile) != game.n_players:
        raise GameError(
            f"profile has {len(profile)} strategies for {game.n_players} players")
    out = []
    for i, s in enumerate(profile):
        if s is None:
            out.append(None)
            continue
        p = getattr(s, "probs", s)
        p = np.asarray(p, dtype=float)
        if p.shape != (game.shape[i],):
            raise GameError(
                f"strategy for player {game.players[i]!r} has shape {p.shape}, "
                f"expected ({game.shape[i]},)")
        out.append(p)
    return out


def action_values(game: Game, player: int, profile) -> np.ndarray:
    """Expected utility of each pure action of ``player`` against the others.

    ``profile`` holds one strategy per player; the entry for ``player`` is
    ignored and may be ``None``.
    """
    player = game.check_player(player)
    probs = _strategy_arrays(game, profile)
    return contract(game.payoffs[..., player], player, probs)


def contract(u: np.ndarray, player: int, probs) -> np.ndarray:
    """Average a single player's payoff tensor over every other axis."""
    # contract from the last axis so lower axis numbers stay valid
    for j in reversed(range(u.ndim)):
        if j != player:
            u = np.moveaxis(u, j, -1) @ probs[j]
    return u


def expected_utility(game: Game, profile, player: int) -> float:
    player = game.check_player(player)
    probs = _strategy_arrays(game, profile)
    if probs[player] is None:
        raise GameError("expected_utility needs a strategy for every player")
    return float(action_values(game, player, probs) @ probs[player])


def embed_symmetric(sym: SymmetricGame) -> Game:
    u = sym.payoff
    return Game(("P1", "P2"), (sym.actions, sym.actions), np.stack([u, u.T], axis=-1))


def symmetric_view(game: Game, tol: float = 1e-12) -> SymmetricGame:
    """Inverse of :func:`embed_symmetric`; raises if the game is not symmetric."""
    if game.n_players != 2 or game.shape[0] != game.shape[1]:
        raise GameError("only square two-player games can be symmetric")
    if game.actions[0] != game.actions[1]:
        raise GameError("players must share the same action names to be symmetric")
    u1 = game.payoffs[..., 0]
    u2 = game.payoffs[..., 1]
    if np.max(np.abs(u1 - u2.T)) > tol:
        raise GameError("game is not symmetric: u_2(s, t) != u_1(t, s)")
    return SymmetricGame(game.actions[0], u1)


# --- game files ---------------------------------------------------------


def _field(doc, key, where=None):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError("missing required field", field=key if where is None else f"{where}.{key}")
    return doc[key]


def _name_list(value, field):
    if not isinstance(value, list) or not all(isinstance(v, (str, int)) for v in value):
        raise ParseError("expected a list of names", field=field)
    return tuple(str(v) for v in value)


def _real(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError("expected a real number", field=field)
    return float(value)


def parse_document(text: str):
    """Parse a game document into a :class:`Game` or :class:`SymmetricGame`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    if doc.get("symmetric", False):
        return _parse_symmetric(doc)
    return _parse_general(doc)


def _parse_general(doc) -> Game:
    players = _name_list(_field(doc, "players"), "players")
    raw_actions = _field(doc, "actions")
    if not isinstance(raw_actions, list) or len(raw_actions) != len(players):
        raise ParseError("expected one action list per player", field="actions")
    actions = tuple(_name_list(a, f"actions[{i}]") for i, a in enumerate(raw_actions))
    for name, acts in zip(players, actions):
        if not acts:
            raise ValidationError(f"player {name!r} has an empty action list")
        if len(set(acts)) != len(acts):
            raise ValidationError(f"player {name!r} has duplicate action names")
    records = _field(doc, "payoffs")
    if not isinstance(records, list):
        raise ParseError("expected a list of payoff records", field="payoffs")
    shape = tuple(len(a) for a in actions)
    payoffs = np.zeros(shape + (len(players),))
    seen = np.zeros(shape, dtype=bool)
    for k, rec in enumerate(records):
        where = f"payoffs[{k}]"
        prof = _name_list(_field(rec, "profile", where), f"{where}.profile")
        if len(prof) != len(players):
            raise ParseError(f"profile needs {len(players)} actions", field=f"{where}.profile")
        idx = []
        for i, a in enumerate(prof):
            if a not in actions[i]:
                raise ParseError(f"unknown action {a!r} for player {players[i]!r}",
                                 field=f"{where}.profile")
            idx.append(actions[i].index(a))
        u = _field(rec, "u", where)
        if not isinstance(u, list) or len(u) != len(players):
            raise ParseError(f"expected {len(players)} payoffs", field=f"{where}.u")
        idx = tuple(idx)
        if seen[idx]:
            raise ValidationError(f"duplicate payoff record for profile {list(prof)}")
        seen[idx] = True
        payoffs[idx] = [_real(x, f"{where}.u") for x in u]
    if not seen.all():
        missing = [[actions[i][int(a)] for i, a in enumerate(p)]
                   for p in zip(*np.nonzero(~seen))]
        raise ValidationError(f"payoff tensor incomplete; missing profiles: {missing}")
    return Game(players, actions, payoffs)


def _parse_symmetric(doc) -> SymmetricGame:
    actions = _name_list(_field(doc, "actions"), "actions")
    if not actions:
        raise ValidationError("symmetric game has an empty action list")
    if len(set(actions)) != len(actions):
        raise ValidationError("duplicate action names")
    records = _field(doc, "payoffs")
    if not isinstance(records, list):
        raise ParseError("expected a list of payoff records", field="payoffs")
    n = len(actions)
    u = np.zeros((n, n))
    seen = np.zeros((n, n), dtype=bool)
    for k, rec in enumerate(records):
        where = f"payoffs[{k}]"
        rc = []
        for key in ("row", "col"):
            a = _field(rec, key, where)
            if str(a) not in actions:
                raise ParseError(f"unknown action {a!r}", field=f"{where}.{key}")
            rc.append(actions.index(str(a)))
        i, j = rc
        if seen[i, j]:
            raise ValidationError(
                f"duplicate payoff record for ({actions[i]}, {actions[j]})")
        seen[i, j] = True
        u[i, j] = _real(_field(rec, "u", where), f"{where}.u")
    if not seen.all():
        missing = [[actions[i], actions[j]] for i, j in zip(*np.nonzero(~seen))]
        raise ValidationError(f"payoff matrix incomplete; missing pairs: {missing}")
    return SymmetricGame(actions, u)


def load_game(text: str) -> Game:
    """Parse a game document.  Symmetric documents are returned embedded."""
    doc = parse_document(text)
    if isinstance(doc, SymmetricGame):
        return embed_symmetric(doc)
    return doc


def load_symmetric(text: str) -> SymmetricGame:
    doc = parse_document(text)
    if isinstance(doc, SymmetricGame):
        return doc
    return symmetric_view(doc)


def game_to_dict(game) -> dict:
    if isinstance(game, SymmetricGame):
        return {
            "symmetric": True,
            "actions": list(game.actions),
            "payoffs": [
                {"row": game.actions[i], "col": game.actions[j], "u": float(game.payoff[i, j])}
                for i in range(game.n_actions) for j in range(game.n_actions)
            ],
        }
    return {
        "players": list(game.players),
        "actions": [list(a) for a in game.actions],
        "payoffs": [
            {"profile": list(game.profile_names(p)), "u": [float(x) for x in game.payoffs[p]]}
            for p in game.profiles()
        ],
    }


def save_game(game) -> str:
    return json.dumps(game_to_dict(game), indent=2) + "\n"
