"""0-, 1- and 2-level modelling agents in repeated normal-form games.

A 0-level agent only sees its own rewards.  A 1-level agent knows its own
payoff table and best-responds to frequency models of the others.  A 2-level
agent predicts each opponent as a 1-level agent and best-responds to the
predicted joint action.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from magt.errors import ConfigError
from magt.game import Game, SymmetricGame, contract, symmetric_view

LEVELS = (0, 1, 2)
KNOW_TRUE = "true"
KNOW_MINE = "mine"


class Meter:
    """Counts payoff-table entries read while deciding."""

    def __init__(self):
        self.ops = 0


def _argmax_lowest(values) -> int:
    values = np.asarray(values, dtype=float)
    best = values.max()
    return int(np.flatnonzero(values >= best - 1e-12 * max(1.0, abs(best)))[0])


def _explore(epsilon, n, rng):
    """Consume one uniform draw; return a random action with prob epsilon."""
    if rng.random() < epsilon:
        return int(rng.integers(n))
    return None


def act_level0(history: Sequence[tuple[int, float]], n_actions: int, epsilon: float,
               rng: np.random.Generator, meter: Meter | None = None) -> int:
    """Epsilon-greedy on empirical mean reward per action.

    Unvisited actions count as infinitely good, so each is tried once first.
    """
    a = _explore(epsilon, n_actions, rng)
    if a is not None:
        return a
    sums = np.zeros(n_actions)
    counts = np.zeros(n_actions)
    for act, reward in history:
        sums[act] += reward
        counts[act] += 1
    return _greedy0(sums, counts, meter)


def _greedy0(sums, counts, meter):
    if meter is not None:
        meter.ops += sums.size
    unvisited = np.flatnonzero(counts == 0)
    if unvisited.size:
        return int(unvisited[0])
    return _argmax_lowest(sums / counts)


def frequency_model(counts) -> np.ndarray:
    """Empirical distribution, uniform when nothing has been observed."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return np.full(counts.size, 1.0 / counts.size)
    return counts / total


def _level1_choice(own_payoffs, player, counts, meter):
    probs = [None if j == player else frequency_model(c) for j, c in enumerate(counts)]
    if meter is not None:
        meter.ops += own_payoffs.size
    return _argmax_lowest(contract(own_payoffs, player, probs))


def _counts_from_history(history, shape):
    counts = [np.zeros(n) for n in shape]
    for profile in history:
        for j, a in enumerate(profile):
            counts[j][a] += 1
    return counts


def act_level1(opponent_history: Sequence[Sequence[int]], own_payoffs: np.ndarray,
               player: int, epsilon: float, rng: np.random.Generator,
               meter: Meter | None = None) -> int:
    """Best response to the product of per-opponent frequency models.

    ``own_payoffs`` is this agent's payoff tensor over joint actions;
    ``opponent_history`` lists past joint actions (own entry ignored).
    """
    own_payoffs = np.asarray(own_payoffs, dtype=float)
    a = _explore(epsilon, own_payoffs.shape[player], rng)
    if a is not None:
        return a
    counts = _counts_from_history(opponent_history, own_payoffs.shape)
    return _level1_choice(own_payoffs, player, counts, meter)


def _level2_choice(own_payoffs, player, opponent_payoffs, counts, meter):
    predicted = []
    for j in range(own_payoffs.ndim):
        if j == player:
            predicted.append(None)
            continue
        if j not in opponent_payoffs:
            raise ConfigError(f"no payoff model for opponent {j}")
        guess = _level1_choice(opponent_payoffs[j], j, counts, meter)
        e = np.zeros(own_payoffs.shape[j])
        e[guess] = 1.0
        predicted.append(e)
    if meter is not None:
        meter.ops += own_payoffs.size
    return _argmax_lowest(contract(own_payoffs, player, predicted))


def act_level2(history: Sequence[Sequence[int]], own_payoffs: np.ndarray, player: int,
               opponent_payoffs: dict, epsilon: float, rng: np.random.Generator,
               meter: Meter | None = None) -> int:
    """Predict each opponent as a noiseless 1-level agent, then best-respond.

    Every agent sees the same public history, so opponent j's model of the
    others is rebuilt from it.  ``opponent_payoffs[j]`` is the payoff tensor
    this agent attributes to player j.
    """
    own_payoffs = np.asarray(own_payoffs, dtype=float)
    for j in range(own_payoffs.ndim):
        if j != player and j not in opponent_payoffs:
            raise ConfigError(f"no payoff model for opponent {j}")
    a = _explore(epsilon, own_payoffs.shape[player], rng)
    if a is not None:
        return a
    counts = _counts_from_history(history, own_payoffs.shape)
    return _level2_choice(own_payoffs, player, opponent_payoffs, counts, meter)


@dataclass(frozen=True)
class AgentSpec:
    level: int
    epsilon: float = 0.05
    payoff_knowledge: str = KNOW_TRUE     # level 2: opponents' true payoffs or "mine"
    learn_steps: int | None = None        # stop updating models after this many steps

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ConfigError(f"level must be one of {LEVELS}, got {self.level!r}")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.payoff_knowledge not in (KNOW_TRUE, KNOW_MINE):
            raise ConfigError(f"unknown payoff_knowledge {self.payoff_knowledge!r}")
        if self.learn_steps is not None and self.learn_steps < 0:
            raise ConfigError("learn_steps must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> AgentSpec:
        unknown = set(d) - {"level", "epsilon", "payoff_knowledge", "learn_steps"}
        if unknown:
            raise ConfigError(f"unknown agent fields {sorted(unknown)}")
        if "level" not in d:
            raise ConfigError("agent needs a level")
        return cls(int(d["level"]), float(d.get("epsilon", 0.05)),
                   d.get("payoff_knowledge", KNOW_TRUE), d.get("learn_steps"))


@dataclass(frozen=True)
class SocietyTrace:
    actions: np.ndarray              # (steps, agents)
    rewards: np.ndarray              # (steps, agents)
    levels: tuple[int, ...]
    partners: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.actions.shape[0]

    def mean_utility(self) -> np.ndarray:
        return self.rewards.mean(axis=0)

    def cumulative_utility(self) -> np.ndarray:
        return np.cumsum(self.rewards, axis=0)

    def windowed_utility(self, window: int) -> np.ndarray:
        """Trailing mean reward over ``window`` steps (shorter at the start)."""
        c = np.vstack([np.zeros(self.rewards.shape[1]), self.cumulative_utility()])
        t = np.arange(1, self.steps + 1)
        lo = np.maximum(t - window, 0)
        return (c[t] - c[lo]) / (t - lo)[:, None]

    def level_means(self) -> dict[int, float]:
        means = self.mean_utility()
        return {lv: float(np.mean([m for m, l in zip(means, self.levels) if l == lv]))
                for lv in sorted(set(self.levels))}


def _agent_payoffs(game, i, spec):
    """What agent i knows: nothing at level 0, its own table at level 1, plus
    attributed opponent tables at level 2."""
    if spec.level == 0:
        return None, None
    own = game.payoffs[..., i]
    if spec.level == 1:
        return own, None
    opp = {}
    for j in range(game.n_players):
        if j == i:
            continue
        if spec.payoff_knowledge == KNOW_TRUE:
            opp[j] = game.payoffs[..., j]
        else:
            if game.shape[i] != game.shape[j]:
                raise ConfigError(
                    "payoff_knowledge 'mine' needs opponents with my action count")
            opp[j] = np.swapaxes(own, i, j)
    return own, opp


def run_society(game, roster: Sequence[AgentSpec], steps: int, seed: int = 0,
                matching: bool = False) -> SocietyTrace:
    """Repeated simultaneous play; every agent sees the public action history.

    With ``matching`` the game must be symmetric and the roster (even size)
    is randomly paired every step, each agent playing the row role.
    """
    roster = [r if isinstance(r, AgentSpec) else AgentSpec.from_dict(r) for r in roster]
    if steps < 1:
        raise ConfigError("steps must be at least 1")
    seqs = np.random.SeedSequence(int(seed)).spawn(len(roster) + 1)
    rngs = [np.random.default_rng(s) for s in seqs[:-1]]
    config = {"steps": steps, "seed": int(seed), "matching": bool(matching),
              "roster": [vars(r).copy() for r in roster]}
    if matching:
        sym = game if isinstance(game, SymmetricGame) else symmetric_view(game)
        return _run_matching(sym, roster, steps, rngs,
                             np.random.default_rng(seqs[-1]), config)
    if isinstance(game, SymmetricGame):
        raise ConfigError("a symmetric game needs matching mode or embedding first")
    if len(roster) != game.n_players:
        raise ConfigError(
            f"roster has {len(roster)} agents for a {game.n_players}-player game")
    return _run_fixed(game, roster, steps, rngs, config)


def _run_fixed(game: Game, roster, steps, rngs, config):
    n = game.n_players
    knowledge = [_agent_payoffs(game, i, spec) for i, spec in enumerate(roster)]
    sums = [np.zeros(k) for k in game.shape]
    visits = [np.zeros(k) for k in game.shape]
    public = [np.zeros(k) for k in game.shape]
    models = [[c.copy() for c in public] for _ in range(n)]
    actions = np.zeros((steps, n), dtype=int)
    rewards = np.zeros((steps, n))
    for t in range(steps):
        profile = []
        for i, spec in enumerate(roster):
            a = _explore(spec.epsilon, game.shape[i], rngs[i])
            if a is None:
                own, opp = knowledge[i]
                if spec.level == 0:
                    a = _greedy0(sums[i], visits[i], None)
                elif spec.level == 1:
                    a = _level1_choice(own, i, models[i], None)
                else:
                    a = _level2_choice(own, i, opp, models[i], None)
            profile.append(a)
        profile = tuple(profile)
        payoff = game.payoffs[profile]
        actions[t] = profile
        rewards[t] = payoff
        for i, spec in enumerate(roster):
            if spec.learn_steps is not None and t >= spec.learn_steps:
                continue
            sums[i][profile[i]] += payoff[i]
            visits[i][profile[i]] += 1
            for j, a in enumerate(profile):
                models[i][j][a] += 1
    return SocietyTrace(actions, rewards, tuple(r.level for r in roster), None, config)


def _run_matching(sym: SymmetricGame, roster, steps, rngs, match_rng, config):
    n_agents = len(roster)
    if n_agents < 2 or n_agents % 2:
        raise ConfigError("matching mode needs an even roster of at least 2 agents")
    k = sym.n_actions
    u = sym.payoff
    sums = np.zeros((n_agents, k))
    visits = np.zeros((n_agents, k))
    faced = np.zeros((n_agents, k))       # public: actions each agent has met
    seen = [faced.copy() for _ in range(n_agents)]   # each agent's (possibly frozen) copy
    actions = np.zeros((steps, n_agents), dtype=int)
    rewards = np.zeros((steps, n_agents))
    partners = np.zeros((steps, n_agents), dtype=int)
    for t in range(steps):
        perm = match_rng.permutation(n_agents)
        partner = np.empty(n_agents, dtype=int)
        partner[perm[0::2]] = perm[1::2]
        partner[perm[1::2]] = perm[0::2]
        choice = np.empty(n_agents, dtype=int)
        for i, spec in enumerate(roster):
            a = _explore(spec.epsilon, k, rngs[i])
            if a is None:
                if spec.level == 0:
                    a = _greedy0(sums[i], visits[i], None)
                elif spec.level == 1:
                    a = _argmax_lowest(u @ frequency_model(seen[i][i]))
                else:
                    p = partner[i]
                    guess = _argmax_lowest(u @ frequency_model(seen[i][p]))
                    a = _argmax_lowest(u[:, guess])
            choice[i] = a
        reward = u[choice, choice[partner]]
        actions[t] = choice
        rewards[t] = reward
        partners[t] = partner
        faced_now = choice[partner]
        for i, spec in enumerate(roster):
            if spec.learn_steps is not None and t >= spec.learn_steps:
                continue
            sums[i, choice[i]] += reward[i]
            visits[i, choice[i]] += 1
            seen[i][np.arange(n_agents), faced_now] += 1
    return SocietyTrace(actions, rewards, tuple(r.level for r in roster), partners, config)


def decision_cost(game: Game, level: int, history_len: int = 10, seed: int = 0) -> int:
    """Payoff entries read by one decision of an agent at ``level`` as player 0."""
    rng = np.random.default_rng(seed)
    history = [tuple(int(rng.integers(n)) for n in game.shape) for _ in range(history_len)]
    meter = Meter()
    if level == 0:
        act_level0([(p[0], float(game.payoffs[p][0])) for p in history],
                   game.shape[0], 0.0, rng, meter)
    elif level == 1:
        act_level1(history, game.payoffs[..., 0], 0, 0.0, rng, meter)
    else:
        opp = {j: game.payoffs[..., j] for j in range(1, game.n_players)}
        act_level2(history, game.payoffs[..., 0], 0, opp, 0.0, rng, meter)
    return meter.ops


def trace_to_csv(trace: SocietyTrace) -> str:
    n = trace.actions.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["step"] + [f"action_{i}" for i in range(n)] + [f"reward_{i}" for i in range(n)]
    if trace.partners is not None:
        header += [f"partner_{i}" for i in range(n)]
    writer.writerow(header)
    for t in range(trace.steps):
        row = [t + 1] + trace.actions[t].tolist() + [repr(float(x)) for x in trace.rewards[t]]
        if trace.partners is not None:
            row += trace.partners[t].tolist()
        writer.writerow(row)
    return buf.getvalue()


def summary_to_csv(trace: SocietyTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "level", "mean_utility", "variance"])
    for i, lv in enumerate(trace.levels):
        r = trace.rewards[:, i]
        writer.writerow([i, lv, repr(float(r.mean())), repr(float(r.var()))])
    return buf.getvalue()
