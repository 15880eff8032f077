"""Change/learning/retention/impact model of agents chasing moving targets.

Each agent maps world states to actions with a decision function and is
scored against a target function that other agents' learning keeps moving.
:func:`clri_predict` iterates the expected-error recurrence;
:func:`clri_simulate` runs the generative process it summarises.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from magt.errors import ConfigError, GameError

DRIFT_TOL = 1e-12
BLOCK = 1000


class UnderdeterminedFit(UserWarning):
    """The trajectory carries too little signal to identify all parameters."""


def _vec(x, n, name):
    a = np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ClriParams:
    """Per-agent rates plus either a fixed volatility or an impact matrix.

    ``impact[j, i]`` is the probability that a change in agent j's decision
    for a state moves agent i's target for that state.  With neither given,
    volatility is zero.
    """

    actions: np.ndarray
    change: np.ndarray
    learn: np.ndarray
    retain: np.ndarray
    volatility: np.ndarray | None = None
    impact: np.ndarray | None = None

    def __post_init__(self):
        actions = np.atleast_1d(np.asarray(self.actions))
        n = actions.size
        if n < 1:
            raise ConfigError("need at least one agent")
        if np.any(actions != np.round(actions)) or np.any(actions < 2):
            raise ConfigError("every agent needs an integer action count >= 2")
        actions = actions.astype(int)
        actions.setflags(write=False)
        object.__setattr__(self, "actions", actions)
        for name in ("change", "learn", "retain"):
            v = _vec(getattr(self, name), n, name)
            if np.any(v < 0) or np.any(v > 1):
                raise ConfigError(f"{name} rates must lie in [0, 1]")
            object.__setattr__(self, name, v)
        if np.any(self.learn > self.change + 1e-12):
            raise ConfigError("learning rate must not exceed change rate (l <= c)")
        two = actions == 2
        if np.any(np.abs(self.change[two] - self.learn[two]) > 1e-12):
            raise ConfigError(
                "with two actions every change of a wrong mapping fixes it, so c must equal l")
        if self.volatility is not None and self.impact is not None:
            raise ConfigError("give either a volatility or an impact matrix, not both")
        if self.volatility is not None:
            v = _vec(self.volatility, n, "volatility")
            if np.any(v < 0) or np.any(v > 1):
                raise ConfigError("volatility must lie in [0, 1]")
            object.__setattr__(self, "volatility", v)
        if self.impact is not None:
            imp = np.array(self.impact, dtype=float)
            if imp.shape != (n, n):
                raise ConfigError(f"impact matrix must be {n}x{n}")
            if np.any(imp < 0) or np.any(imp > 1):
                raise ConfigError("impacts must lie in [0, 1]")
            imp.setflags(write=False)
            object.__setattr__(self, "impact", imp)

    @classmethod
    def single(cls, actions, c, l, r, v=0.0) -> ClriParams:
        return cls(np.array([actions]), c, l, r, volatility=v)

    @property
    def n_agents(self) -> int:
        return self.actions.size

    def change_probability(self, errors) -> np.ndarray:
        """Chance a given state's decision changes in one step at this error."""
        e = np.asarray(errors, dtype=float)
        return e * self.change + (1 - e) * (1 - self.retain)


@dataclass(frozen=True)
class ErrorTrajectory:
    values: np.ndarray                      # (steps + 1, n_agents)
    clamped: tuple = ()                     # (step, agent, raw value)

    def __len__(self):
        return self.values.shape[0]

    def agent(self, i: int) -> np.ndarray:
        return self.values[:, i]


def error(decision, target, weights=None) -> float:
    """Probability mass of world states where decision and target disagree."""
    decision = np.asarray(decision)
    target = np.asarray(target)
    if decision.shape != target.shape:
        raise GameError("decision and target must cover the same states")
    if weights is None:
        weights = np.full(decision.shape, 1.0 / decision.size)
    weights = np.asarray(weights, dtype=float)
    if abs(weights.sum() - 1) > 1e-9 or np.any(weights < 0):
        raise GameError("state distribution must be non-negative and sum to 1")
    return float(weights @ (decision != target))


def volatility(params: ClriParams, change_probs) -> np.ndarray:
    """Target-move probability of each agent from others' decision changes."""
    p = _vec(change_probs, params.n_agents, "change_probs")
    if np.any(p < 0) or np.any(p > 1):
        raise GameError("change probabilities must lie in [0, 1]")
    if params.impact is None:
        return np.zeros(params.n_agents)
    return _impact_volatility(params.impact, p)


def _impact_volatility(impact, p):
    # keep[j, ..., i] = 1 - I[j, i] * p_j; diagonal excluded
    keep = 1.0 - impact * p[..., :, None]
    n = impact.shape[0]
    keep[..., np.arange(n), np.arange(n)] = 1.0
    return 1.0 - np.prod(keep, axis=-2)


def next_error(params: ClriParams, e, v) -> np.ndarray:
    """One application of the expected-error recurrence."""
    n = params.actions
    c, l, r = params.change, params.learn, params.retain
    return (1 - r + v * (n * r - 1) / (n - 1)
            + e * (r - l + v * (n * (l - r) + l - c) / (n - 1)))


def clri_predict(params: ClriParams, e0, steps: int,
                 change_probs=None) -> ErrorTrajectory:
    """Iterate the recurrence for ``steps`` steps from initial error ``e0``.

    Volatility is the fixed value when one is given.  With an impact matrix
    it comes from ``change_probs`` if supplied, otherwise from each agent's
    expected decision-change probability at its current predicted error.
    """
    e = _vec(e0, params.n_agents, "e0")
    if np.any(e < 0) or np.any(e > 1):
        raise GameError("initial error must lie in [0, 1]")
    if steps < 0:
        raise GameError("steps must be non-negative")
    out = [e.copy()]
    clamped = []
    for t in range(1, steps + 1):
        if params.volatility is not None:
            v = params.volatility
        elif params.impact is not None:
            p = params.change_probability(e) if change_probs is None else change_probs
            v = volatility(params, p)
        else:
            v = np.zeros(params.n_agents)
        raw = next_error(params, e, v)
        for i in np.flatnonzero((raw < -DRIFT_TOL) | (raw > 1 + DRIFT_TOL)):
            clamped.append((t, int(i), float(raw[i])))
        e = np.clip(raw, 0.0, 1.0)
        out.append(e)
    return ErrorTrajectory(np.array(out), tuple(clamped))


def fixed_point(params: ClriParams) -> np.ndarray:
    """Limit of the recurrence at zero volatility, (1 - r) / (1 - r + l)."""
    r, l = params.retain, params.learn
    denom = 1 - r + l
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, (1 - r) / denom, np.nan)


@dataclass(frozen=True)
class SimulationResult:
    mean: ErrorTrajectory
    std: np.ndarray                 # per-step sample std across trials
    half_width: np.ndarray          # 1.96 * std / sqrt(trials)
    volatility: np.ndarray          # (steps, n_agents) mean applied volatility
    trials: int
    seed: int

    @property
    def stderr(self) -> np.ndarray:
        return self.std / np.sqrt(self.trials)


def block_seed(seed: int, block: int) -> np.random.SeedSequence:
    """Generator seed for trial block ``block`` (trials block*BLOCK onwards)."""
    return np.random.SeedSequence([int(seed), int(block)])


def _simulate_block(params, weights, n_states, steps, trials, e0, rng):
    n_agents = params.n_agents
    acts = params.actions
    target = [rng.integers(0, acts[i], size=(trials, n_states)) for i in range(n_agents)]
    decision = []
    for i in range(n_agents):
        wrong = rng.random((trials, n_states)) < e0[i]
        shift = rng.integers(1, acts[i], size=(trials, n_states))
        decision.append(np.where(wrong, (target[i] + shift) % acts[i], target[i]))

    errs = np.empty((steps + 1, n_agents, trials))
    vols = np.empty((steps, n_agents, trials))
    for i in range(n_agents):
        errs[0, i] = (decision[i] != target[i]) @ weights

    for t in range(1, steps + 1):
        freq = np.empty((n_agents, trials))
        for i in range(n_agents):
            n = acts[i]
            d, tgt = decision[i], target[i]
            u = rng.random((trials, n_states))
            other = (tgt + rng.integers(1, n, size=(trials, n_states))) % n
            wrong = d != tgt
            new = d.copy()
            fix = wrong & (u < params.learn[i])
            scramble = wrong & (u >= params.learn[i]) & (u < params.change[i])
            forget = ~wrong & (u >= params.retain[i])
            new[fix] = tgt[fix]
            new[scramble | forget] = other[scramble | forget]
            freq[i] = (new != d) @ weights
            decision[i] = new
        if params.volatility is not None:
            v = np.broadcast_to(params.volatility[:, None], (n_agents, trials))
        elif params.impact is not None:
            v = _impact_volatility(params.impact, freq.T).T
        else:
            v = np.zeros((n_agents, trials))
        vols[t - 1] = v
        for i in range(n_agents):
            n = acts[i]
            moves = rng.random((trials, n_states)) < v[i][:, None]
            shift = rng.integers(1, n, size=(trials, n_states))
            target[i] = np.where(moves, (target[i] + shift) % n, target[i])
            errs[t, i] = (decision[i] != target[i]) @ weights
    return errs, vols


def clri_simulate(params: ClriParams, n_states: int = 20, steps: int = 30,
                  trials: int = 10_000, seed: int = 0, e0=1.0,
                  distribution=None) -> SimulationResult:
    """Monte-Carlo estimate of each agent's error trajectory.

    Per step, for each agent and world state: a wrong mapping becomes correct
    with probability l, moves to another wrong action with probability c - l
    and otherwise stays; a correct mapping is kept with probability r and
    otherwise moves to a wrong action.  Then the target moves to a different
    action with the agent's volatility (fixed, or from the impact matrix using
    the fraction of states each other agent just changed).  Initial mappings
    are wrong independently with probability ``e0``.

    Trials run in blocks of ``BLOCK`` with generators from :func:`block_seed`
    and are merged in block order, so results do not depend on scheduling.
    """
    if trials < 1:
        raise GameError("trials must be at least 1")
    if n_states < 1:
        raise GameError("need at least one world state")
    if distribution is None:
        weights = np.full(n_states, 1.0 / n_states)
    else:
        weights = np.asarray(distribution, dtype=float)
        if weights.shape != (n_states,) or np.any(weights < 0) or weights.sum() <= 0:
            raise GameError("state distribution must be non-negative with one weight per state")
        weights = weights / weights.sum()
    e0 = _vec(e0, params.n_agents, "e0")
    total = np.zeros((steps + 1, params.n_agents))
    total_sq = np.zeros_like(total)
    vol_total = np.zeros((steps, params.n_agents))
    for block, start in enumerate(range(0, trials, BLOCK)):
        size = min(BLOCK, trials - start)
        rng = np.random.default_rng(block_seed(seed, block))
        errs, vols = _simulate_block(params, weights, n_states, steps, size, e0, rng)
        total += errs.sum(axis=-1)
        total_sq += (errs ** 2).sum(axis=-1)
        vol_total += vols.sum(axis=-1)
    mean = total / trials
    if trials > 1:
        var = np.clip((total_sq - trials * mean ** 2) / (trials - 1), 0, None)
    else:
        var = np.zeros_like(mean)
    std = np.sqrt(var)
    return SimulationResult(
        ErrorTrajectory(mean), std, 1.96 * std / np.sqrt(trials),
        vol_total / trials, trials, seed)


@dataclass(frozen=True)
class ClriFit:
    retain: float
    learn: float
    volatility: float
    change: float
    intercept: float
    slope: float
    residual: float
    warnings: tuple[str, ...] = field(default=())


def fit_clri(errors, actions: int, change: float | None = None,
             volatility: float | None = None, retain: float | None = None) -> ClriFit:
    """Least-squares fit of ``e' = a + b e`` and recovery of the rates.

    A single trajectory identifies only the intercept and slope, so of
    (r, l, v) one must be pinned: volatility defaults to 0 (giving r and l);
    passing ``retain`` instead frees the effective volatility.  ``change``
    defaults to the fitted learning rate.
    """
    e = np.asarray(errors, dtype=float).reshape(-1)
    if e.size < 3:
        raise GameError("need a trajectory of at least 3 points")
    if actions < 2:
        raise GameError("action count must be at least 2")
    if volatility is not None and retain is not None:
        raise GameError("pin at most one of volatility and retain")
    if volatility is None and retain is None:
        volatility = 0.0
    x, y = e[:-1], e[1:]
    notes = []
    if np.ptp(x) < 1e-12:
        msg = "trajectory has no variation; slope and learning rate are unidentified"
        warnings.warn(msg, UnderdeterminedFit, stacklevel=2)
        notes.append(msg)
        a, b = float(y.mean()), float("nan")
        resid = float(np.sqrt(np.mean((y - a) ** 2)))
    else:
        design = np.column_stack([np.ones_like(x), x])
        (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
        a, b = float(a), float(b)
        resid = float(np.sqrt(np.mean((design @ [a, b] - y) ** 2)))

    n = actions
    k = n / (n - 1)
    if retain is None:
        v = volatility
        # a = 1 - r + v (n r - 1)/(n - 1)  ->  r (k v - 1) = a - 1 + v/(n-1)
        r = (a - 1 + v / (n - 1)) / (k * v - 1)
        if change is None:
            # b = (r - l)(1 - k v) when c = l
            l = r - b / (1 - k * v)
        else:
            # b = r - l + v (n l + l - n r - c)/(n - 1)
            l = (b - r + v * (n * r + change) / (n - 1)) / (v * (n + 1) / (n - 1) - 1)
    else:
        r = retain
        # solve a for v
        v = (a - 1 + r) / ((n * r - 1) / (n - 1)) if n * r != 1 else float("nan")
        if change is None:
            l = r - b / (1 - k * v)
        else:
            l = (b - r + v * (n * r + change) / (n - 1)) / (v * (n + 1) / (n - 1) - 1)
    c = l if change is None else change
    return ClriFit(float(r), float(l), float(v), float(c), a, b, resid, tuple(notes))


def results_to_csv(predicted: ErrorTrajectory, sim: SimulationResult | None) -> str:
    """Long format: one row per (step, agent)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "agent", "predicted", "empirical", "half_width"])
    steps, n_agents = predicted.values.shape
    for t in range(steps):
        for i in range(n_agents):
            row = [t, i, repr(float(predicted.values[t, i]))]
            if sim is not None:
                row += [repr(float(sim.mean.values[t, i])), repr(float(sim.half_width[t, i]))]
            else:
                row += ["", ""]
            writer.writerow(row)
    return buf.getvalue()
