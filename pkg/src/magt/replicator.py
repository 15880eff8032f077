"""Discrete-time replicator dynamics on a symmetric game.

Counts follow ``phi'(s) = phi(s) * (1 + u(s))`` where ``u(s)`` is the
expected payoff of ``s`` against the current population mixture.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from magt.equilibria import _solve_indifference, _supports
from magt.errors import DynamicsDomainError, GameError, PreconditionError
from magt.game import SymmetricGame

EXTINCTION = 1e-12
STEADY_RUN = 10
# probe trajectories moving less than this per step have reached a rest point
SETTLED = 1e-15
# counts are rescaled outside this band; the exponent is tracked separately
_RESCALE_HI = 1e150
_RESCALE_LO = 1e-150


@dataclass(frozen=True, eq=False)
class Population:
    counts: np.ndarray
    log_scale: float = 0.0   # true counts are counts * exp(log_scale)

    def __post_init__(self):
        c = np.array(self.counts, dtype=float).reshape(-1)
        if c.size == 0 or np.any(c < 0) or not np.all(np.isfinite(c)):
            raise GameError("counts must be finite and non-negative")
        if c.sum() <= 0:
            raise GameError("at least one count must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_shares(cls, shares, size: float = 1.0) -> Population:
        shares = np.asarray(shares, dtype=float)
        return cls(shares / shares.sum() * size)

    @property
    def shares(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    @property
    def size(self) -> float:
        return float(self.counts.sum() * np.exp(self.log_scale))


def _shares(pop):
    return pop.shares if isinstance(pop, Population) else np.asarray(pop, dtype=float)


def strategy_fitness(sym: SymmetricGame, pop) -> np.ndarray:
    """Expected payoff of each strategy against the population mixture."""
    theta = _shares(pop)
    if theta.shape != (sym.n_actions,):
        raise GameError("population does not match the game's strategy count")
    return sym.payoff @ theta


def replicator_step(sym: SymmetricGame, pop: Population) -> Population:
    fitness = strategy_fitness(sym, pop)
    factor = 1.0 + fitness
    live = pop.counts > 0
    if np.any(factor[live] < 0):
        bad = [sym.actions[i] for i in np.flatnonzero(live & (factor < 0))]
        raise DynamicsDomainError(
            f"growth factor 1 + u is negative for {bad}; rescale payoffs "
            "(SymmetricGame.rescaled or affine) so that 1 + u >= 0")
    if np.all(factor[live] == 0):
        raise DynamicsDomainError(
            "population went extinct (all growth factors zero); rescale payoffs")
    if np.all(factor[live] == factor[live][0]):
        # a common factor only changes the scale; keep counts bit-exact
        return Population(pop.counts, pop.log_scale + float(np.log(factor[live][0])))
    counts = pop.counts * factor
    total = counts.sum()
    log_scale = pop.log_scale
    if total > _RESCALE_HI or total < _RESCALE_LO:
        counts = counts / total
        log_scale += float(np.log(total))
    return Population(counts, log_scale)


def share_step(sym: SymmetricGame, shares: np.ndarray) -> np.ndarray:
    """The induced map on shares; vectorised over leading axes."""
    shares = np.asarray(shares, dtype=float)
    grown = shares * (1.0 + shares @ sym.payoff.T)
    return grown / grown.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class ReplicatorTrace:
    game: SymmetricGame
    shares: np.ndarray          # (steps + 1, n)
    fitness: np.ndarray         # (steps + 1, n)
    status: str                 # steady | budget_exhausted
    final: Population
    extinctions: tuple[tuple[int, int], ...] = ()   # (strategy, step)

    @property
    def steady_shares(self):
        return self.shares[-1] if self.status == "steady" else None


def run_replicator(sym: SymmetricGame, initial: Population, budget: int = 10_000,
                   eps: float = 1e-8) -> ReplicatorTrace:
    """Iterate until shares move less than ``eps`` for ten consecutive steps.

    Shares that drop below ``EXTINCTION`` are clamped to zero and logged.
    """
    if budget < 1:
        raise GameError("budget must be at least 1")
    if eps <= 0:
        raise GameError("eps must be positive")
    pop = initial
    shares = [pop.shares]
    fitness = [strategy_fitness(sym, pop)]
    extinct = []
    quiet = 0
    status = "budget_exhausted"
    for step in range(1, budget + 1):
        pop = replicator_step(sym, pop)
        theta = pop.shares
        dying = (theta < EXTINCTION) & (pop.counts > 0)
        if dying.any():
            counts = pop.counts.copy()
            counts[dying] = 0.0
            pop = Population(counts, pop.log_scale)
            extinct.extend((int(s), step) for s in np.flatnonzero(dying))
            theta = pop.shares
        change = float(np.max(np.abs(theta - shares[-1])))
        shares.append(theta)
        fitness.append(strategy_fitness(sym, pop))
        quiet = quiet + 1 if change < eps else 0
        if quiet >= STEADY_RUN:
            status = "steady"
            break
    return ReplicatorTrace(sym, np.array(shares), np.array(fitness), status,
                           pop, tuple(extinct))


def steady_states(sym: SymmetricGame, tol: float = 1e-9) -> list[np.ndarray]:
    """Rest points of the share dynamics: on each face of the simplex, the
    mixture that equalises fitness across that face's strategies."""
    n = sym.n_actions
    out = []
    for support in _supports(n):
        x = _solve_indifference(sym.payoff, support, support)
        if x is None or x.min() < -tol:
            continue
        p = np.zeros(n)
        p[list(support)] = np.clip(x, 0, None)
        p /= p.sum()
        if any(np.max(np.abs(p - q)) < 1e-7 for q in out):
            continue
        if np.max(np.abs(share_step(sym, p) - p)) < tol:
            out.append(p)
    return out


@dataclass(frozen=True)
class ProbeResult:
    stable: bool
    final_distances: np.ndarray
    max_distances: np.ndarray
    returned: np.ndarray


def stability_probe(sym: SymmetricGame, candidate, perturbation: float = 0.01,
                    trials: int = 20, seed: int = 0, budget: int = 5000,
                    eps: float = 1e-8) -> ProbeResult:
    """Perturb a steady state and see whether the dynamics bring it back.

    Each trial moves the shares by exactly ``perturbation`` in max-norm towards
    a random interior point of the simplex, so every strategy (including
    absent ones) is injected.  A trial returns if it ends within
    ``perturbation / 2`` of the candidate; the state is stable iff all do.
    Iteration stops early once every trajectory sits on a rest point.
    """
    candidate = np.asarray(candidate, dtype=float)
    if candidate.shape != (sym.n_actions,):
        raise GameError("candidate does not match the game's strategy count")
    if trials < 1:
        raise GameError("trials must be at least 1")
    if np.max(np.abs(share_step(sym, candidate) - candidate)) >= eps:
        raise PreconditionError("candidate is not a steady state of the dynamics")
    positive = candidate[candidate > 0]
    if not 0 < perturbation < positive.min() + 1e-15:
        raise PreconditionError(
            "perturbation must be positive and below the smallest positive share")
    if np.any(1.0 + sym.payoff < 0):
        raise DynamicsDomainError(
            "payoffs allow negative growth factors; rescale before probing")
    rng = np.random.default_rng(seed)
    target = rng.dirichlet(np.ones(sym.n_actions), size=trials)
    direction = target - candidate
    norms = np.max(np.abs(direction), axis=1, keepdims=True)
    theta = candidate + perturbation * direction / norms
    theta = np.clip(theta, 0, None)
    theta /= theta.sum(axis=1, keepdims=True)
    max_dist = np.max(np.abs(theta - candidate), axis=1)
    u_t = np.ascontiguousarray(sym.payoff.T)
    for _ in range(budget):
        grown = theta * (1.0 + theta @ u_t)
        nxt = grown / grown.sum(axis=1)[:, None]
        moved = np.abs(nxt - theta).max()
        theta = nxt
        np.maximum(max_dist, np.abs(theta - candidate).max(axis=1), out=max_dist)
        if moved < SETTLED:
            break
    final = np.max(np.abs(theta - candidate), axis=1)
    returned = final <= perturbation / 2
    return ProbeResult(bool(returned.all()), final, max_dist, returned)


def trace_to_csv(trace: ReplicatorTrace) -> str:
    acts = trace.game.actions
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step"] + [f"share_{a}" for a in acts] + [f"fitness_{a}" for a in acts])
    for k, (s, f) in enumerate(zip(trace.shares, trace.fitness)):
        writer.writerow([k] + [repr(float(x)) for x in s] + [repr(float(x)) for x in f])
    status = trace.status
    if status == "steady":
        status += " shares=" + ",".join(repr(float(x)) for x in trace.shares[-1])
    for s, step in trace.extinctions:
        buf.write(f"# extinction: {acts[s]} step={step}\n")
    buf.write(f"# status: {status}\n")
    return buf.getvalue()


def probe_to_csv(result: ProbeResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "max_distance", "final_distance", "returned"])
    for k, (m, f, r) in enumerate(zip(result.max_distances, result.final_distances,
                                      result.returned)):
        writer.writerow([k, repr(float(m)), repr(float(f)), str(bool(r)).lower()])
    return buf.getvalue()
