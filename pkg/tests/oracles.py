"""Independent reference computations used to check the library.

Each oracle is written from the definitions with plain loops, sharing no
code with the package beyond reading payoff arrays.
"""

import itertools

import numpy as np


def outcome_average(payoffs, player, mixes):
    """Expected payoff by enumerating every pure outcome."""
    total = 0.0
    for prof in itertools.product(*(range(len(m)) for m in mixes)):
        p = 1.0
        for m, a in zip(mixes, prof):
            p *= m[a]
        total += p * payoffs[prof][player]
    return total


def pure_nash_2p(row, col):
    row, col = np.asarray(row), np.asarray(col)
    out = set()
    for a in range(row.shape[0]):
        for b in range(row.shape[1]):
            if row[a, b] >= row[:, b].max() and col[a, b] >= col[a, :].max():
                out.add((a, b))
    return out


def strict_survivors_random_order(game, rng):
    """Strict elimination one action at a time, in a random order."""
    alive = [list(range(n)) for n in game.shape]
    u = game.payoffs
    while True:
        cands = [(i, a) for i in range(game.n_players) for a in alive[i]
                 if len(alive[i]) > 1]
        rng.shuffle(cands)
        for i, a in cands:
            if _dominated(u, alive, i, a):
                alive[i].remove(a)
                break
        else:
            return [tuple(s) for s in alive]


def _value(u, i, own, opp):
    prof = list(opp)
    prof.insert(i, own)
    return u[tuple(prof)][i]


def _dominated(u, alive, i, a):
    """Is there a mix of the other live actions beating ``a`` everywhere?

    Solved as: maximise t subject to sum_b w_b gain_b(o) >= t for every live
    opponent profile o, w on the simplex.  Dominated iff t > 0.
    """
    from scipy.optimize import linprog

    others = [b for b in alive[i] if b != a]
    opps = list(itertools.product(*(alive[j] for j in range(len(alive)) if j != i)))
    gains = np.array([[_value(u, i, b, o) - _value(u, i, a, o) for b in others]
                      for o in opps], dtype=float)
    k = len(others)
    # variables: w_1..w_k, t ; minimise -t
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([-gains, np.ones((len(opps), 1))])
    a_eq = np.hstack([np.ones((1, k)), np.zeros((1, 1))])
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(len(opps)), A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, 1)] * k + [(None, None)])
    return bool(res.status == 0 and -res.fun > 1e-9)


def ess_grid_oracle(u, p, k=200):
    """2-strategy ESS test by scanning invaders q = (x, 1 - x)."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    for x in np.linspace(0, 1, k + 1):
        q = np.array([x, 1 - x])
        if np.max(np.abs(q - p)) < 1e-12:
            continue
        a, b = p @ u @ p, q @ u @ p
        if b > a + 1e-12:
            return False
        if abs(a - b) <= 1e-12 and not p @ u @ q > q @ u @ q + 1e-12:
            return False
    return True


def clri_iterate(c, l, r, n, v, e0, steps):
    """Scalar recurrence written out term by term."""
    e = [e0]
    for _ in range(steps):
        x = e[-1]
        e.append((1 - r) + v * (n * r - 1) / (n - 1)
                 + x * ((r - l) + v * (n * (l - r) + l - c) / (n - 1)))
    return e
