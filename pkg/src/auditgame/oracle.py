"""Brute-force checks that share no code path with the solvers.

``grid_best`` scans a regular grid of audit vectors and, at every point,
finds each type's best responses by comparing its utilities directly.
``enumerate_equilibria`` lists the pure equilibria and checks each against the
equilibrium inequalities one by one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba
import numpy as np

from .equilibrium import Dense, Objective
from .game import AuditGame, Costly

ORACLE_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    step: float = 1.0 / 256
    force: bool = False
    cell_cap: int = 200_000_000

    def points_per_axis(self) -> int:
        k = round(1.0 / self.step)
        if k < 1 or abs(k * self.step - 1.0) > 1e-12:
            raise ValueError(f"grid step must divide 1, got {self.step!r}")
        return k + 1


@dataclass(frozen=True)
class GridResult:
    value: float
    p_at: np.ndarray
    slack: float
    cells: int


class GridTooLarge(ValueError):
    pass


@numba.njit(cache=True, inline="always")
def _point_value(p, q, val, pay, pen, lam, welfare, worst, tol, mis):
    m = q.shape[0]
    # worst case is the max of the negated payoff
    sgn = -1.0 if worst else 1.0
    fine_w = 0.0 if welfare else 1.0
    for k in range(m):
        mis[k] = pay[k] - p[k] * pen[k]
    total = 0.0
    for i in range(m):
        # type i's utility for report k is mis[k], except the unpenalised truth
        best_u = pay[i]
        for k in range(m):
            if k != i and mis[k] > best_u:
                best_u = mis[k]
        cut = best_u - tol
        pick = -np.inf
        if pay[i] >= cut:
            pick = sgn * (val[i, i] - fine_w * pay[i] - lam * p[i])
        for k in range(m):
            if k != i and mis[k] >= cut:
                r = sgn * (val[i, k] + fine_w * (p[k] * pen[k] - pay[k]) - lam * p[k])
                if r > pick:
                    pick = r
        total += q[i] * sgn * pick
    return total


@numba.njit(cache=True)
def _grid_scan(q, val, pay, pen, lam, welfare, worst, tol, npts, step):
    m = q.shape[0]
    sgn = -1.0 if worst else 1.0
    fine_w = 0.0 if welfare else 1.0
    digits = np.zeros(m, dtype=np.int64)
    p = np.zeros(m)
    best = -np.inf
    best_digits = digits.copy()
    mis = np.empty(m)
    axis = np.minimum(np.arange(npts) * step, 1.0)
    # Per outer cell, each type's best utility over reports >= 1 (truth
    # included) and its best option among those reports.  Report 0 never
    # beats pay(i) > pay(0) for i >= 1, so the cut is fixed along axis 0.
    const_u = np.empty(m)
    const_pick = np.empty(m)
    while True:
        for k in range(1, m):
            mis[k] = pay[k] - p[k] * pen[k]
        for i in range(m):
            bu = pay[i]
            for k in range(1, m):
                if k != i and mis[k] > bu:
                    bu = mis[k]
            const_u[i] = bu
            cut = bu - tol
            pick = -np.inf
            for k in range(1, m):
                ok = pay[i] >= cut if k == i else mis[k] >= cut
                if ok:
                    fine = 0.0 if k == i else fine_w * pen[k]
                    r = sgn * (val[i, k] - fine_w * pay[k] + p[k] * fine - lam * p[k])
                    if r > pick:
                        pick = r
            const_pick[i] = pick
        truth0 = pay[0] >= const_u[0] - tol
        for d in range(npts):
            p0 = axis[d]
            mis0 = pay[0] - p0 * pen[0]
            pick = const_pick[0]
            if truth0:
                r = sgn * (val[0, 0] - fine_w * pay[0] - lam * p0)
                if r > pick:
                    pick = r
            total = q[0] * sgn * pick
            for i in range(1, m):
                pick = const_pick[i]
                if mis0 >= const_u[i] - tol:
                    r = sgn * (val[i, 0] + fine_w * (p0 * pen[0] - pay[0]) - lam * p0)
                    if r > pick:
                        pick = r
                total += q[i] * sgn * pick
            if total > best:
                best = total
                digits[0] = d
                best_digits[:] = digits
        j = 1
        while j < m and digits[j] == npts - 1:
            digits[j] = 0
            p[j] = 0.0
            j += 1
        if j == m:
            break
        digits[j] += 1
        p[j] = axis[digits[j]]
    return best, best_digits


def _lam(game):
    return game.regime.lam if isinstance(game.regime, Costly) else 0.0


def point_value(game: AuditGame, p, objective=Objective.UTILITY, worst: bool = True) -> float:
    objective = Objective.parse(objective)
    return game.n * _point_value(np.asarray(p, dtype=float), game.q, game.val, game.pay,
                                 game.pen, _lam(game), objective is Objective.WELFARE,
                                 worst, ORACLE_TOL, np.empty(game.m))


def grid_best(game: AuditGame, objective=Objective.UTILITY, grid: GridSpec | None = None,
              mode: str = "worst") -> GridResult:
    """Maximize the worst- (or best-) case objective over a grid of audit vectors.

    ``slack`` is advisory: the largest change of the objective between the
    maximizing cell and its axis neighbours.  The objective can jump, so it
    is not a certified bound.
    """
    grid = grid or GridSpec()
    objective = Objective.parse(objective)
    if mode not in ("worst", "best"):
        raise ValueError(f"mode must be 'worst' or 'best', got {mode!r}")
    m = game.m
    npts = grid.points_per_axis()
    cells = npts ** m
    if m > 4 and not grid.force:
        raise GridTooLarge(f"m = {m} > 4; pass force=True to scan anyway")
    if cells > grid.cell_cap:
        raise GridTooLarge(f"grid has {cells} cells, cap is {grid.cell_cap}; "
                           f"raise the cap to at least {cells}")
    worst = mode == "worst"
    welfare = objective is Objective.WELFARE
    best, digits = _grid_scan(game.q, game.val, game.pay, game.pen, _lam(game),
                              welfare, worst, ORACLE_TOL, npts, grid.step)
    p_at = np.minimum(digits * grid.step, 1.0)
    slack = 0.0
    for j in range(m):
        for d in (-1, 1):
            nd = digits[j] + d
            if 0 <= nd < npts:
                pn = p_at.copy()
                pn[j] = min(nd * grid.step, 1.0)
                v = _point_value(pn, game.q, game.val, game.pay, game.pen, _lam(game),
                                 welfare, worst, ORACLE_TOL, np.empty(m))
                slack = max(slack, abs(v - best))
    return GridResult(value=game.n * best, p_at=p_at, slack=game.n * slack, cells=cells)


def _agent_utility(game, p, i, k):
    return game.pay[k] - p[k] * (game.pen[k] if i != k else 0.0)


def is_equilibrium(game: AuditGame, p, Q, tol: float = ORACLE_TOL) -> bool:
    """No type puts weight on a report it strictly prefers less than another."""
    m = game.m
    for i in range(m):
        for k in range(m):
            if Q[i, k] <= 0:
                continue
            for l in range(m):
                if _agent_utility(game, p, i, k) < _agent_utility(game, p, i, l) - tol:
                    return False
    return True


def enumerate_equilibria(game: AuditGame, p, cap: int = 10**6) -> list:
    """Pure (extreme-point) equilibria at ``p``."""
    p = np.asarray(p, dtype=float)
    m = game.m
    options = []
    for i in range(m):
        utils = [_agent_utility(game, p, i, k) for k in range(m)]
        top = max(utils)
        options.append([k for k in range(m) if utils[k] >= top - ORACLE_TOL])
    count = int(np.prod([len(o) for o in options]))
    if count > cap:
        raise GridTooLarge(f"{count} pure equilibria exceed the cap {cap}")
    out = []
    for choice in itertools.product(*options):
        Q = np.zeros((m, m))
        Q[np.arange(m), list(choice)] = 1.0
        if is_equilibrium(game, p, Q):
            out.append(Dense(Q))
    return out


def equilibrium_value(game: AuditGame, p, Q, objective=Objective.UTILITY) -> float:
    """Objective of report matrix ``Q`` at ``p``, summed over all type/report pairs."""
    objective = Objective.parse(objective)
    if isinstance(Q, Dense):
        Q = Q.Q
    lam = _lam(game)
    total = 0.0
    for i in range(game.m):
        for k in range(game.m):
            w = game.q[i] * Q[i, k]
            if w == 0:
                continue
            if objective is Objective.WELFARE:
                total += w * (game.val[i, k] - p[k] * lam)
            else:
                fine = game.pen[k] if i != k else 0.0
                total += w * (game.val[i, k] - game.pay[k] + p[k] * fine - lam * p[k])
    return game.n * total


def misreport_incentive_lp(pay, pen, qhat, B: float, n: float = 1.0):
    """Minimize the highest misreport utility under an audit budget with a generic LP.

    Returns ``(p, level)``.
    """
    from scipy.optimize import linprog

    pay = np.asarray(pay, dtype=float)
    pen = np.asarray(pen, dtype=float)
    qhat = np.asarray(qhat, dtype=float)
    m = pay.shape[0]
    # variables (p_0 .. p_{m-1}, t): minimize t
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A = np.zeros((m + 1, m + 1))
    b = np.zeros(m + 1)
    for k in range(m):
        # pay_k - pen_k p_k <= t
        A[k, k] = -pen[k]
        A[k, -1] = -1.0
        b[k] = -pay[k]
    A[m, :m] = n * qhat
    b[m] = B
    bounds = [(0.0, 1.0)] * m + [(None, None)]
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return res.x[:m], float(res.x[-1])
