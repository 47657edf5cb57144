"""Adaptive (report-dependent) audit policies.

A dictator policy commits to ``p_star`` only when the observed report
distribution equals a target ``qhat_star`` and otherwise switches to a
fallback that destroys every other equilibrium.  That pins the agents to the
target equilibrium, so the principal can pick the best one rather than
suffer the worst.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    Objective,
    SingleMinded,
    as_single_minded,
    evaluate_best,
    report_distribution,
    strategy_value,
)
from .game import AuditGame, Budgeted, Costly, insensitivity, require_valid
from .nonadaptive import check_epsilon, critical_indices, critical_vector, precompute_tables

#: L-infinity tolerance for matching report distributions.
DIST_TOL = 1e-9


@dataclass(frozen=True)
class BudgetDiagnostics:
    beta: float
    small_budget: bool
    cost_fn_coeffs: tuple | None = None


@dataclass(frozen=True)
class DictatorPolicy:
    p_star: np.ndarray
    qhat_star: np.ndarray
    regime: Costly | Budgeted
    value: float
    witness: SingleMinded | None = None
    branch: str = "costly"
    bound: float | None = None
    diagnostics: BudgetDiagnostics | None = field(default=None, compare=False)


class InsensitivityError(ValueError):
    def __init__(self, pairs):
        self.pairs = list(pairs)
        k, l = self.pairs[0]
        super().__init__(f"insensitivity violated at (k,l)=({k},{l}): "
                         "pay(l)/pay(k) < pen(l)/pen(k)")


def apply_policy(policy: DictatorPolicy, game: AuditGame, qhat) -> np.ndarray:
    """Audit vector the policy plays when it observes report distribution ``qhat``."""
    qhat = np.asarray(qhat, dtype=float)
    m = game.m
    if np.max(np.abs(qhat - policy.qhat_star)) <= DIST_TOL:
        return np.array(policy.p_star)
    if isinstance(policy.regime, Costly):
        if np.max(np.abs(qhat - game.q)) <= DIST_TOL:
            return np.zeros(m)
        return np.ones(m)
    p = np.zeros(m)
    if qhat[-1] > game.q[-1] + DIST_TOL:
        p[-1] = min(policy.regime.budget / (game.n * qhat[-1]), 1.0)
    return p


def solve_adaptive_costly(game: AuditGame, eps: float = 1e-3,
                          objective=Objective.UTILITY) -> DictatorPolicy:
    """Dictator policy around the best critical vector, judged at its best equilibrium."""
    objective = Objective.parse(objective)
    require_valid(game)
    if not game.is_costly:
        raise ValueError("adaptive costly solver needs a costly game")
    flag = insensitivity(game)
    if not flag.holds:
        raise InsensitivityError(flag.violations)
    check_epsilon(game, eps)
    best = None
    for idx in critical_indices(game.m):
        p = critical_vector(game, idx, eps)
        value, witness = evaluate_best(game, p, objective)
        if best is None or value > best[0]:
            best = (value, p, witness, idx)
    value, p, witness, idx = best
    sm = as_single_minded(witness.Q) or SingleMinded(idx.iota, idx.kappa)
    return DictatorPolicy(
        p_star=p,
        qhat_star=report_distribution(game.q, sm),
        regime=game.regime,
        value=value,
        witness=sm,
    )


def budget_beta(game: AuditGame) -> BudgetDiagnostics:
    if game.m < 2:
        raise ValueError("need m >= 2")
    beta = float((game.pay[-1] - game.pay[-2]) / game.pen[-1])
    return BudgetDiagnostics(beta=beta, small_budget=game.budget <= game.n * beta)


def cost_coefficients(game: AuditGame, iota: int, kappa: int) -> tuple:
    """``(a, b)`` with expected audits ``a - b u`` when every report ``>= iota`` is held at level ``u``."""
    w = np.zeros(game.m)
    w[iota:] = game.q[iota:]
    w[kappa] += game.q[:iota].sum()
    a = game.n * float(np.sum(w * game.pay / game.pen))
    b = game.n * float(np.sum(w / game.pen))
    return a, b


def _small_budget_policy(game, objective, diag, branch):
    m = game.m
    B = game.budget
    p = np.zeros(m)
    p[-1] = min(B / game.n, 1.0)
    sm = SingleMinded(m - 1, m - 1)
    value = strategy_value(game, p, sm, objective)
    bound = game.n * (float(np.sum(game.q * (game.val[:, -1] - game.pay[-1])))
                      + B / game.n * game.pen[-1])
    return DictatorPolicy(p_star=p, qhat_star=report_distribution(game.q, sm),
                          regime=game.regime, value=value, witness=sm, branch=branch,
                          bound=bound, diagnostics=diag)


def solve_adaptive_budgeted(game: AuditGame, objective=Objective.UTILITY) -> DictatorPolicy:
    """Optimal dictator policy under an expected-audit budget.

    With a small budget every agent pools on the top report and the whole
    budget goes to it.  Otherwise each single-minded report strategy is paired
    with the cheapest-level audit vector that keeps it an equilibrium within
    budget, and the best pair wins.
    """
    objective = Objective.parse(objective)
    require_valid(game)
    if not isinstance(game.regime, Budgeted):
        raise ValueError("budgeted solver needs a budgeted game")
    if game.n <= 0:
        raise ValueError("budgeted solver needs positive agent mass")
    diag = budget_beta(game)
    if diag.small_budget:
        return _small_budget_policy(game, objective, diag, "small")

    B = game.budget
    tables = precompute_tables(game)
    best = None
    for iota in range(game.m):
        for kappa in range(iota, game.m):
            a, b = cost_coefficients(game, iota, kappa)
            # cheapest level is the lowest one: utility falls as the level rises
            u = max(game.pay_prev(iota), (a - B) / b)
            if u > game.pay[iota] + 1e-12:
                continue
            if objective is Objective.UTILITY:
                v = game.n * (tables.M[iota, kappa] - tables.F[iota] * u + tables.H[iota])
            else:
                v = game.n * (tables.M[iota, kappa] + tables.H_welfare[iota])
            if best is None or v > best[0]:
                best = (v, iota, kappa, u, (a, b))
    if best is None:
        return _small_budget_policy(game, objective, diag, "fallback")
    _, iota, kappa, u, coeffs = best
    p = np.zeros(game.m)
    p[iota:] = (game.pay[iota:] - u) / game.pen[iota:]
    sm = SingleMinded(iota, kappa)
    value = strategy_value(game, p, sm, objective)
    return DictatorPolicy(
        p_star=p,
        qhat_star=report_distribution(game.q, sm),
        regime=game.regime,
        value=value,
        witness=sm,
        branch="sufficient",
        diagnostics=BudgetDiagnostics(diag.beta, False, coeffs),
    )


def expected_audits(game: AuditGame, p, strategy) -> float:
    return game.n * float(report_distribution(game.q, strategy) @ np.asarray(p))


@dataclass(frozen=True)
class MisreportIncentive:
    p: np.ndarray
    level: float
    eps_mi: float

    def __iter__(self):
        return iter((self.p, self.eps_mi))


def _clamped_audits(pay, pen, u):
    out = np.zeros_like(pay)
    live = pen > 0
    out[live] = np.clip((pay[live] - u) / pen[live], 0.0, 1.0)
    return out


def minimize_misreport_incentive(game: AuditGame, qhat, B: float) -> MisreportIncentive:
    """Water-fill the budget to push down the largest misreport utility.

    Unpacks as ``(p, eps_mi)``; ``level`` is the resulting highest misreport
    utility.  Only ``pay``, ``pen`` and ``n`` of the game are used, and
    zero payments and penalties are allowed.
    """
    qhat = np.asarray(qhat, dtype=float)
    pay, pen, n = game.pay, game.pen, game.n
    if B < 0:
        raise ValueError("budget must be nonnegative")

    def cost(u):
        return n * float(qhat @ _clamped_audits(pay, pen, u))

    floor = float(np.max(pay - pen))
    top = float(np.max(pay))
    if cost(floor) <= B:
        level = floor
    else:
        knots = np.unique(np.concatenate((pay, pay - pen)))
        knots = np.sort(knots[(knots >= floor) & (knots <= top)])[::-1]
        hi, c_hi = knots[0], cost(knots[0])
        level = hi
        for lo in knots[1:]:
            c_lo = cost(lo)
            if c_lo > B:
                # cost is linear on [lo, hi]; solve cost(u) = B there
                level = hi - (B - c_hi) * (hi - lo) / (c_lo - c_hi)
                break
            hi, c_hi = lo, c_lo
            level = hi
    p = _clamped_audits(pay, pen, level)
    return MisreportIncentive(p=p, level=level, eps_mi=level - float(pay.min()))
