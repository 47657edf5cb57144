"""Non-adaptive audit vectors: equalized and critical vectors, succinct search.

The worst-case objective has no maximizer in general, but it is approximated
within ``2 n eps`` by the best of ``m (m + 1)`` critical vectors.  Each
critical vector fixes a threshold type ``iota`` and a single lying report
``kappa``, and places the highest misreport utility just above
``pay(iota - 1)`` (``PLUS``) or just below ``pay(iota)`` (``MINUS``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .equilibrium import Objective, ReportStrategy, audit_cost, evaluate_worst, summarize
from .game import AuditGame, require_valid


class Sign(enum.Enum):
    PLUS = "+"
    MINUS = "-"


@dataclass(frozen=True)
class CriticalIndex:
    iota: int
    kappa: int
    sign: Sign

    def __post_init__(self):
        if not 0 <= self.iota <= self.kappa:
            raise ValueError(f"need 0 <= iota <= kappa, got ({self.iota}, {self.kappa})")

    def __str__(self):
        return f"({self.iota},{self.kappa},{self.sign.value})"


def critical_indices(m: int) -> list:
    """All template arms, in search order: iota, then kappa, then PLUS before MINUS."""
    return [
        CriticalIndex(i, k, s)
        for i in range(m)
        for k in range(i, m)
        for s in (Sign.PLUS, Sign.MINUS)
    ]


def max_epsilon(game: AuditGame) -> float:
    """Largest slack ``eps`` accepted by the solvers (a third of the smallest gap)."""
    return game.gamma / 3.0


def check_epsilon(game: AuditGame, eps: float) -> float:
    eps = float(eps)
    bound = max_epsilon(game)
    # gamma <= pay(0), so eps <= gamma / 3 also keeps pay(0) - eps above eps
    if not 0.0 < eps <= bound:
        raise ValueError(f"eps = {eps:g} must lie in (0, {bound:g}] for this game")
    return eps


def _equalized(game: AuditGame, u: float, A, eps: float) -> np.ndarray:
    iota = int(np.flatnonzero(game.pay >= u)[0])
    p = (game.pay - (u - eps)) / game.pen
    for k in A:
        p[k] = (game.pay[k] - u) / game.pen[k]
    p[:iota] = 0.0
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError(f"equalized vector leaves [0, 1]: {p}")
    return p


def equalized_vector(game: AuditGame, u: float, A, eps: float) -> np.ndarray:
    """Audit vector that equalizes the misreport utility of reports in ``A`` at ``u``.

    Reports below the threshold type are never audited; reports at or above
    it outside ``A`` are held at ``u - eps``.
    """
    A = sorted(set(int(k) for k in A))
    if not 0.0 < u <= game.pay.max():
        raise ValueError(f"u = {u:g} must lie in (0, max pay]")
    if not 0.0 < eps < u:
        raise ValueError(f"eps = {eps:g} must lie in (0, u)")
    iota = int(np.flatnonzero(game.pay >= u)[0])
    if any(k < iota or k >= game.m for k in A):
        raise ValueError(f"A = {A} must lie within [{iota}, {game.m})")
    return _equalized(game, u, A, eps)


def critical_level(game: AuditGame, idx: CriticalIndex, eps: float) -> float:
    if idx.sign is Sign.PLUS:
        return game.pay_prev(idx.iota) + eps
    return float(game.pay[idx.iota]) - eps


def critical_vector(game: AuditGame, idx: CriticalIndex, eps: float) -> np.ndarray:
    check_epsilon(game, eps)
    if idx.kappa >= game.m:
        raise ValueError(f"{idx} out of range for m = {game.m}")
    # PLUS at iota = 0 sits at level eps itself; the vector is still well formed
    return _equalized(game, critical_level(game, idx, eps), [idx.kappa], eps)


@dataclass(frozen=True)
class CriticalTables:
    """Prefix/suffix sums for constant-time evaluation of critical vectors.

    ``M[i, k]`` and ``F[i]`` sum over the lying types ``j < i``; ``H``,
    ``H_welfare``, ``S_pay`` and ``S_inv`` sum over the truthful types
    ``j >= i``.  All arrays have ``m + 1`` rows.
    """

    F: np.ndarray
    H: np.ndarray
    H_welfare: np.ndarray
    S_pay: np.ndarray
    S_inv: np.ndarray
    M: np.ndarray


def precompute_tables(game: AuditGame) -> CriticalTables:
    q, pay, pen, val = game.q, game.pay, game.pen, game.val
    m = game.m

    def suffix(x):
        out = np.zeros(m + 1)
        out[:m] = np.cumsum(x[::-1])[::-1]
        return out

    diag = np.diag(val)
    M = np.zeros((m + 1, m))
    M[1:] = np.cumsum(q[:, None] * val, axis=0)
    F = np.concatenate(([0.0], np.cumsum(q)))
    return CriticalTables(
        F=F,
        H=suffix(q * (diag - pay)),
        H_welfare=suffix(q * diag),
        S_pay=suffix(q * pay / pen),
        S_inv=suffix(q / pen),
        M=M,
    )


def _fast_values(game, iota, kappa, minus, eps, tables, objective):
    # iota, kappa, minus may be scalars or equal-length arrays
    pay, pen = game.pay, game.pen
    lam = audit_cost(game)
    pay_prev = game.pay_below[iota]
    c = np.where(minus, pay[iota] - 2.0 * eps, pay_prev)
    u_hat = c + eps
    p_k = (pay[kappa] - u_hat) / pen[kappa]
    F = tables.F[iota]
    audits_truth = (tables.S_pay[iota] - c * tables.S_inv[iota]) - game.q[kappa] * eps / pen[kappa]
    if objective is Objective.UTILITY:
        v = (tables.M[iota, kappa] - pay[kappa] * F + (pen[kappa] - lam) * p_k * F
             + tables.H[iota] - lam * audits_truth)
    else:
        v = tables.M[iota, kappa] - lam * p_k * F + tables.H_welfare[iota] - lam * audits_truth
    return game.n * v


def fast_compute_val(game: AuditGame, idx: CriticalIndex, eps: float,
                     tables: CriticalTables | None = None,
                     objective=Objective.UTILITY) -> float:
    """Worst-case objective at a critical vector by table lookup.

    Valid only on critical vectors, where the equilibrium is unique and
    single-minded.
    """
    objective = Objective.parse(objective)
    if tables is None:
        tables = precompute_tables(game)
    return float(_fast_values(game, idx.iota, idx.kappa, idx.sign is Sign.MINUS,
                              eps, tables, objective))


def all_critical_values(game: AuditGame, eps: float, objective=Objective.UTILITY,
                        method: str = "fast"):
    """Worst-case objective of every critical vector, in search order."""
    objective = Objective.parse(objective)
    check_epsilon(game, eps)
    arms = critical_indices(game.m)
    if method == "fast":
        tables = precompute_tables(game)
        iota = np.array([a.iota for a in arms])
        kappa = np.array([a.kappa for a in arms])
        minus = np.array([a.sign is Sign.MINUS for a in arms])
        values = _fast_values(game, iota, kappa, minus, eps, tables, objective)
    elif method == "slow":
        values = np.array([
            evaluate_worst(game, critical_vector(game, a, eps), objective)[0] for a in arms
        ])
    else:
        raise ValueError(f"unknown method {method!r}")
    return arms, values


@dataclass(frozen=True)
class SolverResult:
    p_star: np.ndarray
    value: float
    critical: CriticalIndex
    epsilon: float
    witness: ReportStrategy
    objective: Objective = Objective.UTILITY


def succinct_search(game: AuditGame, objective=Objective.UTILITY, eps: float = 1e-3,
                    method: str = "fast") -> SolverResult:
    """Best critical vector for the worst-case objective; ``2 n eps``-optimal."""
    objective = Objective.parse(objective)
    require_valid(game)
    if not game.is_costly:
        raise ValueError("succinct search needs a costly game")
    arms, values = all_critical_values(game, eps, objective, method)
    # argmax keeps the first maximum, i.e. update only on strict improvement
    best = arms[int(np.argmax(values))]
    p = critical_vector(game, best, eps)
    value, witness = evaluate_worst(game, p, objective)
    return SolverResult(p_star=p, value=value, critical=best, epsilon=eps,
                        witness=witness, objective=objective)


def monotone_transform(game: AuditGame, p, pen_new):
    """Rescale ``p`` so that a larger penalty leaves every misreport utility fixed."""
    pen_new = np.asarray(pen_new, dtype=float)
    if pen_new.shape != game.pen.shape:
        raise ValueError("pen_new must match the game's penalty shape")
    if np.any(pen_new < game.pen):
        bad = np.flatnonzero(pen_new < game.pen).tolist()
        raise ValueError(f"pen_new is below pen at {bad}")
    p = np.asarray(p, dtype=float)
    return game.replace(pen=pen_new), game.pen / pen_new * p


def is_realized(game: AuditGame, idx: CriticalIndex, eps: float) -> bool:
    """Check that a critical vector realizes its intended equilibrium structure."""
    p = critical_vector(game, idx, eps)
    s = summarize(game, p)
    return (s.strict and s.i_truth == idx.iota and s.A_hat == (idx.kappa,)
            and abs(s.u_hat - critical_level(game, idx, eps)) <= 1e-9)
