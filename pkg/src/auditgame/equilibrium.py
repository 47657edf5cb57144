"""Best responses and worst/best equilibrium evaluation for a fixed audit vector.

Every agent who misreports ``k`` gets the same utility
``pay(k) - p_k pen(k)`` whatever its true type, so the whole equilibrium set
is pinned down by the highest misreport utility and the lowest type willing
to tell the truth.  Types below that threshold lie into the set of reports
attaining the highest misreport utility, types above it are truthful, and the
threshold type itself may be indifferent.  The equilibrium set is the product
of the per-type best-response sets, so worst and best cases decompose per
type.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from .game import AuditGame, Costly

#: Absolute tolerance for ties in misreport utility.
TIE_TOL = 1e-9


class Objective(enum.Enum):
    UTILITY = "utility"
    WELFARE = "welfare"

    @classmethod
    def parse(cls, value) -> "Objective":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class SingleMinded:
    """Types ``< iota`` all report ``kappa``; the rest are truthful."""

    iota: int
    kappa: int

    def __post_init__(self):
        if self.iota < 0 or self.kappa < self.iota:
            raise ValueError(f"need 0 <= iota <= kappa, got ({self.iota}, {self.kappa})")

    def matrix(self, m: int) -> np.ndarray:
        if self.kappa >= m and self.iota > 0:
            raise ValueError(f"kappa = {self.kappa} out of range for m = {m}")
        Q = np.eye(m)
        Q[: self.iota] = 0.0
        Q[: self.iota, self.kappa] = 1.0
        return Q


@dataclass(frozen=True, eq=False)
class Dense:
    """Row-stochastic report matrix, ``Q[i, k] = P(type i reports k)``."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"report matrix must be square, got {Q.shape}")
        if np.any(Q < -1e-12) or not np.allclose(Q.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("report matrix must be row-stochastic")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    def matrix(self, m: int) -> np.ndarray:
        if self.Q.shape[0] != m:
            raise ValueError(f"report matrix is {self.Q.shape[0]}x{self.Q.shape[0]}, game has m = {m}")
        return np.array(self.Q)

    def __eq__(self, other):
        if not isinstance(other, Dense):
            return NotImplemented
        return np.array_equal(self.Q, other.Q)

    __hash__ = None


ReportStrategy = Union[SingleMinded, Dense]


def report_distribution(q, strategy, m: int | None = None) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q @ strategy.matrix(q.shape[0] if m is None else m)


def as_single_minded(Q: np.ndarray) -> SingleMinded | None:
    """Return the single-minded form of a pure report matrix, if it has one."""
    Q = np.asarray(Q)
    m = Q.shape[0]
    if not np.all((Q == 0.0) | (Q == 1.0)):
        return None
    reports = Q.argmax(axis=1)
    liars = np.flatnonzero(reports != np.arange(m))
    if liars.size == 0:
        return SingleMinded(0, 0)
    iota = int(liars.max()) + 1
    if not np.array_equal(liars, np.arange(iota)):
        return None
    kappas = set(reports[:iota].tolist())
    if len(kappas) != 1:
        return None
    kappa = kappas.pop()
    if kappa < iota:
        return None
    return SingleMinded(iota, int(kappa))


@dataclass(frozen=True)
class EquilibriumSummary:
    misreport_utils: np.ndarray
    u_hat: float
    A_hat: tuple
    i_truth: int
    strict: bool
    truthful_utils: np.ndarray

    @property
    def indifferent(self) -> bool:
        """Whether type ``i_truth`` is indifferent between truth and lying."""
        m = len(self.truthful_utils)
        return self.i_truth < m and abs(self.truthful_utils[self.i_truth] - self.u_hat) <= TIE_TOL


def rho(game: AuditGame, k: int, u: float) -> float:
    """Audit probability on report ``k`` that makes lying as ``k`` worth ``u``.

    Not clamped to ``[0, 1]``.
    """
    return (game.pay[k] - u) / game.pen[k]


def check_audit_vector(p, m: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (m,):
        raise ValueError(f"audit vector must have length {m}, got shape {p.shape}")
    if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
        raise ValueError(f"audit probabilities must lie in [0, 1]: {p}")
    return p


def summarize(game: AuditGame, p) -> EquilibriumSummary:
    p = check_audit_vector(p, game.m)
    mis = game.pay - p * game.pen
    u_hat = float(mis.max())
    A_hat = tuple(int(k) for k in np.flatnonzero(mis >= u_hat - TIE_TOL))
    willing = np.flatnonzero(game.pay >= u_hat - TIE_TOL)
    i_truth = int(willing[0]) if willing.size else game.m
    strict = not bool(np.any(np.abs(game.pay - u_hat) <= TIE_TOL))
    return EquilibriumSummary(
        misreport_utils=mis,
        u_hat=u_hat,
        A_hat=A_hat,
        i_truth=i_truth,
        strict=strict,
        truthful_utils=game.pay.copy(),
    )


def best_response_set(game: AuditGame, summary: EquilibriumSummary, i: int) -> frozenset:
    if i > summary.i_truth:
        return frozenset({i})
    if i < summary.i_truth:
        return frozenset(summary.A_hat)
    if summary.indifferent:
        return frozenset(summary.A_hat) | {i}
    return frozenset({i})


def audit_cost(game: AuditGame) -> float:
    """Per-audit cost; budgeted games carry none in the objective."""
    return game.regime.lam if isinstance(game.regime, Costly) else 0.0


def payoff_matrix(game: AuditGame, p, objective=Objective.UTILITY) -> np.ndarray:
    """Per-unit-mass objective ``R[i, k]`` when type ``i`` reports ``k``."""
    objective = Objective.parse(objective)
    p = np.asarray(p, dtype=float)
    lam = audit_cost(game)
    m = game.m
    if objective is Objective.UTILITY:
        R = game.val - game.pay[None, :] + p[None, :] * (game.pen[None, :] - lam)
        # truthful reports are never penalised
        R[np.arange(m), np.arange(m)] = np.diag(game.val) - game.pay - p * lam
    else:
        R = game.val - lam * p[None, :]
    return R


def _evaluate(game, p, objective, pick):
    summary = summarize(game, p)
    R = payoff_matrix(game, p, objective)
    m = game.m
    Q = np.zeros((m, m))
    total = 0.0
    for i in range(m):
        options = sorted(best_response_set(game, summary, i))
        vals = R[i, options]
        k = options[int(pick(vals))]
        Q[i, k] = 1.0
        total += game.q[i] * R[i, k]
    return game.n * total, Dense(Q)


def evaluate_worst(game: AuditGame, p, objective=Objective.UTILITY):
    """Objective at the equilibrium worst for the principal.

    Returns ``(value, witness)`` where the witness is a pure report matrix.
    """
    return _evaluate(game, p, objective, np.argmin)


def evaluate_best(game: AuditGame, p, objective=Objective.UTILITY):
    return _evaluate(game, p, objective, np.argmax)


def strategy_value(game: AuditGame, p, strategy, objective=Objective.UTILITY) -> float:
    """Objective of an arbitrary report strategy, summed term by term."""
    objective = Objective.parse(objective)
    Q = strategy.matrix(game.m)
    lam = audit_cost(game)
    total = 0.0
    for i in range(game.m):
        for k in range(game.m):
            if Q[i, k] == 0.0:
                continue
            if objective is Objective.UTILITY:
                fine = game.pen[k] if i != k else 0.0
                r = game.val[i, k] - game.pay[k] + p[k] * fine - lam * p[k]
            else:
                r = game.val[i, k] - lam * p[k]
            total += game.q[i] * Q[i, k] * r
    return game.n * total


@dataclass(frozen=True)
class Metrics:
    misreport_mass: float
    audit_rate: float
    expected_audits: float
    distortion: np.ndarray


def metrics(game: AuditGame, p, strategy) -> Metrics:
    m = game.m
    Q = strategy.matrix(m)
    p = np.asarray(p, dtype=float)
    mass = game.q[:, None] * Q
    off = ~np.eye(m, dtype=bool)
    audit_rate = float((mass * p[None, :]).sum())
    idx = np.arange(m)
    dist = np.abs(idx[:, None] - idx[None, :]) / (m - 1)
    return Metrics(
        misreport_mass=float(mass[off].sum()),
        audit_rate=audit_rate,
        expected_audits=game.n * audit_rate,
        distortion=(Q * dist).sum(axis=1),
    )
